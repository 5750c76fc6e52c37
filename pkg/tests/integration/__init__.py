"""Integration tests for Kinetic Market."""
