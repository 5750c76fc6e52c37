"""Unit tests for Kinetic Market."""
