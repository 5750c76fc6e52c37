"""Tests for Kinetic Market."""
