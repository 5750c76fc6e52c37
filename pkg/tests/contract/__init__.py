"""Contract tests for the Kinetic Market command line."""
