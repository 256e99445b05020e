"""Configuration, experiment runner, reporting and command-line entry point."""
