"""The builders module contains the application code for running experiments and building run records."""
