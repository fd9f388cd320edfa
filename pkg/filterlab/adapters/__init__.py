"""Adapters: persistence of configs, results and filter snapshots on the file system."""
