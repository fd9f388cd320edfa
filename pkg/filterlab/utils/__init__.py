"""
Utility functions for filterlab, utility functions must be independent of the domain layer and be pure functions.

Utility functions only depend on numpy, scipy and the filterlab exception types.
"""
