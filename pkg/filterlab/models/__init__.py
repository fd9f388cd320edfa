"""
Domain models for filterlab.

This is the domain layer in a clean architecture sense.
It contains the probability-measure types, the state-space filtering problem and the experiment records.

Domain models should be independent of other layers and contain no dependencies on the application or adapters layers. Domain models only depend on utility functions.
"""
