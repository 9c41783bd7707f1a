"""Feature learning in two-layer GCNs vs CNNs on SNM-SBM data."""

__version__ = "0.1.0"
