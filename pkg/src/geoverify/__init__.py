"""geoverify: verification, scoring, and reward engine for interleaved
geometric reasoning traces with embedded GeoGebra-subset programs."""

__version__ = "0.1.0"
