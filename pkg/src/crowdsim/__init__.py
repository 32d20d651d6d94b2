"""Synthetic crowd dataset generation, a trainable density-map counter,
and a cross-dataset evaluation harness."""

__version__ = "0.1.0"
