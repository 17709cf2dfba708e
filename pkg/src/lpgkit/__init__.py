"""Labeled Property Graph encoding and from-scratch GNN training."""

__version__ = "0.1.0"
