"""Generative modelling of crystal structures with Bayesian flow networks.

The package covers the full pipeline: encoding crystals into a
symmetry-reduced representation (asymmetric unit, constrained lattice
vector, per-site symmetry codes), training a message-passing network on
Bayesian-flow corrupted inputs, sampling new structures step by step, and
rebuilding + scoring full unit cells.
"""

__version__ = "0.1.0"
