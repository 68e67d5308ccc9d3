"""Logistic branching random walks: forward simulation, quenched pair genealogies and reference formulas."""

__version__ = "0.1.0"
