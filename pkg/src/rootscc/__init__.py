"""Slice-wise connected-component clustering of GPR C-scans for root mapping."""

__version__ = "0.1.0"
