"""Analytic and Monte Carlo performance toolkit for n x 2 V-BLAST with
optimal ordering and zero-forcing MRC combining."""

__version__ = "0.1.0"
