"""Hayashi-Yoshida covariation: exact cumulants, Edgeworth expansions, Monte Carlo."""

__version__ = "0.1.0"
