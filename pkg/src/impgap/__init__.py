"""Numerical diagnostics for the infimum gap of impulsive optimal control problems.

The package solves the extended (time-reparameterized) problem by direct
transcription, checks the discrete maximum principle, decides normality by
linear programming, evaluates constraint and target qualifications, and probes
the gap between extended and strict local infima empirically.
"""
__version__ = "0.1.0"
