"""Quantum speed limits of a relaxing carbon–hydrogen spin pair.

This package models the carbon coherence of a scalar-coupled pair under
hydrogen T1 and carbon T2 relaxation, measures its path against the QFI and
Wigner–Yanase geodesics, witnesses non-Markovian revivals, and ingests and
fits measured decay curves.
"""

__all__: list[str] = []
