"""Spectroscopic analysis toolkit for quantum-dot micropillar cavities.

Lineshape fitting (Lorentzian, Gaussian, Voigt, Fano), Q-factor and photon
lifetime extraction, planar DBR transfer-matrix simulation, diameter-dependent
loss-channel modeling and coupled-oscillator strong-coupling analysis.
"""

__version__ = "0.1.0"
