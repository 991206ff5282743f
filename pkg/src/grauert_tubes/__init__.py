"""Numerical verification of scaling asymptotics for spectral kernels on flat Grauert tubes.

Modules
-------
heisenberg
    Reduced Heisenberg group, Siegel domain action, model Szegő kernel.
models
    Flat torus and circle: eigenfunctions, complexification, boundary flow, Hardy norms.
smoothing
    The smoothing function ``chi`` with compactly supported Fourier transform.
geometry
    Defining function, diastasis, Heisenberg charts.
kernels
    Smoothed tempered projections and spectrally localized Szegő kernels.
stationary_phase
    Critical data of the reduced phase and an oscillatory-integral oracle.
scaling
    Heisenberg-scaled comparison with the model factor and rate fits.
"""
__version__ = "0.1.0"
