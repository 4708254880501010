"""Hysteretic porous-media wave toolkit.

Rate-independent hysteresis operators (play family, density superposition and
its convexified variant), analytic 1D eigenbases with time-Fourier modes, a
time-periodic spectral Galerkin solver for the coupled displacement/pressure
system with hysteretic storage, and diagnostics tying the numerics back to
the governing energy estimates.  A FastAPI service wraps the solver; the CLI
is a thin client of that service.
"""

__version__ = "0.1.0"
