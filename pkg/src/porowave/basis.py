"""Analytic 1D eigenbases and time-Fourier modes.

Displacement uses the Dirichlet eigenfunctions of -a d^2/dx^2 on (0, L),
pressure the Neumann (cosine) eigenfunctions of -d^2/dx^2 including the
constant mode.  Time dependence is expanded in real Fourier modes
e_j(t) = sin(jt) for j >= 1 and cos(jt) for j <= 0 on a uniform period grid.

Trigonometric values are computed through argument-reduced sin/cos of pi*y so
that eigenfunctions and their derivatives vanish exactly (to the bit) at the
endpoints where they should.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GridError

__all__ = [
    "SpatialBasis",
    "build_spatial_basis",
    "TimeModes",
    "build_time_modes",
    "time_derivative",
    "synthesize_field",
    "project_field",
]


def _sinpi(y):
    y = np.asarray(y, dtype=float)
    k = np.round(y)
    return np.where(k % 2 == 0, 1.0, -1.0) * np.sin(np.pi * (y - k))


def _cospi(y):
    y = np.asarray(y, dtype=float)
    k = np.round(y)
    return np.where(k % 2 == 0, 1.0, -1.0) * np.cos(np.pi * (y - k))


@dataclass(frozen=True)
class SpatialBasis:
    """Orthonormal Dirichlet/Neumann eigenfamilies sampled on a Gauss grid."""

    L: float
    a: float
    m: int
    n_quad: int
    x: np.ndarray  # quadrature nodes on [0, L]
    w: np.ndarray  # quadrature weights
    lam: np.ndarray  # (m,)   Dirichlet eigenvalues a*(k*pi/L)^2
    mu: np.ndarray  # (m+1,) Neumann eigenvalues (l*pi/L)^2, mu_0 = 0
    phi: np.ndarray  # (m, n_quad)
    dphi: np.ndarray
    psi: np.ndarray  # (m+1, n_quad)
    dpsi: np.ndarray
    psi_bnd: np.ndarray  # (m+1, 2) values at x = 0 and x = L

    def phi_at(self, x):
        """Dirichlet eigenfunctions sqrt(2/L) sin(k pi x / L) at arbitrary x."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(1, self.m + 1)
        return np.sqrt(2.0 / self.L) * _sinpi(k[:, None] * x[None, :] / self.L)

    def dphi_at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k = np.arange(1, self.m + 1)
        return (
            np.sqrt(2.0 / self.L)
            * (k[:, None] * np.pi / self.L)
            * _cospi(k[:, None] * x[None, :] / self.L)
        )

    def psi_at(self, x):
        """Neumann eigenfunctions: psi_0 = sqrt(1/L), psi_l = sqrt(2/L) cos(l pi x / L)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        el = np.arange(0, self.m + 1)
        vals = np.sqrt(2.0 / self.L) * _cospi(el[:, None] * x[None, :] / self.L)
        vals[0, :] = np.sqrt(1.0 / self.L)
        return vals

    def dpsi_at(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        el = np.arange(0, self.m + 1)
        vals = (
            -np.sqrt(2.0 / self.L)
            * (el[:, None] * np.pi / self.L)
            * _sinpi(el[:, None] * x[None, :] / self.L)
        )
        vals[0, :] = 0.0
        return vals


def build_spatial_basis(L=1.0, a=1.0, m=8, n_quad=64):
    """Construct the eigenfamilies with a Gauss-Legendre rule on [0, L].

    Refuses construction when the rule cannot integrate products of the
    retained modes without aliasing (n_quad < 2m + 2).
    """
    if m < 1:
        raise GridError(f"need at least one mode, got m={m}")
    if n_quad < 2 * m + 2:
        raise GridError(f"n_quad={n_quad} aliases products of {m} modes; need >= {2 * m + 2}")
    if L <= 0 or a <= 0:
        raise GridError("domain length L and stiffness a must be positive")
    xg, wg = np.polynomial.legendre.leggauss(n_quad)
    x = 0.5 * L * (xg + 1.0)
    w = 0.5 * L * wg
    k = np.arange(1, m + 1)
    el = np.arange(0, m + 1)
    lam = a * (k * np.pi / L) ** 2
    mu = (el * np.pi / L) ** 2
    basis = SpatialBasis(
        L=float(L),
        a=float(a),
        m=int(m),
        n_quad=int(n_quad),
        x=x,
        w=w,
        lam=lam,
        mu=mu,
        phi=np.empty(0),
        dphi=np.empty(0),
        psi=np.empty(0),
        dpsi=np.empty(0),
        psi_bnd=np.empty(0),
    )
    object.__setattr__(basis, "phi", basis.phi_at(x))
    object.__setattr__(basis, "dphi", basis.dphi_at(x))
    object.__setattr__(basis, "psi", basis.psi_at(x))
    object.__setattr__(basis, "dpsi", basis.dpsi_at(x))
    object.__setattr__(basis, "psi_bnd", basis.psi_at(np.array([0.0, L])))
    return basis


@dataclass(frozen=True)
class TimeModes:
    """Real Fourier modes e_j on a uniform period grid, j = -m..m."""

    m: int
    n_t: int
    t: np.ndarray  # (n_t,) uniform on [0, 2*pi)
    j: np.ndarray  # (2m+1,) mode indices
    e: np.ndarray  # (2m+1, n_t) values e_j(t)
    gram: np.ndarray  # (2m+1,) period integrals of e_j^2

    @property
    def dt(self):
        return 2.0 * np.pi / self.n_t

    def eval_at(self, t):
        """Mode values at arbitrary times, rows ordered j = -m..m."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        jj = self.j[:, None]
        return np.where(jj >= 1, np.sin(jj * t[None, :]), np.cos(jj * t[None, :]))


def build_time_modes(m, n_t):
    """Uniform period grid fine enough for exact trapezoid orthogonality."""
    if n_t < 2 * m + 2:
        raise GridError(f"n_t={n_t} cannot resolve {2 * m + 1} time modes; need >= {2 * m + 2}")
    t = np.arange(n_t) * (2.0 * np.pi / n_t)
    j = np.arange(-m, m + 1)
    gram = np.where(j == 0, 2.0 * np.pi, np.pi)
    modes = TimeModes(m=int(m), n_t=int(n_t), t=t, j=j, e=np.empty(0), gram=gram)
    object.__setattr__(modes, "e", modes.eval_at(t))
    return modes


def time_derivative(coeffs):
    """Coefficient map of d/dt in the (sin | cos) ordering.

    d/dt e_j = j * e_{-j}, so the mode-i coefficient of the derivative is
    -i * c_{-i}; iterating twice gives the expected -j^2 scaling.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    m = (coeffs.shape[0] - 1) // 2
    j = np.arange(-m, m + 1).reshape((-1,) + (1,) * (coeffs.ndim - 1))
    return -j * coeffs[::-1]


def synthesize_field(coeffs, modes, spatial_values):
    """Evaluate the double expansion at all (t, x) grid points.

    ``coeffs`` has shape (2m+1, n_modes) and ``spatial_values`` holds the
    matching eigenfunction values, shape (n_modes, n_x).  Returns (n_t, n_x).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (modes.e.shape[0], spatial_values.shape[0]):
        raise GridError(
            f"coefficient block {coeffs.shape} does not match "
            f"{modes.e.shape[0]} time modes x {spatial_values.shape[0]} spatial modes"
        )
    return modes.e.T @ coeffs @ spatial_values


def project_field(field, modes, spatial_values, x_weights):
    """Discrete L2 projection onto the retained modes (adjoint of synthesis).

    Trapezoid in time on the periodic grid, the basis quadrature in space;
    the round trip project(synthesize(c)) = c holds to round-off for
    resolved modes.
    """
    field = np.asarray(field, dtype=float)
    if field.shape != (modes.n_t, spatial_values.shape[1]):
        raise GridError(f"field shape {field.shape} does not match the (t, x) grid")
    time_proj = (modes.e @ field) * modes.dt  # (2m+1, n_x)
    return (time_proj * x_weights) @ spatial_values.T / modes.gram[:, None]
