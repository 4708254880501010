"""Scalar rate-independent hysteresis operators.

Play operators with dead-band radius r, their weighted superposition with a
nonnegative density on the (r, v) half-plane, the convexified variant whose
density is clamped outside the triangle {r + |v| <= R}, and the associated
potential / dissipation outputs and energy-identity residuals.

Discrete-time evolution uses the one-step projection

    xi_new = p_new - clamp(p_new - xi_old, -r, r)

which is exact at the sample points for piecewise monotone inputs.  Memory is
discretized over r with composite Gauss-Legendre nodes; a panel boundary is
placed at the anticipated input amplitude so that the kink of the memory
profile r -> xi_r after a monotone sweep falls on a panel edge and the outer
quadrature stays exact for polynomial densities.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import erf

from .errors import (
    ConfigurationError,
    DensityValidationError,
    GridError,
    InvalidThresholdError,
)

__all__ = [
    "PlayState",
    "play_init",
    "play_update",
    "play_trajectory",
    "play_trajectory_exact",
    "periodic_play_response",
    "PreisachDensity",
    "DensityConstants",
    "validate_density",
    "convexify_density",
    "MemoryGrid",
    "MemoryState",
    "MemoryField",
    "OperatorOutputs",
    "preisach_eval",
    "HysteresisTrajectory",
    "preisach_trajectory",
    "periodic_preisach_response",
    "periodic_field_series",
    "play_energy_residuals",
    "preisach_energy_residuals",
    "growth_and_coincidence_check",
    "write_trajectory_csv",
    "read_trajectory_csv",
]


# ---------------------------------------------------------------------------
# Play operator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PlayState:
    """One memory element: dead-band radius ``r`` and current output ``xi``."""

    r: float
    xi: float

    def feasible(self, p, tol=1e-12):
        """Whether |p - xi| <= r up to round-off."""
        return abs(p - self.xi) <= self.r + tol


def _check_threshold(r):
    if not r > 0.0:
        raise InvalidThresholdError(f"play threshold must be positive, got r={r}")


def play_init(r, p0):
    """Initial play state for input value ``p0``: xi = p0 - clamp(p0, -r, r)."""
    _check_threshold(r)
    return PlayState(r=float(r), xi=float(p0 - min(max(p0, -r), r)))


def play_update(state, p_new):
    """Advance one step: project the old output onto [p_new - r, p_new + r].

    No motion while the input stays inside the dead band (inclusive at exact
    contact); otherwise the output rides the band edge.
    """
    r = state.r
    xi = p_new - min(max(p_new - state.xi, -r), r)
    return PlayState(r=r, xi=xi)


def play_trajectory(r, samples):
    """Run the play over a sample sequence, starting from the virgin state.

    The first sample is consumed by the initial projection, so the output has
    the same length as the input and ``out[0] == play_init(r, samples[0]).xi``.
    """
    _check_threshold(r)
    p = np.asarray(samples, dtype=float)
    if p.size == 0:
        raise ValueError("empty input series")
    out = np.empty_like(p)
    xi = p[0] - min(max(p[0], -r), r)
    out[0] = xi
    for i in range(1, p.size):
        xi = p[i] - min(max(p[i] - xi, -r), r)
        out[i] = xi
    return out


def play_trajectory_exact(r, t, p):
    """Play response of the piecewise-linear interpolant of (t, p).

    Inserts the exact dead-band contact instants into the grid, so every
    returned step is either a stick step (xi constant) or a slip step where
    the output moves with the input and p - xi stays pinned at +-r.  On such
    a grid the per-step identity dxi * (dp - dxi) = 0 holds to round-off,
    which is not true on an arbitrary sample grid where a step may both
    traverse the dead band and slip.

    Returns ``(t_out, p_out, xi_out, orig)`` where ``orig`` is the index of
    each original sample inside the refined arrays.
    """
    _check_threshold(r)
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or t.size == 0:
        raise ValueError("t and p must be equal-length, non-empty")
    ts, ps, xs = [t[0]], [p[0]], []
    xi = p[0] - min(max(p[0], -r), r)
    xs.append(xi)
    orig = [0]
    for i in range(1, p.size):
        pn, po = p[i], p[i - 1]
        w = pn - xi
        w_old = po - xi
        edge = None
        if pn > po and w > r and w_old < r:
            edge = xi + r
        elif pn < po and w < -r and w_old > -r:
            edge = xi - r
        if edge is not None:
            # slip starts inside the segment: insert the onset point
            theta = (edge - po) / (pn - po)
            ts.append(t[i - 1] + theta * (t[i] - t[i - 1]))
            ps.append(edge)
            xs.append(xi)
        xi = pn - min(max(w, -r), r)
        ts.append(t[i])
        ps.append(pn)
        xs.append(xi)
        orig.append(len(ts) - 1)
    return (np.array(ts), np.array(ps), np.array(xs), np.array(orig))


def periodic_play_response(r, one_period):
    """Periodic play output for a sampled 2*pi-periodic input.

    Runs two concatenated periods from the virgin state and returns the
    second one.  The one-period update map is a composition of clamps and
    hence idempotent, so a third simulated period reproduces the second
    exactly (periodicity of the play on continuous periodic inputs).
    """
    p = np.asarray(one_period, dtype=float)
    n = p.size
    out = play_trajectory(r, np.tile(p, 2))
    return out[n:]


# ---------------------------------------------------------------------------
# Densities
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DensityConstants:
    """Derived admissibility constants of a density for a given radius R."""

    C_rho: float
    C_rho_star: float
    A_R: float
    C_R: float
    K_R: float
    H_rho: float
    R: float


class PreisachDensity:
    """Weight density rho(r, v) >= 0 with a dominating profile rho*(r).

    Supported families:

    * ``uniform``  -- rho = value on the triangle {r + |v| <= span};
      params: value, span.
    * ``gaussian`` -- rho = amplitude * exp(-decay * v**2) for r <= r_max;
      the hard r-cutoff keeps rho*(r) integrable.  params: amplitude,
      decay, r_max.
    * ``exponential`` -- rho = amplitude * exp(-r_rate*r - v_rate*|v|),
      integrable without truncation.  params: amplitude, r_rate, v_rate.
    * ``tabulated`` -- bilinear interpolation of a value table on an
      (r_grid x v_grid) rectangle, zero outside; d(rho)/dv by centered
      differences on the grid; inner v-integrals are the exact integrals
      of the interpolant.

    ``R`` is the convexity radius used by the clamped variant; derived
    constants are attached by :func:`validate_density`.
    """

    def __init__(self, family, params, R=None, r_cap_hint=None):
        self.family = family
        self.params = dict(params)
        self.R = None if R is None else float(R)
        self.r_cap_hint = None if r_cap_hint is None else float(r_cap_hint)
        self.constants: DensityConstants | None = None
        if family == "uniform":
            if self.params["value"] < 0 or self.params["span"] <= 0:
                raise ConfigurationError("uniform density needs value >= 0, span > 0")
        elif family == "gaussian":
            if min(self.params["amplitude"], self.params["decay"], self.params["r_max"]) <= 0:
                raise ConfigurationError("gaussian density needs positive amplitude, decay, r_max")
        elif family == "exponential":
            if min(self.params["amplitude"], self.params["r_rate"], self.params["v_rate"]) <= 0:
                raise ConfigurationError("exponential density needs positive amplitude and rates")
        elif family == "tabulated":
            self._init_tabulated()
        else:
            raise ConfigurationError(f"unknown density family '{family}'")

    # -- constructors -------------------------------------------------------

    @classmethod
    def uniform(cls, value=1.0, span=8.0, R=None, r_cap_hint=None):
        return cls("uniform", {"value": value, "span": span}, R=R, r_cap_hint=r_cap_hint)

    @classmethod
    def gaussian(cls, amplitude=1.0, decay=1.0, r_max=8.0, R=None, r_cap_hint=None):
        return cls(
            "gaussian",
            {"amplitude": amplitude, "decay": decay, "r_max": r_max},
            R=R,
            r_cap_hint=r_cap_hint,
        )

    @classmethod
    def exponential(cls, amplitude=1.0, r_rate=1.0, v_rate=1.0, R=None, r_cap_hint=None):
        return cls(
            "exponential",
            {"amplitude": amplitude, "r_rate": r_rate, "v_rate": v_rate},
            R=R,
            r_cap_hint=r_cap_hint,
        )

    @classmethod
    def tabulated(cls, r_grid, v_grid, values, R=None, r_cap_hint=None):
        return cls(
            "tabulated",
            {
                "r_grid": np.asarray(r_grid, dtype=float),
                "v_grid": np.asarray(v_grid, dtype=float),
                "values": np.asarray(values, dtype=float),
            },
            R=R,
            r_cap_hint=r_cap_hint,
        )

    def _init_tabulated(self):
        rg = self.params["r_grid"] = np.asarray(self.params["r_grid"], dtype=float)
        vg = self.params["v_grid"] = np.asarray(self.params["v_grid"], dtype=float)
        vals = self.params["values"] = np.asarray(self.params["values"], dtype=float)
        if rg.ndim != 1 or vg.ndim != 1 or vals.shape != (rg.size, vg.size):
            raise ConfigurationError("tabulated density needs values of shape (len(r_grid), len(v_grid))")
        if np.any(np.diff(rg) <= 0) or np.any(np.diff(vg) <= 0):
            raise ConfigurationError("tabulated grids must be strictly increasing")
        if rg[0] < 0:
            raise ConfigurationError("tabulated r_grid must start at r >= 0")
        if np.any(vals < 0):
            raise ConfigurationError("tabulated density values must be nonnegative")
        # centered differences in v (one-sided at the edges)
        self._dvals = np.gradient(vals, vg, axis=1)
        # exact cumulative integrals of the piecewise-linear rows from v_grid[0]
        dv = np.diff(vg)
        self._cum = np.concatenate(
            [np.zeros((rg.size, 1)), np.cumsum(0.5 * (vals[:, 1:] + vals[:, :-1]) * dv, axis=1)],
            axis=1,
        )
        # cumulative of u * rho(u) per row: cell integral of u*(linear) is cubic
        a, b = vals[:, :-1], vals[:, 1:]
        v0, v1 = vg[:-1], vg[1:]
        cell = (
            a * (v1**2 - v0**2) / 2.0
            + (b - a) / dv * ((v1**3 - v0**3) / 3.0 - v0 * (v1**2 - v0**2) / 2.0)
        )
        self._cum_v = np.concatenate([np.zeros((rg.size, 1)), np.cumsum(cell, axis=1)], axis=1)
        self._rowmax = vals.max(axis=1)

    def _interp2(self, table, r, v):
        """Bilinear interpolation of a per-grid table; zero outside the rectangle."""
        rg, vg = self.params["r_grid"], self.params["v_grid"]
        r, v = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(v, dtype=float))
        ir = np.clip(np.searchsorted(rg, r, side="right") - 1, 0, rg.size - 2)
        iv = np.clip(np.searchsorted(vg, v, side="right") - 1, 0, vg.size - 2)
        tr = np.clip((r - rg[ir]) / (rg[ir + 1] - rg[ir]), 0.0, 1.0)
        tv = np.clip((v - vg[iv]) / (vg[iv + 1] - vg[iv]), 0.0, 1.0)
        val = (
            (1 - tr) * (1 - tv) * table[ir, iv]
            + tr * (1 - tv) * table[ir + 1, iv]
            + (1 - tr) * tv * table[ir, iv + 1]
            + tr * tv * table[ir + 1, iv + 1]
        )
        inside = (r >= rg[0]) & (r <= rg[-1]) & (v >= vg[0]) & (v <= vg[-1])
        return np.where(inside, val, 0.0)

    def _table_cum(self, cum, r, xi):
        """Evaluate an r-interpolated cumulative v-integral at arbitrary xi.

        ``cum`` holds per-row antiderivative values at the v-grid nodes; the
        within-cell remainder is the exact integral of the (bi)linear
        interpolant.  Flat continuation outside the v-range (zero density),
        zero for r outside the r-range.
        """
        rg, vg = self.params["r_grid"], self.params["v_grid"]
        vals = self.params["values"]
        weighted = cum is self._cum_v
        r, xi = np.broadcast_arrays(np.asarray(r, dtype=float), np.asarray(xi, dtype=float))
        x = np.clip(xi, vg[0], vg[-1])
        iv = np.clip(np.searchsorted(vg, x, side="right") - 1, 0, vg.size - 2)
        ir = np.clip(np.searchsorted(rg, r, side="right") - 1, 0, rg.size - 2)
        tr = np.clip((r - rg[ir]) / (rg[ir + 1] - rg[ir]), 0.0, 1.0)
        a = (1 - tr) * vals[ir, iv] + tr * vals[ir + 1, iv]
        b = (1 - tr) * vals[ir, iv + 1] + tr * vals[ir + 1, iv + 1]
        base = (1 - tr) * cum[ir, iv] + tr * cum[ir + 1, iv]
        v0 = vg[iv]
        h = vg[iv + 1] - v0
        if weighted:
            piece = a * (x * x - v0 * v0) / 2.0 + (b - a) / h * (
                (x**3 - v0**3) / 3.0 - v0 * (x * x - v0 * v0) / 2.0
            )
        else:
            s = x - v0
            piece = a * s + (b - a) * s * s / (2.0 * h)
        inside_r = (r >= rg[0]) & (r <= rg[-1])
        return np.where(inside_r, base + piece, 0.0)

    # -- pointwise evaluation -----------------------------------------------

    def rho(self, r, v):
        """Density value at (r, v); zero outside the family support."""
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.family == "uniform":
            c, span = self.params["value"], self.params["span"]
            return np.where(r + np.abs(v) <= span, c, 0.0)
        if self.family == "gaussian":
            A, b, rm = (self.params[k] for k in ("amplitude", "decay", "r_max"))
            return np.where(r <= rm, A * np.exp(-b * v * v), 0.0)
        if self.family == "exponential":
            A, ar, bv = (self.params[k] for k in ("amplitude", "r_rate", "v_rate"))
            return A * np.exp(-ar * r - bv * np.abs(v))
        return self._interp2(self.params["values"], r, v)

    def drho_dv(self, r, v):
        """Partial derivative of rho in v (analytic; table by centered differences)."""
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        if self.family == "uniform":
            return np.zeros(np.broadcast(r, v).shape)
        if self.family == "gaussian":
            A, b, rm = (self.params[k] for k in ("amplitude", "decay", "r_max"))
            return np.where(r <= rm, -2.0 * A * b * v * np.exp(-b * v * v), 0.0)
        if self.family == "exponential":
            A, ar, bv = (self.params[k] for k in ("amplitude", "r_rate", "v_rate"))
            return -bv * np.sign(v) * A * np.exp(-ar * r - bv * np.abs(v))
        return self._interp2(self._dvals, r, v)

    def rho_star(self, r):
        """Dominating profile rho*(r) >= sup_v rho(r, v)."""
        r = np.asarray(r, dtype=float)
        if self.family == "uniform":
            return np.where(r <= self.params["span"], self.params["value"], 0.0)
        if self.family == "gaussian":
            return np.where(r <= self.params["r_max"], self.params["amplitude"], 0.0)
        if self.family == "exponential":
            return self.params["amplitude"] * np.exp(-self.params["r_rate"] * r)
        rg = self.params["r_grid"]
        idx = np.searchsorted(rg, r, side="right")
        lo = np.clip(idx - 1, 0, rg.size - 1)
        hi = np.clip(idx, 0, rg.size - 1)
        out = np.maximum(self._rowmax[lo], self._rowmax[hi])
        return np.where((r >= rg[0]) & (r <= rg[-1]), out, 0.0)

    def h_rho(self):
        """Global supremum of rho."""
        if self.family == "uniform":
            return float(self.params["value"])
        if self.family in ("gaussian", "exponential"):
            return float(self.params["amplitude"])
        return float(self.params["values"].max())

    def support_bounds(self):
        """(r_hi, v_hi) box outside which rho is zero or negligible (< 1e-16 of peak)."""
        if self.family == "uniform":
            s = self.params["span"]
            return s, s
        if self.family == "gaussian":
            return self.params["r_max"], np.sqrt(37.0 / self.params["decay"])
        if self.family == "exponential":
            return 37.0 / self.params["r_rate"], 37.0 / self.params["v_rate"]
        return float(self.params["r_grid"][-1]), float(
            max(abs(self.params["v_grid"][0]), abs(self.params["v_grid"][-1]))
        )

    # -- inner v-integrals ---------------------------------------------------

    def inner_g(self, r, xi):
        """integral_0^xi rho(r, v) dv, elementwise (signed in xi)."""
        r = np.asarray(r, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.family == "uniform":
            c, span = self.params["value"], self.params["span"]
            cap = np.clip(span - r, 0.0, None)
            return c * np.sign(xi) * np.minimum(np.abs(xi), cap)
        if self.family == "gaussian":
            A, b, rm = (self.params[k] for k in ("amplitude", "decay", "r_max"))
            return np.where(r <= rm, A * 0.5 * np.sqrt(np.pi / b) * erf(np.sqrt(b) * xi), 0.0)
        if self.family == "exponential":
            A, ar, bv = (self.params[k] for k in ("amplitude", "r_rate", "v_rate"))
            return A * np.exp(-ar * r) * np.sign(xi) * (1.0 - np.exp(-bv * np.abs(xi))) / bv
        return self._table_cum(self._cum, r, xi) - self._table_cum(self._cum, r, np.zeros_like(xi))

    def inner_v(self, r, xi):
        """integral_0^xi v * rho(r, v) dv, elementwise."""
        r = np.asarray(r, dtype=float)
        xi = np.asarray(xi, dtype=float)
        if self.family == "uniform":
            c, span = self.params["value"], self.params["span"]
            cap = np.clip(span - r, 0.0, None)
            return 0.5 * c * np.minimum(np.abs(xi), cap) ** 2
        if self.family == "gaussian":
            A, b, rm = (self.params[k] for k in ("amplitude", "decay", "r_max"))
            return np.where(r <= rm, A * (1.0 - np.exp(-b * xi * xi)) / (2.0 * b), 0.0)
        if self.family == "exponential":
            A, ar, bv = (self.params[k] for k in ("amplitude", "r_rate", "v_rate"))
            z = bv * np.abs(xi)
            return A * np.exp(-ar * r) * (1.0 - (1.0 + z) * np.exp(-z)) / bv**2
        return self._table_cum(self._cum_v, r, xi) - self._table_cum(self._cum_v, r, np.zeros_like(xi))

    # -- convexified variant --------------------------------------------------

    def _require_R(self):
        if self.R is None:
            raise ConfigurationError("convexified evaluation requires the radius R to be set")
        return self.R

    def rho_R(self, r, v):
        """Clamped density: interior copy inside {r + |v| <= R}, edge values
        continued in v for r <= R, and the constant rho(R, 0) for r > R."""
        R = self._require_R()
        r = np.asarray(r, dtype=float)
        v = np.asarray(v, dtype=float)
        r, v = np.broadcast_arrays(r, v)
        inside = r + np.abs(v) <= R
        below = (v < r - R) & (r <= R)
        above = (v > R - r) & (r <= R)
        out = np.where(
            inside,
            self.rho(r, v),
            np.where(
                below,
                self.rho(r, r - R),
                np.where(above, self.rho(r, R - r), self.rho(np.full_like(r, R), np.zeros_like(r))),
            ),
        )
        return out

    def inner_g_R(self, r, xi):
        """integral_0^xi rho_R(r, v) dv, elementwise."""
        R = self._require_R()
        r = np.asarray(r, dtype=float)
        xi = np.asarray(xi, dtype=float)
        r, xi = np.broadcast_arrays(r, xi)
        rho_R0 = float(self.rho(R, 0.0))
        cap = R - r  # negative for r > R; handled by the outer where
        pos = np.clip(xi, -cap, cap)
        edge = np.where(xi >= 0, self.rho(r, cap), self.rho(r, -cap))
        inner = self.inner_g(r, pos) + (xi - pos) * edge
        return np.where(r <= R, inner, xi * rho_R0)


def convexify_density(density):
    """Pointwise evaluator of the clamped density rho_R.

    Requires validated constants so that a misconfigured radius cannot be
    used silently.
    """
    if density.constants is None:
        raise ConfigurationError("density constants not validated; run validate_density first")
    return density.rho_R


# ---------------------------------------------------------------------------
# Density validation
# ---------------------------------------------------------------------------


def _triangle_scan(density, R, n):
    """Sample rho and |drho/dv| on a dense grid of the triangle {r+|v| <= R}."""
    rs = np.linspace(R * 1e-6, R, n)
    ss = np.linspace(-1.0, 1.0, n)
    rr = np.repeat(rs[:, None], n, axis=1)
    vv = ss[None, :] * (R - rs[:, None])
    vals = density.rho(rr, vv)
    dvals = np.abs(density.drho_dv(rr, vv))
    return float(vals.min()), float(dvals.max())


def _largest_feasible_R(density, R_hi, n, C_fixed):
    """Largest R' <= R_hi with A(R')/2 - R'*C_fixed > 0, by bisection.

    The derivative bound stays pinned at the value found for the submitted
    radius, which makes the suggestion conservative.
    """

    def margin(Rq):
        A, _ = _triangle_scan(density, Rq, n)
        return 0.5 * A - Rq * C_fixed

    lo = R_hi
    for _ in range(60):
        lo *= 0.5
        if margin(lo) > 0:
            break
    else:
        return None
    hi = R_hi
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if margin(mid) > 0:
            lo = mid
        else:
            hi = mid
    return lo


def validate_density(density, grid=201):
    """Compute and check the derived constants of a density for its radius R.

    C_rho and C_rho* by quadrature over the support box, A_R as the minimum
    of rho over a dense grid of the triangle {r + |v| <= R}, C_R as the
    maximum of |drho/dv| there, K_R = A_R/2 - R*C_R, and H_rho as the global
    supremum.  Raises :class:`DensityValidationError` when the positivity
    condition A_R > 0 fails or when K_R <= 0 (then a feasible smaller radius
    is suggested).  On success the constants are attached to the density.
    """
    R = density.R
    if R is None or R <= 0:
        raise ConfigurationError("density validation requires a positive radius R")
    r_hi, v_hi = density.support_bounds()
    n2 = 4 * grid + 1
    rq = np.linspace(0.0, r_hi, n2)
    vq = np.linspace(-v_hi, v_hi, n2)
    vals = density.rho(rq[:, None], vq[None, :])
    if vals.min() < 0:
        raise DensityValidationError("density takes negative values")
    slack = vals - density.rho_star(rq)[:, None]
    if slack.max() > 1e-9 * max(1.0, density.h_rho()):
        raise DensityValidationError("density exceeds its dominating profile rho*")
    C_rho = float(np.trapezoid(np.trapezoid(vals, vq, axis=1), rq))
    C_rho_star = float(np.trapezoid(density.rho_star(rq), rq))

    A_R, C_R = _triangle_scan(density, R, grid)
    if not np.isfinite(C_R):
        raise DensityValidationError("density is not Lipschitz in v on the triangle")
    if A_R <= 0:
        raise DensityValidationError(
            f"non-degenerate condition violated: min rho on the triangle r+|v| <= {R} is {A_R}"
        )
    K_R = 0.5 * A_R - R * C_R
    if K_R <= 0:
        suggestion = _largest_feasible_R(density, R, grid, C_R)
        msg = (
            f"convexity radius too large: A_R/2 - R*C_R = {K_R:.6g} <= 0 at R={R}"
            + (f"; largest feasible R is about {suggestion:.6g}" if suggestion else "")
        )
        raise DensityValidationError(msg, suggested_R=suggestion)
    constants = DensityConstants(
        C_rho=C_rho,
        C_rho_star=C_rho_star,
        A_R=A_R,
        C_R=C_R,
        K_R=float(K_R),
        H_rho=density.h_rho(),
        R=float(R),
    )
    density.constants = constants
    return constants


# ---------------------------------------------------------------------------
# r-discretized memory
# ---------------------------------------------------------------------------


def _gauss_panel(n, a, b):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


@dataclass(frozen=True)
class MemoryGrid:
    """Composite Gauss-Legendre r-grid on (0, r_cap] with a panel break.

    The break sits at the anticipated running amplitude (r_cap / safety), so
    nodes above it carry xi = 0 for inputs within the anticipated range and
    the outer quadrature sees no interior kink after a monotone sweep to full
    amplitude.
    """

    r_nodes: np.ndarray
    r_weights: np.ndarray
    r_cap: float
    split: float

    @classmethod
    def for_amplitude(cls, p_max, n_nodes=64, safety=1.05, tail_fraction=0.125):
        p_max = float(abs(p_max))
        r_cap = max(safety * p_max, 1e-9)
        split = r_cap / safety
        n_tail = max(2, int(round(n_nodes * tail_fraction)))
        n_main = max(2, n_nodes - n_tail)
        r1, w1 = _gauss_panel(n_main, 0.0, split)
        r2, w2 = _gauss_panel(n_tail, split, r_cap)
        return cls(
            r_nodes=np.concatenate([r1, r2]),
            r_weights=np.concatenate([w1, w2]),
            r_cap=r_cap,
            split=split,
        )

    def check(self):
        if self.r_nodes.size < 4 or np.any(np.diff(self.r_nodes) <= 0) or np.any(self.r_weights <= 0):
            raise GridError("degenerate memory r-grid")
        if abs(self.r_weights.sum() - self.r_cap) > 1e-9 * max(self.r_cap, 1.0):
            raise GridError("memory r-weights do not sum to r_cap")


def _play_update_vec(xi, r_nodes, p_new):
    """Projection update applied to a whole family of plays at once."""
    return p_new - np.clip(p_new - xi, -r_nodes, r_nodes)


@dataclass(frozen=True)
class MemoryState:
    """Full r-discretized play memory of one scalar input."""

    grid: MemoryGrid
    xi: np.ndarray
    p_last: float = 0.0
    sup_p: float = 0.0

    @classmethod
    def virgin(cls, grid):
        grid.check()
        return cls(grid=grid, xi=np.zeros(grid.r_nodes.size), p_last=0.0, sup_p=0.0)

    def update(self, p_new):
        """Advance all plays by one input sample; re-grid if the running
        amplitude outgrows the current cap (state interpolated in r)."""
        p_new = float(p_new)
        state = self
        if abs(p_new) > state.grid.r_cap:
            state = state.regrid(MemoryGrid.for_amplitude(abs(p_new), n_nodes=state.xi.size))
        xi = _play_update_vec(state.xi, state.grid.r_nodes, p_new)
        return replace(state, xi=xi, p_last=p_new, sup_p=max(state.sup_p, abs(p_new)))

    def regrid(self, new_grid):
        """Transfer the memory onto a new r-grid by linear interpolation.

        Anchors: xi -> p_last as r -> 0 (zero-radius play is the identity)
        and xi = 0 for r >= the running amplitude.
        """
        new_grid.check()
        hi = max(self.sup_p, self.grid.r_cap)
        xp = np.concatenate([[0.0], self.grid.r_nodes, [hi + 1.0]])
        fp = np.concatenate([[self.p_last], self.xi, [0.0]])
        xi_new = np.interp(new_grid.r_nodes, xp, fp)
        xi_new[new_grid.r_nodes >= self.sup_p] = 0.0
        return MemoryState(grid=new_grid, xi=xi_new, p_last=self.p_last, sup_p=self.sup_p)


@dataclass(frozen=True)
class MemoryField:
    """Play memories of many spatial sites sharing one r-grid.

    Sites evolve independently (vectorized over the leading axis); the grid
    must be built for the largest amplitude among all sites.
    """

    grid: MemoryGrid
    xi: np.ndarray  # (n_sites, n_nodes)
    sup_p: np.ndarray  # (n_sites,)

    @classmethod
    def virgin(cls, grid, n_sites):
        grid.check()
        return cls(grid=grid, xi=np.zeros((n_sites, grid.r_nodes.size)), sup_p=np.zeros(n_sites))

    def update(self, p_new):
        p_new = np.asarray(p_new, dtype=float)
        if np.any(np.abs(p_new) > self.grid.r_cap * (1 + 1e-12)):
            raise GridError("input amplitude exceeds the memory grid cap; rebuild the field grid")
        xi = _play_update_vec(self.xi, self.grid.r_nodes[None, :], p_new[:, None])
        return MemoryField(grid=self.grid, xi=xi, sup_p=np.maximum(self.sup_p, np.abs(p_new)))


# ---------------------------------------------------------------------------
# Preisach evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OperatorOutputs:
    """Hysteresis outputs at one instant: superposition g, its clamped
    variant g_R, potential v_pot and dissipation d_diss."""

    g: float | np.ndarray
    g_R: float | np.ndarray | None
    v_pot: float | np.ndarray
    d_diss: float | np.ndarray


def preisach_eval(density, memory, convexified=True):
    """Evaluate the weighted-superposition outputs on a memory state.

    Outer quadrature over r uses the memory grid; inner v-integrals are in
    closed form per family (exact interpolant integrals for tables).
    """
    grid = memory.grid
    grid.check()
    r = grid.r_nodes
    w = grid.r_weights
    xi = memory.xi
    if xi.ndim == 1:
        r_b, w_b = r, w
    else:
        r_b, w_b = r[None, :], w[None, :]
    inner = density.inner_g(r_b, xi)
    g = np.sum(w_b * inner, axis=-1)
    v_pot = np.sum(w_b * density.inner_v(r_b, xi), axis=-1)
    d_diss = np.sum(w_b * r_b * inner, axis=-1)
    g_R = np.sum(w_b * density.inner_g_R(r_b, xi), axis=-1) if convexified else None

    def _as_scalar(x):
        return float(x) if np.ndim(x) == 0 else x

    return OperatorOutputs(
        g=_as_scalar(g),
        g_R=None if g_R is None else _as_scalar(g_R),
        v_pot=_as_scalar(v_pot),
        d_diss=_as_scalar(d_diss),
    )


@dataclass
class HysteresisTrajectory:
    """Time series of hysteresis outputs along one scalar input."""

    t: np.ndarray
    p: np.ndarray
    g: np.ndarray
    g_R: np.ndarray | None
    v_pot: np.ndarray
    d_diss: np.ndarray
    xi: np.ndarray  # (n_samples, n_r_nodes)
    grid: MemoryGrid = field(repr=False)


def preisach_trajectory(density, t, p, n_r_nodes=64, convexified=True, grid=None):
    """Evolve the memory along (t, p) from the virgin state and record all outputs.

    The r-grid is sized from the input amplitude unless ``grid`` is given.
    """
    t = np.asarray(t, dtype=float)
    p = np.asarray(p, dtype=float)
    if t.shape != p.shape or p.size == 0:
        raise ValueError("t and p must be equal-length, non-empty")
    if grid is None:
        amp = np.max(np.abs(p))
        if density.r_cap_hint is not None:
            amp = max(amp, density.r_cap_hint / 1.05)
        grid = MemoryGrid.for_amplitude(amp, n_nodes=n_r_nodes)
    grid.check()
    r, w = grid.r_nodes, grid.r_weights
    n = p.size
    xi_hist = np.empty((n, r.size))
    xi = np.zeros(r.size)
    for i in range(n):
        xi = _play_update_vec(xi, r, p[i])
        xi_hist[i] = xi
    inner = density.inner_g(r[None, :], xi_hist)
    g = inner @ w
    v_pot = density.inner_v(r[None, :], xi_hist) @ w
    d_diss = inner @ (w * r)
    g_R = density.inner_g_R(r[None, :], xi_hist) @ w if convexified else None
    return HysteresisTrajectory(t=t, p=p, g=g, g_R=g_R, v_pot=v_pot, d_diss=d_diss, xi=xi_hist, grid=grid)


def periodic_preisach_response(density, t, one_period, n_r_nodes=64, convexified=True):
    """Hysteresis outputs on the periodic regime of a sampled periodic input.

    Two concatenated periods are simulated from the virgin state and the
    second one is returned; by idempotency of the one-period play map this
    is the exact periodic response.
    """
    p = np.asarray(one_period, dtype=float)
    t = np.asarray(t, dtype=float)
    n = p.size
    traj = preisach_trajectory(
        density, np.concatenate([t, t + 2 * np.pi]), np.tile(p, 2), n_r_nodes=n_r_nodes, convexified=convexified
    )
    return HysteresisTrajectory(
        t=t,
        p=p,
        g=traj.g[n:],
        g_R=None if traj.g_R is None else traj.g_R[n:],
        v_pot=traj.v_pot[n:],
        d_diss=traj.d_diss[n:],
        xi=traj.xi[n:],
        grid=traj.grid,
    )


def periodic_field_series(density, p_field, n_r_nodes=64, outputs=("g_R",), rtol=1e-12):
    """Periodic hysteresis output series for many spatial sites at once.

    ``p_field`` has shape (n_t, n_sites), one period of samples per site.
    All sites share one r-grid sized for the largest amplitude.  Evolves one
    warm-up period from the virgin state, then a second period on which the
    requested outputs ('g', 'g_R', 'v', 'd') are recorded, and certifies
    periodicity by comparing the memory after both periods (raises
    :class:`MemoryConvergenceError` on mismatch).
    """
    from .errors import MemoryConvergenceError

    p = np.asarray(p_field, dtype=float)
    if p.ndim != 2 or p.shape[0] < 2:
        raise ValueError("p_field must have shape (n_t, n_sites)")
    n_t, n_sites = p.shape
    amp = float(np.max(np.abs(p)))
    sized = amp if density.r_cap_hint is None else max(amp, density.r_cap_hint / 1.05)
    grid = MemoryGrid.for_amplitude(sized, n_nodes=n_r_nodes)
    field = MemoryField.virgin(grid, n_sites)
    for n in range(n_t):
        field = field.update(p[n])
    warm = field.xi.copy()
    r_b = grid.r_nodes[None, :]
    w = grid.r_weights
    out = {key: np.empty((n_t, n_sites)) for key in outputs}
    for n in range(n_t):
        field = field.update(p[n])
        if "g" in out or "d" in out:
            inner = density.inner_g(r_b, field.xi)
            if "g" in out:
                out["g"][n] = inner @ w
            if "d" in out:
                out["d"][n] = inner @ (w * grid.r_nodes)
        if "v" in out:
            out["v"][n] = density.inner_v(r_b, field.xi) @ w
        if "g_R" in out:
            out["g_R"][n] = density.inner_g_R(r_b, field.xi) @ w
    mismatch = float(np.max(np.abs(field.xi - warm)))
    if mismatch > rtol * max(1.0, amp):
        raise MemoryConvergenceError(
            f"memory failed to settle into a periodic regime (mismatch {mismatch:.3e})"
        )
    return out


# ---------------------------------------------------------------------------
# Energy residuals and growth checks
# ---------------------------------------------------------------------------


def play_energy_residuals(r, p, xi):
    """Per-step residuals of the play energy balance and the monotonicity identity.

    R1[i] = dxi*p_new - d(xi^2)/2 - r*|dxi|  (balance; first order in the step)
    R2[i] = dxi*(dp - dxi)                   (vanishes when every step is
                                              stick or slip, e.g. on grids
                                              from play_trajectory_exact)
    """
    p = np.asarray(p, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if p.shape != xi.shape:
        raise ValueError("mismatched series lengths")
    dxi = np.diff(xi)
    dp = np.diff(p)
    r1 = dxi * p[1:] - 0.5 * np.diff(xi * xi) - r * np.abs(dxi)
    r2 = dxi * (dp - dxi)
    return r1, r2


def preisach_energy_residuals(p, g, v_pot, d_diss):
    """Per-step residual of the superposition energy identity:
    R3[i] = dg*p_new - dv - |dd| (first order in the step for smooth inputs)."""
    p, g, v_pot, d_diss = (np.asarray(x, dtype=float) for x in (p, g, v_pot, d_diss))
    if not (p.shape == g.shape == v_pot.shape == d_diss.shape):
        raise ValueError("mismatched series lengths")
    return np.diff(g) * p[1:] - np.diff(v_pot) - np.abs(np.diff(d_diss))


@dataclass(frozen=True)
class GrowthReport:
    """Result of the quadratic-growth and coincidence checks on one input."""

    max_amplitude_violation: float
    max_rate_violation: float
    quad_allowance: float
    coincides: bool
    max_coincidence_gap: float
    confined: bool

    @property
    def ok(self):
        return self.max_amplitude_violation <= 0.0 and self.max_rate_violation <= 0.0


def growth_and_coincidence_check(density, t, p, n_r_nodes=64):
    """Check |g_R| <= H*sup|p|^2 and |dg_R| <= H*sup|p|*|dp| along a trajectory,
    and whether g and g_R coincide when the input stays within the radius R.

    The bounds are continuum statements; the discrete check grants each of
    them an allowance of one outer-quadrature cell (H * w_max * scale), which
    is the resolution at which the r-truncated moving set is known.
    """
    if density.constants is None:
        raise ConfigurationError("growth check requires validated density constants")
    H = density.constants.H_rho
    R = density.constants.R
    traj = preisach_trajectory(density, t, p, n_r_nodes=n_r_nodes, convexified=True)
    sup = np.maximum.accumulate(np.abs(traj.p))
    w_max = float(traj.grid.r_weights.max())
    allow = H * w_max * max(1.0, sup.max()) + 1e-12
    amp_viol = float(np.max(np.abs(traj.g_R) - H * sup * sup - allow, initial=-np.inf))
    dp = np.abs(np.diff(traj.p))
    rate_viol = float(
        np.max(np.abs(np.diff(traj.g_R)) - H * sup[1:] * dp - H * w_max * dp - 1e-12, initial=-np.inf)
    )
    confined = bool(sup.max() <= R)
    gap = float(np.max(np.abs(traj.g - traj.g_R)))
    coincides = confined and gap <= 1e-10 * max(1.0, float(np.max(np.abs(traj.g))))
    return GrowthReport(
        max_amplitude_violation=amp_viol,
        max_rate_violation=rate_viol,
        quad_allowance=allow,
        coincides=coincides,
        max_coincidence_gap=gap,
        confined=confined,
    )


# ---------------------------------------------------------------------------
# Trajectory CSV import/export
# ---------------------------------------------------------------------------


def write_trajectory_csv(path, traj):
    """Write a trajectory as CSV with header t,p,xi_r1,...,g,g_R,V,D."""
    n_r = traj.xi.shape[1]
    header = ["t", "p"] + [f"xi_r{i + 1}" for i in range(n_r)] + ["g", "g_R", "V", "D"]
    g_R = traj.g_R if traj.g_R is not None else np.full_like(traj.g, np.nan)
    data = np.column_stack([traj.t, traj.p, traj.xi, traj.g, g_R, traj.v_pot, traj.d_diss])
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(header) + "\n")
        for row in data:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def read_trajectory_csv(path):
    """Read a trajectory CSV back into a dict of arrays keyed by column name."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    return {name: data[:, i] for i, name in enumerate(header)}
