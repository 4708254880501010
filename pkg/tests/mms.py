"""Manufactured periodic solution shared by solver tests and acceptance.

The displacement profile (x(L-x))^3 vanishes at the boundary with sine-series
coefficients decaying like k^-5, the pressure profile (x(L-x))^2 + 1/2 has
zero end derivatives (compatible with the cosine family) and cosine
coefficients decaying like k^-4, so refining the mode count reduces the
truncation error at a predictable rate.  The storage-term contribution to the
mass source is sampled from an independent fine-grid evolution of the
hysteresis operator with centered time differences.
"""

import numpy as np

from porowave import basis as sb
from porowave import hysteresis as hy
from porowave import solver as sv


def make_case(m, n_t, L=1.0, a=1.0, eps_u=0.02, eps_p=0.05, gamma=(1.0, 0.7), n_quad=None, fine_factor=8):
    n_quad = n_quad or max(64, 2 * m + 2)
    basis = sb.build_spatial_basis(L=L, a=a, m=m, n_quad=n_quad)
    modes = sb.build_time_modes(m, n_t)
    density = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0)
    hy.validate_density(density)

    peak_w = (L * L / 4.0) ** 3
    peak_v = (L * L / 4.0) ** 2

    def q(x):
        return x * (L - x)

    def W(x):
        return q(x) ** 3 / peak_w

    def Wx(x):
        return 3.0 * q(x) ** 2 * (L - 2 * x) / peak_w

    def Wxx(x):
        return (6.0 * q(x) * (L - 2 * x) ** 2 - 6.0 * q(x) ** 2) / peak_w

    def V(x):
        return q(x) ** 2 / peak_v + 0.5

    def Vx(x):
        return 2.0 * q(x) * (L - 2 * x) / peak_v

    def Vxx(x):
        return (2.0 * (L - 2 * x) ** 2 - 4.0 * q(x)) / peak_v

    def u_exact(t, x):
        return eps_u * np.sin(t)[:, None] * W(x)[None, :]

    def p_exact(t, x):
        return eps_p * np.cos(t)[:, None] * V(x)[None, :]

    t, x = modes.t, basis.x
    sin_t, cos_t = np.sin(t)[:, None], np.cos(t)[:, None]
    # momentum source from the strong balance
    f = (
        eps_u * (-sin_t + cos_t) * W(x)[None, :]
        - a * eps_u * sin_t * Wxx(x)[None, :]
        - eps_p * cos_t * Vx(x)[None, :]
    )
    # storage-rate term sampled from an independent fine-grid evolution
    n_fine = fine_factor * n_t
    tf = np.arange(n_fine) * (2 * np.pi / n_fine)
    p_fine = eps_p * np.cos(tf)[:, None] * V(x)[None, :]
    g_fine = hy.periodic_field_series(density, p_fine, n_r_nodes=64, outputs=("g_R",))["g_R"]
    dg_fine = (np.roll(g_fine, -1, axis=0) - np.roll(g_fine, 1, axis=0)) / (2 * (2 * np.pi / n_fine))
    dg = dg_fine[::fine_factor]
    h = dg - eps_u * cos_t * Wx(x)[None, :] - eps_p * cos_t * Vxx(x)[None, :]
    # end derivatives of V vanish, so the boundary data is the trace itself
    p_star = eps_p * np.cos(t)[:, None] * np.array([V(np.array([0.0]))[0], V(np.array([L]))[0]])[None, :]

    data = sv.ProblemData.from_samples(basis, modes, density, gamma, f, h, p_star)
    return {
        "data": data,
        "basis": basis,
        "modes": modes,
        "density": density,
        "u_exact": u_exact,
        "p_exact": p_exact,
    }


def solution_error(sol, case):
    """Combined relative L2 field error of a solution against the exact pair."""
    basis, modes = case["basis"], case["modes"]
    u_num = sb.synthesize_field(sol.u, modes, basis.phi)
    p_num = sb.synthesize_field(sol.p, modes, basis.psi)
    u_ref = case["u_exact"](modes.t, basis.x)
    p_ref = case["p_exact"](modes.t, basis.x)

    def l2(fld):
        return np.sqrt(np.sum(fld**2 * basis.w) * modes.dt)

    err = np.sqrt(l2(u_num - u_ref) ** 2 + l2(p_num - p_ref) ** 2)
    ref = np.sqrt(l2(u_ref) ** 2 + l2(p_ref) ** 2)
    return float(err / ref)
