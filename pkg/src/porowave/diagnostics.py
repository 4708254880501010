"""Norms, energy-inequality audits and report assembly.

Inequality audits are self-calibrating: each audit runs at the working grid
and at twice the resolution, and uses a safety multiple of the observed
difference as the tolerance below which a slack is considered nonnegative.
Report keys are stable identifiers (es1..es4, ene2, ene3) so downstream
tooling can grep them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import basis as sb
from . import hysteresis as hy
from .errors import ConfigurationError

__all__ = [
    "periodic_norm",
    "boundary_seminorm",
    "AuditResult",
    "ene2_audit",
    "ene3_audit",
    "estimate_suite",
    "build_report",
    "flatten_report",
    "render_table",
    "build_probe_series",
]


def periodic_norm(samples, q, x_weights, dt):
    """Space-time Lq norm over one period: (sum |y|^q w_x dt)^(1/q)."""
    if q < 1:
        raise ValueError(f"norm exponent must satisfy q >= 1, got {q}")
    samples = np.asarray(samples, dtype=float)
    return float((np.sum(np.abs(samples) ** q * x_weights) * dt) ** (1.0 / q))


def boundary_seminorm(samples, q, gamma, dt):
    """Endpoint-weighted Lq seminorm over one period; samples (n_t, 2)."""
    if q < 1:
        raise ValueError(f"norm exponent must satisfy q >= 1, got {q}")
    samples = np.asarray(samples, dtype=float)
    return float((np.sum(np.abs(samples) ** q * gamma) * dt) ** (1.0 / q))


# ---------------------------------------------------------------------------
# Energy audits
# ---------------------------------------------------------------------------


@dataclass
class AuditResult:
    """Per-site audit values with the measured grid tolerance."""

    slack: np.ndarray  # (n_sites,)
    eps_grid: np.ndarray  # (n_sites,)
    lhs: np.ndarray
    rhs: np.ndarray
    confined: np.ndarray  # bool per site: max |p| <= R

    @property
    def ok(self):
        return bool(np.all(self.slack >= -self.eps_grid))


def _audit_pass(density, tcoeffs, n_t, n_r_nodes, kind):
    m = (tcoeffs.shape[0] - 1) // 2
    modes = sb.build_time_modes(m, n_t)
    p = modes.e.T @ tcoeffs
    g = hy.periodic_field_series(density, p, n_r_nodes=n_r_nodes, outputs=("g_R",))["g_R"]
    dg = np.roll(g, -1, axis=0) - g
    if kind == "ene2":
        ptt = modes.e.T @ sb.time_derivative(sb.time_derivative(tcoeffs))
        ptt_mid = 0.5 * (ptt + np.roll(ptt, -1, axis=0))
        lhs = -np.sum(dg * ptt_mid, axis=0)
        pt = modes.e.T @ sb.time_derivative(tcoeffs)
        rhs = 0.5 * density.constants.K_R * modes.dt * np.sum(np.abs(pt) ** 3, axis=0)
    else:  # ene3: period integral of (G_R)_t * p
        p_mid = 0.5 * (p + np.roll(p, -1, axis=0))
        lhs = np.sum(dg * p_mid, axis=0)
        rhs = np.zeros_like(lhs)
    return lhs, rhs, np.max(np.abs(p), axis=0)


def _run_audit(density, tcoeffs, n_t, n_r_nodes, kind):
    if density.constants is None:
        raise ConfigurationError("audits need validated density constants (K_R, R)")
    tcoeffs = np.asarray(tcoeffs, dtype=float)
    if tcoeffs.ndim == 1:
        tcoeffs = tcoeffs[:, None]
    lhs_c, rhs_c, pmax = _audit_pass(density, tcoeffs, n_t, n_r_nodes, kind)
    lhs_f, rhs_f, _ = _audit_pass(density, tcoeffs, 2 * n_t, n_r_nodes, kind)
    slack_c = lhs_c - rhs_c
    slack_f = lhs_f - rhs_f
    scale = np.maximum(1.0, np.maximum(np.abs(lhs_f), np.abs(rhs_f)))
    eps = 2.0 * np.abs(slack_f - slack_c) + 1e-12 * scale
    return AuditResult(
        slack=slack_f,
        eps_grid=eps,
        lhs=lhs_f,
        rhs=rhs_f,
        confined=pmax <= density.constants.R * (1 + 1e-12),
    )


def ene2_audit(density, tcoeffs, n_t=512, n_r_nodes=64):
    """Audit the second-order inequality -int (G_R)_t p_tt dt >= K_R/2 int |p_t|^3 dt.

    ``tcoeffs`` holds time-Fourier coefficients of the pressure signal, one
    column per spatial site; both integrals are evaluated on the periodic
    regime at n_t and 2*n_t samples and the difference calibrates the
    tolerance.  The audit runs for the clamped operator regardless of
    confinement; the ``confined`` mask annotates sites with max |p| <= R.
    """
    return _run_audit(density, tcoeffs, n_t, n_r_nodes, "ene2")


def ene3_audit(density, tcoeffs, n_t=512, n_r_nodes=64):
    """Audit the dissipation positivity int (G_R)_t p dt >= 0 over one period."""
    return _run_audit(density, tcoeffs, n_t, n_r_nodes, "ene3")


# ---------------------------------------------------------------------------
# Estimate suite
# ---------------------------------------------------------------------------


def estimate_suite(sol, data, memory_nodes=64, audit_n_t=None, with_truncation=True):
    """All reported norms, energy audits and the confinement record.

    Returns a nested dict whose keys mirror the report JSON schema.
    """
    basis, modes, density = data.basis, data.modes, data.density
    if density.constants is None:
        hy.validate_density(density)
    R = density.constants.R
    w, dt = basis.w, modes.dt

    du = sb.time_derivative(sol.u)
    d2u = sb.time_derivative(du)
    dp = sb.time_derivative(sol.p)

    u_t = sb.synthesize_field(du, modes, basis.phi)
    u_tt = sb.synthesize_field(d2u, modes, basis.phi)
    dx_u_t = sb.synthesize_field(du, modes, basis.dphi)
    p_field = sb.synthesize_field(sol.p, modes, basis.psi)
    grad_p = sb.synthesize_field(sol.p, modes, basis.dpsi)
    p_t = sb.synthesize_field(dp, modes, basis.psi)
    grad_p_t = sb.synthesize_field(dp, modes, basis.dpsi)
    p_bnd = modes.e.T @ sol.p @ basis.psi_bnd
    p_t_bnd = modes.e.T @ dp @ basis.psi_bnd

    norms = {
        "es1": {
            "ut_l2": periodic_norm(u_t, 2, w, dt),
            "grad_p_l2": periodic_norm(grad_p, 2, w, dt),
            "p_boundary": boundary_seminorm(p_bnd, 2, data.gamma, dt),
        },
        "es2": {
            "utt_l2": periodic_norm(u_tt, 2, w, dt),
            "pt_l3": periodic_norm(p_t, 3, w, dt),
            "grad_pt_l2": periodic_norm(grad_p_t, 2, w, dt),
            "pt_boundary": boundary_seminorm(p_t_bnd, 2, data.gamma, dt),
        },
        "es3": periodic_norm(dx_u_t, 2, w, dt),
    }

    series = hy.periodic_field_series(
        density, p_field, n_r_nodes=memory_nodes, outputs=("g", "g_R", "v", "d")
    )
    g, g_R = series["g"], series["g_R"]
    dgdt = (np.roll(g_R, -1, axis=0) - np.roll(g_R, 1, axis=0)) / (2 * dt)
    norms["es4"] = float(np.sum(np.sum(dgdt**2 * w, axis=1) ** 1.5) * dt)

    # confinement scan on a refined grid including the endpoints
    t_scan = np.linspace(0.0, 2 * np.pi, max(4 * modes.n_t, 1024), endpoint=False)
    x_scan = np.linspace(0.0, basis.L, 201)
    p_dense = modes.eval_at(t_scan).T @ sol.p @ basis.psi_at(x_scan)
    max_abs_p = float(np.max(np.abs(p_dense)))
    gap = float(np.max(np.abs(g - g_R)))
    coincides = bool(max_abs_p <= R and gap <= 1e-10 * max(1.0, float(np.max(np.abs(g)))))

    # audits on the per-node pressure signals
    node_tcoeffs = sol.p @ basis.psi  # (2m+1, n_quad)
    n_audit = audit_n_t or max(modes.n_t, 256)
    a2 = ene2_audit(density, node_tcoeffs, n_t=n_audit, n_r_nodes=memory_nodes)
    a3 = ene3_audit(density, node_tcoeffs, n_t=n_audit, n_r_nodes=memory_nodes)
    ene3_value = float(np.sum(a3.lhs * w))
    ene3_eps = float(np.sum(a3.eps_grid * w))

    # superposition energy identity along the solution, per node, first order
    # in the time step: integrated |dG*p - dV - |dD|| over the period
    r3 = np.diff(g, axis=0) * p_field[1:] - np.diff(series["v"], axis=0) - np.abs(
        np.diff(series["d"], axis=0)
    )
    enerpr_residual = float(np.max(np.sum(np.abs(r3), axis=0)))

    # tested energy identity of the converged system: quadratic part vs data pairing
    lhs_quad = (
        periodic_norm(u_t, 2, w, dt) ** 2
        + periodic_norm(grad_p, 2, w, dt) ** 2
        + boundary_seminorm(p_bnd, 2, data.gamma, dt) ** 2
    )
    rhs_data = float(
        np.sum((data.f * u_t + data.h * p_field) * w) * dt
        + np.sum(data.p_star * p_bnd * data.gamma) * dt
    )

    truncation = truncation_indicator(sol, data, memory_nodes) if with_truncation else None

    return {
        "delta": float(data.delta),
        "norms": norms,
        "truncation": truncation,
        "energy": {
            "ene2": {
                "min_slack": float(np.min(a2.slack)),
                "eps_grid": float(np.max(a2.eps_grid)),
                "all_nonnegative": a2.ok,
            },
            "ene3": {
                "value": ene3_value,
                "eps_grid": ene3_eps,
            },
            "enerpr": {
                "integrated_abs_residual": enerpr_residual,
            },
            "es1_inequality": {
                "lhs": float(lhs_quad),
                "rhs": float(rhs_data),
                "slack": float(rhs_data - lhs_quad),
            },
        },
        "confinement": {
            "max_abs_p": max_abs_p,
            "R": float(R),
            "coincides": coincides,
            "max_operator_gap": gap,
        },
    }


def truncation_indicator(sol, data, memory_nodes=64):
    """Residual components against the first truncated test modes.

    Embeds the solution into an (m+1)-mode system sharing the same sample
    grids and assembles the residual there; entries in the retained rows
    reproduce the converged residual (Galerkin orthogonality) while the new
    rows measure what the truncation left out.  Returns None when the grids
    cannot host one more mode without aliasing.
    """
    from . import solver as sv

    basis, modes = data.basis, data.modes
    m = basis.m
    if basis.n_quad < 2 * (m + 1) + 2 or modes.n_t < 2 * (m + 1) + 2:
        return None
    basis2 = sb.build_spatial_basis(L=basis.L, a=basis.a, m=m + 1, n_quad=basis.n_quad)
    modes2 = sb.build_time_modes(m + 1, modes.n_t)
    u2 = np.zeros((2 * m + 3, m + 1))
    p2 = np.zeros((2 * m + 3, m + 2))
    u2[1:-1, :m] = sol.u
    p2[1:-1, : m + 1] = sol.p
    sol2 = sv.FourierSolution(m=m + 1, u=u2, p=p2)
    data2 = sv.ProblemData(
        basis=basis2,
        modes=modes2,
        density=data.density,
        gamma=data.gamma,
        f=data.f,
        h=data.h,
        p_star=data.p_star,
        f_t=data.f_t,
        h_t=data.h_t,
        p_star_t=data.p_star_t,
        delta=data.delta,
    )
    system2 = sv.GalerkinSystem(basis2, modes2, data.density, data.gamma, memory_nodes)
    res = sv.assemble_residual(system2, sol2, data2, 1.0)
    new_v = np.zeros_like(res.v, dtype=bool)
    new_v[0, :] = new_v[-1, :] = True
    new_v[:, -1] = True
    new_w = np.zeros_like(res.w, dtype=bool)
    new_w[0, :] = new_w[-1, :] = True
    new_w[:, -1] = True
    return {
        "truncated_max": float(
            max(np.max(np.abs(res.v[new_v])), np.max(np.abs(res.w[new_w])))
        ),
        "retained_max": float(
            max(np.max(np.abs(res.v[~new_v])), np.max(np.abs(res.w[~new_w])))
        ),
    }


# ---------------------------------------------------------------------------
# Reports
# ---------------------------------------------------------------------------


def build_report(suite, telemetry, config=None, linear_response_ratio=None):
    """Assemble the full report record from the estimate suite and telemetry."""
    report = {
        "delta": suite["delta"],
        "norms": suite["norms"],
        "energy": suite["energy"],
        "confinement": suite["confinement"],
        "truncation": suite.get("truncation"),
        "solver": {
            "residual_final": float(telemetry.final_residual),
            "iterations": telemetry.total_iterations,
            "converged": bool(telemetry.converged),
            "alphas": [float(a) for a in telemetry.alphas],
            "iterations_per_alpha": [int(i) for i in telemetry.iterations],
        },
        "linear_response_ratio": linear_response_ratio,
    }
    if config is not None:
        report["config"] = config
    return report


def flatten_report(report, prefix="", skip=("config",)):
    """Dotted-key flattening of the report for the CSV mirror."""
    out = {}
    for key, val in report.items():
        if key in skip and not prefix:
            continue
        name = f"{prefix}{key}"
        if isinstance(val, dict):
            out.update(flatten_report(val, prefix=name + ".", skip=()))
        elif isinstance(val, (list, tuple)):
            out[name] = ";".join(str(x) for x in val)
        else:
            out[name] = val
    return out


def render_table(report):
    """Human-readable two-column table of the flattened report."""
    flat = flatten_report(report)
    width = max(len(k) for k in flat)
    lines = [f"{k.ljust(width)}  {v}" for k, v in flat.items()]
    return "\n".join(lines) + "\n"


def build_probe_series(sol, data, probe_xs, memory_nodes=64):
    """Time series t,x,u,u_t,p,p_t,g_R at the requested probe positions."""
    basis, modes, density = data.basis, data.modes, data.density
    xs = np.asarray(probe_xs, dtype=float)
    phi_x = basis.phi_at(xs)
    psi_x = basis.psi_at(xs)
    du = sb.time_derivative(sol.u)
    dp = sb.time_derivative(sol.p)
    u = modes.e.T @ sol.u @ phi_x
    u_t = modes.e.T @ du @ phi_x
    p = modes.e.T @ sol.p @ psi_x
    p_t = modes.e.T @ dp @ psi_x
    g_R = hy.periodic_field_series(density, p, n_r_nodes=memory_nodes, outputs=("g_R",))["g_R"]
    header = ["t", "x", "u", "u_t", "p", "p_t", "g_R"]
    rows = []
    for i, x in enumerate(xs):
        block = np.column_stack(
            [modes.t, np.full(modes.n_t, x), u[:, i], u_t[:, i], p[:, i], p_t[:, i], g_R[:, i]]
        )
        rows.append(block)
    return header, np.vstack(rows) if rows else np.empty((0, len(header)))
