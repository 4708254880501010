"""Time-periodic spectral Galerkin solver for the coupled wave system.

The displacement/pressure pair is expanded in products of time-Fourier modes
and the 1D eigenbases; testing the momentum and mass balances with every
retained mode pair yields an algebraic system for the coefficient vector.
A continuation parameter alpha interpolates from the linear problem (where
the hysteretic storage term is replaced by the identity and the data are
switched off) to the full system; each continuation step is solved by damped
fixed-point iteration with the hysteresis projection lagged one iterate.

The hysteresis contribution is integrated by parts in time, which is exact
for periodic trajectories and avoids differentiating the operator output
across its turning points.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import basis as sb
from . import hysteresis as hy
from .errors import GridError

__all__ = [
    "FourierSolution",
    "ProblemData",
    "ResidualVector",
    "GalerkinSystem",
    "assemble_residual",
    "hysteresis_projection",
    "continuation_solve",
    "SolveTelemetry",
    "NonconvergenceError",
    "estimate_suite",
]


# ---------------------------------------------------------------------------
# Coefficient containers
# ---------------------------------------------------------------------------


@dataclass
class FourierSolution:
    """Real Galerkin coefficients: u[j+m, k-1] and p[j+m, l]."""

    m: int
    u: np.ndarray  # (2m+1, m)
    p: np.ndarray  # (2m+1, m+1)

    @classmethod
    def zeros(cls, m):
        return cls(m=m, u=np.zeros((2 * m + 1, m)), p=np.zeros((2 * m + 1, m + 1)))

    @classmethod
    def from_vector(cls, m, vec):
        nu = (2 * m + 1) * m
        u = vec[:nu].reshape(2 * m + 1, m)
        p = vec[nu:].reshape(2 * m + 1, m + 1)
        return cls(m=m, u=u.copy(), p=p.copy())

    def to_vector(self):
        return np.concatenate([self.u.ravel(), self.p.ravel()])

    @property
    def size(self):
        return (2 * self.m + 1) * (2 * self.m + 1)

    def norm(self):
        return float(np.sqrt(np.sum(self.u**2) + np.sum(self.p**2)))


@dataclass
class ResidualVector:
    """Momentum and mass residual blocks at a continuation parameter."""

    v: np.ndarray  # (2m+1, m)
    w: np.ndarray  # (2m+1, m+1)
    alpha: float

    def norm(self):
        return float(np.sqrt(np.sum(self.v**2) + np.sum(self.w**2)))


# ---------------------------------------------------------------------------
# Problem data
# ---------------------------------------------------------------------------


@dataclass
class ProblemData:
    """Periodic forcing sampled on the solver grid, with its amplitude delta.

    ``f`` and ``h`` live on the (n_t, n_quad) grid, ``p_star`` on
    (n_t, 2) for the two boundary points; the time derivatives are carried
    along for the amplitude computation.
    """

    basis: sb.SpatialBasis
    modes: sb.TimeModes
    density: hy.PreisachDensity
    gamma: np.ndarray  # (2,) boundary permeabilities at x = 0 and x = L
    f: np.ndarray
    h: np.ndarray
    p_star: np.ndarray
    f_t: np.ndarray
    h_t: np.ndarray
    p_star_t: np.ndarray
    delta: float = field(default=0.0)

    def __post_init__(self):
        shape = (self.modes.n_t, self.basis.n_quad)
        for name in ("f", "h", "f_t", "h_t"):
            if getattr(self, name).shape != shape:
                raise GridError(f"{name} must be sampled on the (n_t, n_quad) grid {shape}")
        if self.p_star.shape != (self.modes.n_t, 2) or self.p_star_t.shape != (self.modes.n_t, 2):
            raise GridError("p_star series must have shape (n_t, 2)")
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.shape != (2,) or np.any(self.gamma < 0) or self.gamma.sum() <= 0:
            raise GridError("gamma must be two nonnegative endpoint values, not both zero")
        if not self.delta:
            self.delta = self._compute_delta()

    def _compute_delta(self):
        from .diagnostics import boundary_seminorm, periodic_norm

        b, mo = self.basis, self.modes
        norms = [
            periodic_norm(self.f, 2, x_weights=b.w, dt=mo.dt),
            periodic_norm(self.f_t, 2, x_weights=b.w, dt=mo.dt),
            periodic_norm(self.h, 2, x_weights=b.w, dt=mo.dt),
            periodic_norm(self.h_t, 2, x_weights=b.w, dt=mo.dt),
            boundary_seminorm(self.p_star, 2, gamma=self.gamma, dt=mo.dt),
            boundary_seminorm(self.p_star_t, 2, gamma=self.gamma, dt=mo.dt),
        ]
        return float(max(norms))

    @classmethod
    def from_components(cls, basis, modes, density, gamma, f_components=(), h_components=(), p_star_components=(), scale=1.0):
        """Build sampled data from sparse Fourier component lists.

        Components are (j, k, amplitude) for f, (j, l, amplitude) for h and
        (j, end, amplitude) with end in {0, 1} for the boundary pressure.
        Time derivatives are exact (d/dt e_j = j e_{-j}).
        """
        n_t, nq = modes.n_t, basis.n_quad
        f = np.zeros((n_t, nq))
        h = np.zeros((n_t, nq))
        f_t = np.zeros((n_t, nq))
        h_t = np.zeros((n_t, nq))
        p_star = np.zeros((n_t, 2))
        p_star_t = np.zeros((n_t, 2))
        m = modes.m

        def mode_row(j):
            return modes.e[j + m]

        def mode_row_dt(j):
            return j * modes.e[-j + m]

        for j, k, amp in f_components:
            if not (-m <= j <= m and 1 <= k <= basis.m):
                raise GridError(f"f component (j={j}, k={k}) outside the retained modes")
            f += scale * amp * np.outer(mode_row(j), basis.phi[k - 1])
            f_t += scale * amp * np.outer(mode_row_dt(j), basis.phi[k - 1])
        for j, l, amp in h_components:
            if not (-m <= j <= m and 0 <= l <= basis.m):
                raise GridError(f"h component (j={j}, l={l}) outside the retained modes")
            h += scale * amp * np.outer(mode_row(j), basis.psi[l])
            h_t += scale * amp * np.outer(mode_row_dt(j), basis.psi[l])
        for j, end, amp in p_star_components:
            if not (-m <= j <= m and end in (0, 1)):
                raise GridError(f"p* component (j={j}, end={end}) invalid")
            p_star[:, end] += scale * amp * mode_row(j)
            p_star_t[:, end] += scale * amp * mode_row_dt(j)
        return cls(
            basis=basis,
            modes=modes,
            density=density,
            gamma=np.asarray(gamma, dtype=float),
            f=f,
            h=h,
            p_star=p_star,
            f_t=f_t,
            h_t=h_t,
            p_star_t=p_star_t,
        )

    @classmethod
    def from_samples(cls, basis, modes, density, gamma, f, h, p_star):
        """Build from sampled fields; time derivatives by spectral differentiation."""
        return cls(
            basis=basis,
            modes=modes,
            density=density,
            gamma=np.asarray(gamma, dtype=float),
            f=np.asarray(f, dtype=float),
            h=np.asarray(h, dtype=float),
            p_star=np.asarray(p_star, dtype=float),
            f_t=_fft_time_derivative(f),
            h_t=_fft_time_derivative(h),
            p_star_t=_fft_time_derivative(p_star),
        )


def _fft_time_derivative(samples):
    """Spectral d/dt of real periodic samples along axis 0 (Nyquist dropped)."""
    samples = np.asarray(samples, dtype=float)
    n = samples.shape[0]
    freq = np.fft.rfftfreq(n, d=1.0 / n)  # integer wavenumbers
    spec = np.fft.rfft(samples, axis=0)
    shape = (-1,) + (1,) * (samples.ndim - 1)
    spec = spec * (1j * freq.reshape(shape))
    if n % 2 == 0:
        spec[-1] = 0.0
    return np.fft.irfft(spec, n=n, axis=0)


# ---------------------------------------------------------------------------
# Assembly
# ---------------------------------------------------------------------------


class GalerkinSystem:
    """Precomputed operator blocks of the tested weak form.

    The linear part splits into an alpha-independent matrix and the storage
    relaxation block that enters with weight (1 - alpha); the hysteresis
    projection is the only nonlinear contribution.
    """

    def __init__(self, basis, modes, density, gamma, memory_nodes=64):
        if basis.m != modes.m:
            raise GridError("spatial basis and time modes must retain the same mode count m")
        self.basis = basis
        self.modes = modes
        self.density = density
        self.gamma = np.asarray(gamma, dtype=float)
        self.memory_nodes = int(memory_nodes)
        m = basis.m
        self.m = m
        self.n_u = (2 * m + 1) * m
        self.n_p = (2 * m + 1) * (m + 1)
        self.n = self.n_u + self.n_p
        # divergence coupling by quadrature: C[l, k] = sum_q psi_l phi_k' w_q
        self.C = (basis.psi * basis.w) @ basis.dphi.T
        self._assemble_linear()

    def iu(self, j, k):
        return (j + self.m) * self.m + (k - 1)

    def ip(self, j, l):
        return self.n_u + (j + self.m) * (self.m + 1) + l

    def _assemble_linear(self):
        m = self.m
        T = self.modes.gram
        lam, mu = self.basis.lam, self.basis.mu
        gamma = self.gamma
        psi_b = self.basis.psi_bnd  # (m+1, 2)
        A = np.zeros((self.n, self.n))
        A_pt = np.zeros((self.n, self.n))
        bnd = psi_b @ (gamma * psi_b).T  # (m+1, m+1): sum_b gamma_b psi_l(x_b) psi_l2(x_b)
        for j in range(-m, m + 1):
            Tj = T[j + m]
            for k in range(1, m + 1):
                row = self.iu(j, k)
                A[row, self.iu(j, k)] += Tj * (lam[k - 1] - j * j)
                A[row, self.iu(-j, k)] += Tj * (-j)
                for l in range(0, m + 1):
                    A[row, self.ip(j, l)] += Tj * self.C[l, k - 1]
            for l in range(0, m + 1):
                row = self.ip(j, l)
                A[row, self.ip(j, l)] += Tj * mu[l]
                A_pt[row, self.ip(-j, l)] += Tj * (-j)
                for k in range(1, m + 1):
                    A[row, self.iu(-j, k)] += Tj * j * self.C[l, k - 1]
                for l2 in range(0, m + 1):
                    A[row, self.ip(j, l2)] += Tj * bnd[l, l2]
        self.A_base = A
        self.A_pt = A_pt

    def matrix(self, alpha):
        return self.A_base + (1.0 - alpha) * self.A_pt

    def data_vector(self, data):
        """Tested data integrals: forcing rows for u, source plus boundary rows for p."""
        mo, b = self.modes, self.basis
        Fjk = ((mo.e @ data.f) * mo.dt * b.w) @ b.phi.T  # (2m+1, m)
        Hjl = ((mo.e @ data.h) * mo.dt * b.w) @ b.psi.T  # (2m+1, m+1)
        pstar_time = (mo.e @ data.p_star) * mo.dt  # (2m+1, 2)
        Pjl = (pstar_time * self.gamma) @ b.psi_bnd.T  # (2m+1, m+1)
        return np.concatenate([Fjk.ravel(), (Hjl + Pjl).ravel()])

    def hysteresis_vector(self, p_coeffs):
        """Projection of the time derivative of the clamped hysteresis output
        onto every retained test pair, via integration by parts in time."""
        B = hysteresis_projection(p_coeffs, self.basis, self.modes, self.density, self.memory_nodes)
        vec = np.zeros(self.n)
        vec[self.n_u :] = B.ravel()
        return vec

    def residual_vector(self, vec_U, alpha, b_data):
        lin = self.matrix(alpha) @ vec_U
        p_coeffs = vec_U[self.n_u :].reshape(2 * self.m + 1, self.m + 1)
        return lin + alpha * (self.hysteresis_vector(p_coeffs) - b_data)


def hysteresis_projection(p_coeffs, basis, modes, density, memory_nodes=64):
    """Tested integrals of d/dt of the clamped hysteresis output.

    Synthesizes the pressure at every quadrature node, evolves the memory
    field to its periodic regime, and computes
    integral (G_R)_t psi_l e_j = -integral G_R psi_l e_j' by parts in time
    (exact for periodic trajectories); j = 0 rows vanish identically.
    """
    p_field = sb.synthesize_field(p_coeffs, modes, basis.psi)
    series = hy.periodic_field_series(density, p_field, n_r_nodes=memory_nodes, outputs=("g_R",))
    g = series["g_R"]  # (n_t, n_quad)
    j = modes.j[:, None]
    e_neg = modes.e[::-1]  # row for j holds e_{-j}
    btime = -j * (e_neg @ g) * modes.dt  # (2m+1, n_quad)
    return (btime * basis.w) @ basis.psi.T  # (2m+1, m+1)


def assemble_residual(system, sol, data, alpha):
    """Residual blocks of the continuation map at coefficients ``sol``."""
    if not 0.0 <= alpha <= 1.0:
        raise GridError("alpha must lie in [0, 1]")
    vec = sol.to_vector()
    b = system.data_vector(data)
    res = system.residual_vector(vec, alpha, b)
    m = system.m
    return ResidualVector(
        v=res[: system.n_u].reshape(2 * m + 1, m),
        w=res[system.n_u :].reshape(2 * m + 1, m + 1),
        alpha=alpha,
    )


# ---------------------------------------------------------------------------
# Continuation solve
# ---------------------------------------------------------------------------


@dataclass
class SolveTelemetry:
    """Iteration record of one continuation solve."""

    alphas: list = field(default_factory=list)
    iterations: list = field(default_factory=list)
    residual_histories: list = field(default_factory=list)
    final_residual: float = np.inf
    threshold: float = 0.0
    converged: bool = False

    @property
    def total_iterations(self):
        return int(sum(self.iterations))

    def to_dict(self):
        return {
            "alphas": [float(a) for a in self.alphas],
            "iterations": [int(i) for i in self.iterations],
            "final_residual": float(self.final_residual),
            "threshold": float(self.threshold),
            "converged": bool(self.converged),
            "total_iterations": self.total_iterations,
        }


class NonconvergenceError(RuntimeError):
    """Damped iteration stagnated; carries telemetry and the last iterate.

    This is the expected failure mode when the data amplitude leaves the
    small-forcing regime."""

    def __init__(self, message, telemetry, last_solution):
        super().__init__(message)
        self.telemetry = telemetry
        self.last_solution = last_solution


class _Stagnation(Exception):
    def __init__(self, history, last_vec):
        self.history = history
        self.last_vec = last_vec


def _iterate_alpha(system, lu, b, vec0, alpha, theta, threshold, max_iterations):
    """Damped lagged-hysteresis fixed-point iteration at one alpha.

    The damping factor adapts: it is halved whenever the residual grows
    (hysteresis turning points can make the undamped map oscillate) and
    relaxed back toward the undamped step while the residual falls.
    """
    vec = vec0
    history = []
    theta_cur = theta
    mat = system.matrix(alpha)
    best_vec, best_norm = vec0, np.inf
    for _ in range(max_iterations):
        with np.errstate(over="ignore", invalid="ignore"):
            p_coeffs = vec[system.n_u :].reshape(2 * system.m + 1, system.m + 1)
            n_vec = system.hysteresis_vector(p_coeffs)
            res = mat @ vec + alpha * (n_vec - b)
            rnorm = float(np.linalg.norm(res))
        history.append(rnorm)
        if not np.isfinite(rnorm):
            # explosive divergence: report the best iterate seen
            raise _Stagnation(history, best_vec)
        if rnorm < best_norm:
            best_vec, best_norm = vec, rnorm
        if rnorm <= threshold:
            return vec, history
        if len(history) >= 2:
            if rnorm > history[-2]:
                theta_cur = max(theta_cur / 2.0, 1.0 / 64.0)
            else:
                theta_cur = min(1.0, 1.3 * theta_cur)
        if len(history) > 50:
            best_before = min(history[:-50])
            if best_norm > 0.99 * best_before:
                raise _Stagnation(history, best_vec)
        target = lu_solve(lu, alpha * (b - n_vec))
        vec = (1.0 - theta_cur) * vec + theta_cur * target
    raise _Stagnation(history, best_vec)


def continuation_solve(
    data,
    schedule=(0.0, 0.25, 0.5, 0.75, 1.0),
    theta=0.5,
    tol_res=1e-8,
    max_iterations=200,
    max_refinements=6,
    memory_nodes=64,
):
    """Solve the periodic Galerkin system by continuation in alpha.

    At alpha = 0 the system is linear with the data switched off, so the
    continuation starts from the zero solution; every later step runs the
    damped lagged iteration until the residual norm drops below
    ``tol_res * delta``.  On stagnation the step is bisected up to
    ``max_refinements`` times before :class:`NonconvergenceError` is raised
    with the full telemetry and last iterate attached.
    """
    if data.density.constants is None:
        hy.validate_density(data.density)
    system = GalerkinSystem(data.basis, data.modes, data.density, data.gamma, memory_nodes)
    b = system.data_vector(data)
    delta = data.delta
    threshold = tol_res * delta if delta > 0 else 1e-14
    schedule = [float(a) for a in schedule]
    if schedule != sorted(schedule) or schedule[-1] != 1.0 or schedule[0] < 0.0:
        raise GridError("alpha schedule must ascend within [0, 1] and end at 1")
    telemetry = SolveTelemetry(threshold=threshold)
    vec = np.zeros(system.n)
    refinements = 0
    prev_alpha = 0.0
    i = 0
    while i < len(schedule):
        alpha = schedule[i]
        if alpha == 0.0:
            telemetry.alphas.append(0.0)
            telemetry.iterations.append(0)
            telemetry.residual_histories.append([0.0])
            i += 1
            continue
        lu = lu_factor(system.matrix(alpha))
        try:
            vec, history = _iterate_alpha(
                system, lu, b, vec, alpha, theta, threshold, max_iterations
            )
        except _Stagnation as stag:
            telemetry.alphas.append(alpha)
            telemetry.iterations.append(len(stag.history))
            telemetry.residual_histories.append(stag.history)
            if refinements < max_refinements and alpha - prev_alpha > 1e-3:
                schedule.insert(i, 0.5 * (prev_alpha + alpha))
                refinements += 1
                continue
            telemetry.final_residual = stag.history[-1]
            raise NonconvergenceError(
                f"iteration stagnated at alpha={alpha} "
                f"(residual {stag.history[-1]:.3e}, threshold {threshold:.3e})",
                telemetry,
                FourierSolution.from_vector(system.m, stag.last_vec),
            ) from None
        telemetry.alphas.append(alpha)
        telemetry.iterations.append(len(history))
        telemetry.residual_histories.append(history)
        telemetry.final_residual = history[-1]
        prev_alpha = alpha
        i += 1
    telemetry.converged = True
    return FourierSolution.from_vector(system.m, vec), telemetry


def estimate_suite(sol, data, memory_nodes=64, audit_n_t=None):
    """Norm and energy diagnostics of a solution (forwarded to diagnostics)."""
    from . import diagnostics

    return diagnostics.estimate_suite(sol, data, memory_nodes=memory_nodes, audit_n_t=audit_n_t)
