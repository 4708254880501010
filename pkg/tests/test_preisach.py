"""Density superposition: closed forms, convexification, validation, energy."""

import numpy as np
import pytest

from porowave import hysteresis as hy
from porowave.errors import ConfigurationError, DensityValidationError, GridError


def period_grid(n):
    return np.linspace(0.0, 2 * np.pi, n + 1)[:-1]


def dense_quadrature_oracle(inner_profile, a, n=4001):
    """Independent outer integral of r -> inner_profile(r) on [0, a] by
    composite trapezoid on a dense grid."""
    r = np.linspace(0.0, a, n)
    return np.trapezoid(inner_profile(r), r)


class TestPreisachEval:
    def test_virgin_memory_gives_zero(self):
        den = hy.PreisachDensity.gaussian(R=0.3)
        grid = hy.MemoryGrid.for_amplitude(1.0)
        out = hy.preisach_eval(den, hy.MemoryState.virgin(grid))
        assert out.g == 0.0 and out.g_R == 0.0
        assert out.v_pot == 0.0 and out.d_diss == 0.0

    def test_ramp_closed_forms_uniform(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0)
        t = np.linspace(0.0, 1.0, 1501)
        traj = hy.preisach_trajectory(den, t, t, n_r_nodes=64)
        assert traj.g[-1] == pytest.approx(0.5, abs=1e-6)
        assert traj.v_pot[-1] == pytest.approx(1.0 / 6.0, abs=1e-6)
        assert traj.d_diss[-1] == pytest.approx(1.0 / 6.0, abs=1e-6)
        # independent dense-grid outer quadrature of the final memory profile
        g_oracle = dense_quadrature_oracle(lambda r: np.maximum(0.0, 1.0 - r), 1.05)
        v_oracle = dense_quadrature_oracle(lambda r: np.maximum(0.0, 1.0 - r) ** 2 / 2, 1.05)
        d_oracle = dense_quadrature_oracle(lambda r: r * np.maximum(0.0, 1.0 - r), 1.05)
        assert traj.g[-1] == pytest.approx(g_oracle, abs=1e-6)
        assert traj.v_pot[-1] == pytest.approx(v_oracle, abs=1e-6)
        assert traj.d_diss[-1] == pytest.approx(d_oracle, abs=1e-6)

    def test_grid_error_on_degenerate_weights(self):
        den = hy.PreisachDensity.uniform()
        grid = hy.MemoryGrid.for_amplitude(1.0, n_nodes=16)
        bad = hy.MemoryGrid(
            r_nodes=grid.r_nodes, r_weights=0.5 * grid.r_weights, r_cap=grid.r_cap, split=grid.split
        )
        with pytest.raises(GridError):
            hy.preisach_eval(den, hy.MemoryState(grid=bad, xi=np.zeros(16)))

    def test_null_for_density_supported_above_reach(self):
        # table supported on r >= 0.5; any input below 0.5 never builds output
        rg = np.array([0.5, 2.0])
        vg = np.linspace(-2, 2, 41)
        vals = np.ones((2, vg.size))
        den = hy.PreisachDensity.tabulated(rg, vg, vals, R=0.2)
        t = period_grid(128)
        traj = hy.preisach_trajectory(den, t, 0.4 * np.sin(t))
        assert np.max(np.abs(traj.g)) == 0.0

    def test_output_sign_follows_ramp_direction(self):
        den = hy.PreisachDensity.gaussian(amplitude=1.0, decay=1.0, r_max=8.0, R=0.3)
        t = np.linspace(0.0, 1.0, 400)
        up = hy.preisach_trajectory(den, t, t)
        down = hy.preisach_trajectory(den, t, -t)
        assert up.g[-1] > 0 and up.d_diss[-1] > 0
        assert down.g[-1] < 0 and down.d_diss[-1] < 0
        assert np.max(np.abs(down.g + up.g)) < 1e-14  # odd response for even density
        assert np.max(np.abs(down.v_pot - up.v_pot)) < 1e-14  # even potential

    def test_r_cap_hint_enlarges_grid(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0, r_cap_hint=3.0)
        t = np.linspace(0.0, 1.0, 200)
        traj = hy.preisach_trajectory(den, t, 0.5 * t)
        assert traj.grid.r_cap == pytest.approx(3.0)

    def test_gaussian_inner_integrals_against_quad(self):
        from scipy.integrate import quad

        den = hy.PreisachDensity.gaussian(amplitude=1.3, decay=2.0, r_max=5.0, R=0.2)
        for xi in (-1.1, -0.2, 0.0, 0.4, 2.2):
            ig = quad(lambda v: 1.3 * np.exp(-2.0 * v * v), 0, xi)[0]
            iv = quad(lambda v: 1.3 * v * np.exp(-2.0 * v * v), 0, xi)[0]
            assert float(den.inner_g(0.7, xi)) == pytest.approx(ig, abs=1e-12)
            assert float(den.inner_v(0.7, xi)) == pytest.approx(iv, abs=1e-12)

    def test_exponential_inner_integrals_against_quad(self):
        from scipy.integrate import quad

        den = hy.PreisachDensity.exponential(amplitude=0.9, r_rate=1.5, v_rate=2.5, R=0.1)
        for xi in (-0.8, 0.3, 1.7):
            ig = quad(lambda v: 0.9 * np.exp(-1.5 * 0.4 - 2.5 * abs(v)), 0, xi)[0]
            iv = quad(lambda v: 0.9 * v * np.exp(-1.5 * 0.4 - 2.5 * abs(v)), 0, xi)[0]
            assert float(den.inner_g(0.4, xi)) == pytest.approx(ig, abs=1e-12)
            assert float(den.inner_v(0.4, xi)) == pytest.approx(iv, abs=1e-12)


class TestConvexify:
    def test_constant_density_unchanged(self):
        den = hy.PreisachDensity.uniform(value=2.0, span=4.0, R=1.0)
        hy.validate_density(den)
        rho_R = hy.convexify_density(den)
        rr = np.linspace(0.01, 6.0, 40)
        vv = np.linspace(-7.0, 7.0, 41)
        assert np.all(rho_R(rr[:, None], vv[None, :]) == 2.0)

    def test_gaussian_branch_selection(self):
        den = hy.PreisachDensity.gaussian(amplitude=1.0, decay=1.0, r_max=8.0, R=1.0)
        assert float(den.rho_R(0.5, 2.0)) == pytest.approx(np.exp(-0.25), abs=1e-15)
        assert float(den.rho_R(3.0, -7.0)) == pytest.approx(1.0, abs=1e-15)
        # lower clamp
        assert float(den.rho_R(0.25, -4.0)) == pytest.approx(np.exp(-0.5625), abs=1e-15)
        # interior copy
        assert float(den.rho_R(0.25, 0.5)) == pytest.approx(np.exp(-0.25), abs=1e-15)

    def test_continuity_across_branch_edges(self):
        den = hy.PreisachDensity.gaussian(amplitude=1.0, decay=1.0, r_max=8.0, R=0.8)
        for r in (0.1, 0.4, 0.79):
            edge = den.R - r
            inside = float(den.rho_R(r, edge - 1e-9))
            outside = float(den.rho_R(r, edge + 1e-9))
            assert inside == pytest.approx(outside, abs=1e-7)
        assert float(den.rho_R(0.8 - 1e-9, 0.0)) == pytest.approx(float(den.rho_R(0.8 + 1e-9, 5.0)), abs=1e-7)

    def test_convexify_requires_validation(self):
        den = hy.PreisachDensity.gaussian(R=0.3)
        with pytest.raises(ConfigurationError):
            hy.convexify_density(den)
        hy.validate_density(den)
        rho_R = hy.convexify_density(den)
        assert float(rho_R(0.1, 0.05)) == float(den.rho_R(0.1, 0.05))


class TestValidateDensity:
    def test_uniform_constants_exact(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0)
        c = hy.validate_density(den)
        assert c.A_R == 1.0
        assert c.C_R == 0.0
        assert c.K_R == 0.5
        assert c.H_rho == 1.0

    def test_quadratic_band_rejected_with_suggestion(self):
        rg = np.linspace(0.0, 1.6, 161)
        vg = np.linspace(-1.4, 1.4, 281)
        vals = np.maximum(2.0 - vg[None, :] ** 2, 0.0) * np.ones((rg.size, 1))
        den = hy.PreisachDensity.tabulated(rg, vg, vals, R=1.0)
        with pytest.raises(DensityValidationError) as ei:
            hy.validate_density(den)
        target = -2.0 + np.sqrt(6.0)  # root of (2 - R^2)/2 = 2R
        assert ei.value.suggested_R == pytest.approx(target, rel=0.05)

    def test_gaussian_small_radius_constants(self):
        den = hy.PreisachDensity.gaussian(amplitude=1.0, decay=1.0, r_max=8.0, R=0.1)
        c = hy.validate_density(den)
        # dense-grid extremal oracle, independent parameterization
        pts = np.random.default_rng(0).uniform(size=(20000, 2))
        r = pts[:, 0] * 0.1
        v = (2 * pts[:, 1] - 1) * (0.1 - r)
        oracle_A = np.exp(-(v**2)).min()
        oracle_C = np.max(2 * np.abs(v) * np.exp(-(v**2)))
        assert c.A_R == pytest.approx(np.exp(-0.01), abs=1e-6)
        assert c.A_R <= oracle_A + 1e-9
        assert c.C_R == pytest.approx(0.2 * np.exp(-0.01), abs=1e-4)
        assert c.C_R >= oracle_C - 1e-4
        assert c.K_R == pytest.approx(0.5 * c.A_R - 0.1 * c.C_R, abs=1e-14)

    def test_degenerate_positivity_rejected(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=0.5, R=1.0)  # triangle exits support
        with pytest.raises(DensityValidationError):
            hy.validate_density(den)

    def test_mass_constants_match_closed_forms(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0)
        c = hy.validate_density(den)
        assert c.C_rho == pytest.approx(16.0, rel=0.02)
        assert c.C_rho_star == pytest.approx(4.0, rel=1e-6)

        deng = hy.PreisachDensity.gaussian(amplitude=1.0, decay=1.0, r_max=2.0, R=0.2)
        cg = hy.validate_density(deng)
        assert cg.C_rho == pytest.approx(2.0 * np.sqrt(np.pi), rel=1e-3)

        dene = hy.PreisachDensity.exponential(amplitude=1.0, r_rate=2.0, v_rate=1.0, R=0.1)
        ce = hy.validate_density(dene)
        assert ce.C_rho == pytest.approx(1.0, rel=1e-3)  # A * (1/a) * (2/b)
        assert ce.C_rho_star == pytest.approx(0.5, rel=1e-3)


class TestEnergyResiduals:
    def test_dead_band_ramp_all_zero(self):
        t = np.linspace(0, 1, 200)
        p = 0.5 * t
        xi = hy.play_trajectory(1.0, p)
        r1, r2 = hy.play_energy_residuals(1.0, p, xi)
        assert np.all(r1 == 0.0) and np.all(r2 == 0.0)
        # density supported above the input reach: no output, exact zeros
        rg = np.array([0.6, 2.0])
        vg = np.linspace(-2, 2, 21)
        den = hy.PreisachDensity.tabulated(rg, vg, np.ones((2, vg.size)), R=0.2)
        traj = hy.preisach_trajectory(den, t, p)
        r3 = hy.preisach_energy_residuals(p, traj.g, traj.v_pot, traj.d_diss)
        assert np.max(np.abs(r3)) == 0.0

    def test_mismatched_lengths_rejected(self):
        with pytest.raises(ValueError):
            hy.play_energy_residuals(1.0, np.zeros(5), np.zeros(4))
        with pytest.raises(ValueError):
            hy.preisach_energy_residuals(np.zeros(5), np.zeros(5), np.zeros(4), np.zeros(5))

    def test_integrated_residuals_halve_with_step(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=6.0, R=1.0)
        sums1, sums3 = [], []
        for n in (512, 1024, 2048):
            t = period_grid(n)
            p = 2 * np.sin(t) + 0.5 * np.sin(3 * t)
            xi = hy.periodic_play_response(1.0, p)
            r1, _ = hy.play_energy_residuals(1.0, p, xi)
            sums1.append(np.sum(np.abs(r1)))
            traj = hy.periodic_preisach_response(den, t, p)
            r3 = hy.preisach_energy_residuals(p, traj.g, traj.v_pot, traj.d_diss)
            sums3.append(np.sum(np.abs(r3)))
        for s in (sums1, sums3):
            assert 1.7 <= s[0] / s[1] <= 2.3
            assert 1.7 <= s[1] / s[2] <= 2.3

    def test_mono_residual_bounded_on_refined_grids(self):
        rng = np.random.default_rng(31)
        t = np.linspace(0, 2 * np.pi, 15)
        p = rng.uniform(-2, 2, 15)
        p[-1] = p[0]
        _, pr, xr, _ = hy.play_trajectory_exact(0.5, t, p)
        _, r2 = hy.play_energy_residuals(0.5, pr, xr)
        assert np.max(np.abs(r2)) < 1e-12


class TestGrowthAndCoincidence:
    def _density(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=2.0, R=1.0)
        hy.validate_density(den)
        return den

    def test_zero_input(self):
        den = self._density()
        t = period_grid(64)
        rep = hy.growth_and_coincidence_check(den, t, np.zeros_like(t))
        assert rep.ok and rep.coincides and rep.max_coincidence_gap == 0.0

    def test_confined_input_coincides(self):
        den = self._density()
        t = period_grid(512)
        rep = hy.growth_and_coincidence_check(den, t, 0.9 * np.sin(t))
        assert rep.ok
        assert rep.confined and rep.coincides
        assert rep.max_coincidence_gap < 1e-12

    def test_large_input_differs_but_bounded(self):
        den = self._density()
        t = period_grid(512)
        rep = hy.growth_and_coincidence_check(den, t, 3.0 * np.sin(t))
        assert rep.ok
        assert not rep.confined and not rep.coincides
        assert rep.max_coincidence_gap > 1e-3

    def test_random_corpus_bounds_hold(self):
        den = self._density()
        rng = np.random.default_rng(57)
        t = period_grid(256)
        for _ in range(10):
            amp = rng.uniform(0.2, 4.0)
            p = amp * np.sin(t + rng.uniform(0, np.pi)) + 0.3 * amp * np.sin(2 * t)
            assert hy.growth_and_coincidence_check(den, t, p).ok

    def test_requires_validated_density(self):
        den = hy.PreisachDensity.uniform(value=1.0, span=2.0, R=1.0)
        with pytest.raises(ConfigurationError):
            hy.growth_and_coincidence_check(den, period_grid(16), np.zeros(16))


class TestTrajectoryCsv:
    def test_roundtrip(self, tmp_path):
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=1.0)
        t = period_grid(64)
        traj = hy.periodic_preisach_response(den, t, 1.5 * np.sin(t), n_r_nodes=16)
        path = tmp_path / "traj.csv"
        hy.write_trajectory_csv(path, traj)
        data = hy.read_trajectory_csv(path)
        assert np.array_equal(data["t"], traj.t)
        assert np.array_equal(data["p"], traj.p)
        assert np.array_equal(data["g"], traj.g)
        assert np.array_equal(data["g_R"], traj.g_R)
        assert np.array_equal(data["V"], traj.v_pot)
        assert np.array_equal(data["D"], traj.d_diss)
        assert np.array_equal(data["xi_r5"], traj.xi[:, 4])
