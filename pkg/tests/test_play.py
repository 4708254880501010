"""Play operator: projection update, oracles, invariants, periodicity."""

import numpy as np
import pytest

from porowave import hysteresis as hy
from porowave.errors import InvalidThresholdError


def play_projection_oracle(r, t, p, refine):
    """Independent fine-step oracle: piecewise-linear input resampled
    ``refine`` times finer, variational inequality solved by projection."""
    tf = np.linspace(t[0], t[-1], refine * (len(t) - 1) + 1)
    pf = np.interp(tf, t, p)
    xi = pf[0] - min(max(pf[0], -r), r)
    out = [xi]
    for q in pf[1:]:
        lo, hi = q - r, q + r
        xi = min(max(xi, lo), hi)
        out.append(xi)
    return tf, pf, np.array(out)


def random_piecewise_linear(rng, n_break=12, amp=2.0, periodic=True):
    vals = rng.uniform(-amp, amp, n_break)
    if periodic:
        vals[-1] = vals[0]
    t = np.linspace(0.0, 2 * np.pi, n_break)
    return t, vals


class TestPlayBasics:
    def test_init_inside_dead_band(self):
        assert hy.play_init(1.0, 0.5).xi == 0.0

    def test_init_ascending(self):
        assert hy.play_init(1.0, 2.0).xi == 1.0

    def test_init_descending(self):
        assert hy.play_init(0.25, -3.0).xi == pytest.approx(-2.75, abs=1e-15)

    def test_init_rejects_bad_threshold(self):
        with pytest.raises(InvalidThresholdError):
            hy.play_init(0.0, 1.0)
        with pytest.raises(InvalidThresholdError):
            hy.play_init(-2.0, 1.0)

    def test_update_inside_dead_band(self):
        s = hy.PlayState(r=1.0, xi=0.0)
        assert hy.play_update(s, 0.5).xi == 0.0

    def test_update_ascending_contact(self):
        s = hy.PlayState(r=1.0, xi=0.0)
        assert hy.play_update(s, 2.5).xi == 1.5

    def test_update_exact_contact_no_motion(self):
        # inclusive clamp: |p - xi| == r stays put
        s = hy.PlayState(r=1.0, xi=0.0)
        assert hy.play_update(s, 1.0).xi == 0.0

    def test_trajectory_constant_input(self):
        out = hy.play_trajectory(0.7, np.full(50, 1.3))
        assert np.all(out == out[0])
        assert out[0] == pytest.approx(1.3 - 0.7)


class TestPlayOracles:
    def test_ramp_matches_closed_form_and_fine_oracle(self):
        t = np.arange(0.0, 3.0 + 1e-12, 1e-3)
        xi = hy.play_trajectory(1.0, t)
        assert xi[-1] == pytest.approx(2.0, abs=1e-12)
        assert np.max(np.abs(xi - np.maximum(0.0, t - 1.0))) < 1e-12
        tf, _, xf = play_projection_oracle(1.0, t, t, refine=100)
        assert np.max(np.abs(xi - xf[::100])) < 1e-12

    def test_clipped_sine_against_refined_oracle(self):
        t = np.linspace(0.0, 2 * np.pi, 2001)
        p = 2.0 * np.sin(t)
        xi = hy.play_trajectory(1.0, p)
        _, _, xf = play_projection_oracle(1.0, t, p, refine=20)
        # Lipschitz: error bounded by the input modulus over one sub-step
        modulus = np.max(np.abs(np.diff(p)))
        assert np.max(np.abs(xi - xf[::20])) <= modulus
        after_quarter = xi[t > np.pi / 2]
        assert after_quarter.max() <= 1.0 + 1e-12
        assert after_quarter.min() >= -1.0 - 1e-12
        assert after_quarter.max() > 0.99 and after_quarter.min() < -0.99

    def test_random_corpus_matches_refined_oracle(self):
        rng = np.random.default_rng(42)
        for _ in range(25):
            t, p = random_piecewise_linear(rng)
            for r in (0.1, 0.5, 1.0, 2.0):
                xi = hy.play_trajectory(r, p)
                _, _, xf = play_projection_oracle(r, t, p, refine=100)
                assert np.max(np.abs(xi - xf[::100])) < 1e-10


class TestPlayInvariants:
    def test_lipschitz_estimate_on_pairs(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            t, p1 = random_piecewise_linear(rng)
            p2 = p1 + rng.uniform(-0.1, 0.1, p1.size)
            for r in (0.3, 1.0):
                xi1 = hy.play_trajectory(r, p1)
                xi2 = hy.play_trajectory(r, p2)
                gap_in = np.maximum.accumulate(np.abs(p1 - p2))
                gap_out = np.abs(xi1 - xi2)
                assert np.all(gap_out <= gap_in + 1e-14)

    def test_rate_independence(self):
        rng = np.random.default_rng(3)
        _, p = random_piecewise_linear(rng)
        xi_a = hy.play_trajectory(0.8, p)
        xi_b = hy.play_trajectory(0.8, p)  # timestamps never enter the update
        assert np.array_equal(xi_a, xi_b)

    def test_feasibility_each_step(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            _, p = random_piecewise_linear(rng, n_break=40)
            xi = hy.play_trajectory(0.6, p)
            assert np.max(np.abs(p - xi)) <= 0.6 + 1e-14

    def test_null_implication(self):
        rng = np.random.default_rng(5)
        _, p = random_piecewise_linear(rng, amp=0.9)
        xi = hy.play_trajectory(1.0, p)  # r >= sup|p|
        assert np.all(xi == 0.0)

    def test_piecewise_monotone_exactness(self):
        # refining the grid between samples leaves sample values unchanged
        rng = np.random.default_rng(17)
        t, p = random_piecewise_linear(rng, n_break=9)
        xi = hy.play_trajectory(0.7, p)
        for refine in (3, 10, 41):
            tf = np.linspace(t[0], t[-1], refine * (len(t) - 1) + 1)
            pf = np.interp(tf, t, p)
            xf = hy.play_trajectory(0.7, pf)
            assert np.max(np.abs(xf[::refine] - xi)) < 1e-13

    def test_variational_inequality_every_grid(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            _, p = random_piecewise_linear(rng, n_break=60)
            xi = hy.play_trajectory(0.5, p)
            dxi = np.diff(xi)
            dp = np.diff(p)
            assert np.min(dxi * (dp - dxi)) >= -1e-14

    def test_mono_identity_exact_on_refined_grid(self):
        rng = np.random.default_rng(29)
        for _ in range(20):
            t, p = random_piecewise_linear(rng)
            for r in (0.1, 0.5, 1.0, 2.0):
                _, pr, xr, _ = hy.play_trajectory_exact(r, t, p)
                _, r2 = hy.play_energy_residuals(r, pr, xr)
                if r2.size:
                    assert np.max(np.abs(r2)) < 1e-12


class TestPeriodicity:
    def test_below_threshold_response_is_zero(self):
        t = np.linspace(0, 2 * np.pi, 129)[:-1]
        out = hy.periodic_play_response(2.0, np.sin(t))
        assert np.all(out == 0.0)

    def test_second_and_third_period_agree(self):
        t = np.linspace(0, 2 * np.pi, 257)[:-1]
        for p, r in ((2 * np.sin(t), 1.0), (2 * np.sin(t) + 0.5 * np.sin(3 * t), 0.7)):
            full = hy.play_trajectory(r, np.tile(p, 3))
            n = t.size
            assert np.max(np.abs(full[n : 2 * n] - full[2 * n :])) < 1e-14
            # returned response is the settled period
            assert np.array_equal(hy.periodic_play_response(r, p), full[n : 2 * n])

    def test_random_periodic_inputs_settle(self):
        rng = np.random.default_rng(101)
        for _ in range(10):
            t, p = random_piecewise_linear(rng, n_break=33)
            for r in (0.2, 0.9):
                full = hy.play_trajectory(r, np.tile(p[:-1], 3))
                n = p.size - 1
                assert np.max(np.abs(full[n : 2 * n] - full[2 * n :])) < 1e-14


class TestMemoryState:
    def test_order_consistency_nonexpanding_in_r(self):
        rng = np.random.default_rng(13)
        grid = hy.MemoryGrid.for_amplitude(2.0, n_nodes=48)
        state = hy.MemoryState.virgin(grid)
        for p in rng.uniform(-2, 2, 200):
            state = state.update(p)
            dxi = np.abs(np.diff(state.xi))
            dr = np.diff(grid.r_nodes)
            assert np.all(dxi <= dr + 1e-12)

    def test_feasibility_all_nodes(self):
        grid = hy.MemoryGrid.for_amplitude(1.5, n_nodes=32)
        state = hy.MemoryState.virgin(grid)
        for p in 1.5 * np.sin(np.linspace(0, 7, 100)):
            state = state.update(p)
            assert np.all(np.abs(p - state.xi) <= grid.r_nodes + 1e-12)

    def test_streaming_regrid_consistency(self):
        # stream past the anticipated amplitude; compare against a run on a
        # grid sized for the full series
        t = np.linspace(0, 4 * np.pi, 400)
        p = 0.4 * t / t[-1] * 3.0 * np.sin(t)  # growing envelope up to ~1.2
        small = hy.MemoryState.virgin(hy.MemoryGrid.for_amplitude(0.2, n_nodes=64))
        for q in p:
            small = small.update(q)
        den = hy.PreisachDensity.uniform(value=1.0, span=4.0, R=0.5)
        big = hy.preisach_trajectory(den, t, p, n_r_nodes=64)
        g_small = hy.preisach_eval(den, small, convexified=False).g
        assert g_small == pytest.approx(big.g[-1], abs=5e-3)
        assert np.all(np.abs(np.diff(small.xi)) <= np.diff(small.grid.r_nodes) + 1e-9)
