import math
from fractions import Fraction as F

import numpy as np
import pytest
from scipy import integrate, stats

from levy_overshoot.levy_model import Cutoff, JumpMeasure, LevyTriplet, StableTail
from levy_overshoot.pathsim import (
    Censored,
    Crossed,
    Engine,
    EngineError,
    PathSkeleton,
    SimConfig,
    decompose_jumps,
    passage_sample,
    run_to_passage,
    simulate,
    simulate_event_driven,
    simulate_grid,
    supremum_jump_diagnostic,
    KIND_JUMP,
    KIND_START,
)
from levy_overshoot.rng import replicate_stream


def cp(*atoms, drift=0):
    return LevyTriplet(0, JumpMeasure(tuple(atoms)), drift, Cutoff.ZERO)


def rng(i=0, seed=1):
    return replicate_stream(seed, i)


class TestDecompose:
    def test_examples(self):
        _, big, beta = decompose_jumps(cp((1, 0.5), (3, 0.5), (-1, 2)), 2)
        assert big.atoms == ((3, 0.5),) and beta == 0.5
        _, big, beta = decompose_jumps(cp((-1, 2)), 0.5)
        assert big.atoms == () and beta == 0
        small, big, beta = decompose_jumps(cp((1, 0.5), (3, 0.5)), 0.5)
        assert big.atoms == ((1, 0.5), (3, 0.5)) and beta == 1.0
        assert small.jumps.atoms == ()

    def test_rejects_non_positive_split(self):
        with pytest.raises(ValueError):
            decompose_jumps(cp((1, 1)), 0)

    def test_unit_ball_drift_bookkeeping(self):
        t = LevyTriplet(0, JumpMeasure(((F(1, 2), 2), (-1, 1))), 3, Cutoff.UNIT_BALL)
        small, big, _ = decompose_jumps(t, F(1, 4))
        # small part plus big part (zero cutoff) has the same zero-cutoff drift as the whole
        assert small.zero_cutoff_drift() == t.zero_cutoff_drift()

    def test_tail_split(self):
        t = LevyTriplet(0, JumpMeasure((), StableTail(0.8)), 0, Cutoff.UNIT_BALL)
        _, big, beta = decompose_jumps(t, 2.0)
        assert beta == pytest.approx(StableTail(0.8).mass(+1, 2.0))


class TestEventDriven:
    def test_staircase(self):
        cfg = SimConfig(horizon=50.0)
        counts = []
        for i in range(400):
            p = simulate_event_driven(cp((1, 1)), cfg, rng(i))
            assert np.all(np.diff(p.values) == 1)
            assert p.records[0] == (0.0, 0.0, "start")
            assert np.all(np.diff(p.times) > 0)
            counts.append(p.n_jumps)
        # Poisson(50): mean and variance both 50
        assert abs(np.mean(counts) - 50) < 4 * math.sqrt(50 / 400)

    def test_lattice_closure(self):
        cfg = SimConfig(horizon=200.0)
        for i in range(200):
            p = simulate_event_driven(cp((1, F(3, 10)), (-1, F(7, 10))), cfg, rng(i))
            assert np.all(p.values == np.round(p.values))
            assert p.lattice is not None

    def test_half_lattice_closure(self):
        t = cp((F(1, 2), 1), (F(-3, 2), F(1, 5)))
        for i in range(100):
            p = simulate_event_driven(t, SimConfig(horizon=50.0), rng(i))
            assert np.all(2 * p.values == np.round(2 * p.values))

    def test_empty_measure_rejected(self):
        with pytest.raises(EngineError):
            simulate_event_driven(cp(), SimConfig(), rng())

    def test_diffusion_rejected(self):
        with pytest.raises(EngineError):
            simulate_event_driven(LevyTriplet(1, JumpMeasure(), 0, Cutoff.ZERO), SimConfig(), rng())

    def test_exact_piecewise_linear(self):
        t = cp((-1, 1), drift=0.5)
        p = simulate_event_driven(t, SimConfig(horizon=20.0), rng(3))
        assert p.slope == 0.5
        jumps = p.kinds == KIND_JUMP
        gaps = p.left_limits[1:] - p.values[:-1]
        assert np.allclose(gaps, 0.5 * np.diff(p.times))
        assert np.allclose((p.values - p.left_limits)[jumps], -1)

    def test_mean_increment(self):
        t = cp((1, 0.5), (-2, 0.3), (F(1, 2), 1), drift=0.2)
        H = 10.0
        cfg = SimConfig(horizon=H)
        x = np.array([simulate(t, cfg, rng(i)).terminal_value() for i in range(4000)])
        mean = H * (0.2 + 0.5 - 0.6 + 0.5)
        assert abs(x.mean() - mean) < 4 * x.std(ddof=1) / math.sqrt(x.size)

    def test_skeleton_csv(self, tmp_path):
        p = simulate(cp((1, 1)), SimConfig(horizon=3.0), rng())
        f = tmp_path / "s.csv"
        p.to_csv(f)
        lines = f.read_text().splitlines()
        assert lines[0] == "time,value,kind"
        assert lines[1] == "0.0,0.0,start"
        assert len(lines) == 1 + len(p.times)


class TestGrid:
    def test_brownian_variance(self):
        t = LevyTriplet(1, JumpMeasure(), 0, Cutoff.UNIT_BALL)
        cfg = SimConfig(horizon=1.0, dt=0.01)
        incs = np.concatenate([np.diff(simulate_grid(t, cfg, rng(i)).values) for i in range(200)])
        # chi-square interval for the sample variance with 20000 degrees of freedom
        lo, hi = stats.chi2.ppf([0.0005, 0.9995], incs.size - 1) / (incs.size - 1)
        assert lo * 0.01 <= incs.var(ddof=1) <= hi * 0.01

    def test_grid_records_on_multiples_of_dt(self):
        t = LevyTriplet(1, JumpMeasure(((1, 1),)), 0, Cutoff.UNIT_BALL)
        p = simulate_grid(t, SimConfig(horizon=2.0, dt=0.25), rng(5))
        grid_times = p.times[p.kinds == 2]
        assert np.allclose(grid_times, 0.25 * np.arange(1, 9))
        assert p.engine is Engine.GRID

    def test_jump_count_poisson(self):
        t = LevyTriplet(1, JumpMeasure(((1, 1),)), 0, Cutoff.UNIT_BALL)
        H = 3.0
        cfg = SimConfig(horizon=H, dt=0.5)
        n = 10_000
        counts = np.array([simulate_grid(t, cfg, rng(i)).n_jumps for i in range(n)])
        top = 9
        obs = np.array([np.sum(counts == k) for k in range(top)] + [np.sum(counts >= top)])
        probs = np.append(stats.poisson.pmf(np.arange(top), H), stats.poisson.sf(top - 1, H))
        _, pval = stats.chisquare(obs, n * probs)
        assert pval > 0.01

    @pytest.mark.parametrize("alpha,eps", [(0.8, 0.01), (1.5, 0.05), (0.5, 0.2)])
    def test_stable_tail_mass_matches_quadrature(self, alpha, eps):
        tail = StableTail(alpha, 1.3, 0.7)
        for side, c in ((+1, 1.3), (-1, 0.7)):
            quad, _ = integrate.quad(lambda x: c * x ** (-1 - alpha), eps, np.inf)
            assert tail.mass(side, eps) == pytest.approx(quad, rel=1e-8)
            m2, _ = integrate.quad(lambda x: c * x ** (1 - alpha), 0, eps)
            assert tail.second_moment(side, 0, eps) == pytest.approx(m2, rel=1e-8)

    def test_stable_big_jump_rate(self):
        tail = StableTail(0.8, 1.0, 0.0)
        t = LevyTriplet(0, JumpMeasure((), tail), 0, Cutoff.UNIT_BALL)
        cfg = SimConfig(horizon=1.0, dt=0.1, small_jump_eps=0.1)
        counts = np.array([simulate_grid(t, cfg, rng(i)).n_jumps for i in range(3000)])
        lam = tail.mass(+1, 0.1)
        assert abs(counts.mean() - lam) < 4 * math.sqrt(lam / counts.size)

    def test_stable_samples_beyond_eps(self):
        tail = StableTail(1.5, 1.0, 1.0)
        s = tail.sample(rng(), +1, 0.05, np.inf, 5000)
        assert s.min() >= 0.05
        # P(X > 0.2 | X > 0.05) = (0.05 / 0.2) ** alpha
        assert abs(np.mean(s > 0.2) - 0.25**1.5) < 4 * math.sqrt(0.125 * 0.875 / 5000)

    def test_missing_eps(self):
        t = LevyTriplet(0, JumpMeasure((), StableTail(0.8)), 0, Cutoff.UNIT_BALL)
        with pytest.raises(EngineError):
            simulate_grid(t, SimConfig(), rng())


class TestPassage:
    def test_non_positive_level(self):
        out = run_to_passage(cp((1, 1)), -1, False, SimConfig(), rng())
        assert out.result == Crossed(0.0, 0.0, 1.0)

    def test_monotone_support(self):
        t = cp((1, 0.5), (3, 0.5))
        ok, _, pos = passage_sample(t, 1.5, False, 2000, SimConfig(seed=4))
        assert ok.all() and set(np.unique(pos)) == {2.0, 3.0, 4.0}

    def test_drift_crossing_is_exact(self):
        t = cp((-1, 1), drift=1)
        ok, _, pos = passage_sample(t, 2, False, 2000, SimConfig(seed=2, horizon=50.0))
        assert ok.any() and np.all(pos[ok] == 2.0)

    def test_positive_atoms_never_undershoot(self):
        t = cp((0.7, 1), (1.9, 0.5))
        for strict in (False, True):
            ok, _, pos = passage_sample(t, 2.1, strict, 1000, SimConfig(seed=9))
            assert np.all(pos[ok] > 2.1) if strict else np.all(pos[ok] >= 2.1)

    def test_strict_skip_free_at_lattice_level(self):
        t = cp((1, 0.5), (-1, 0.1))
        ok, _, pos = passage_sample(t, 2, True, 500, SimConfig(seed=1))
        assert np.all(pos[ok] == 3.0)
        ok, _, pos = passage_sample(t, 2, False, 500, SimConfig(seed=1))
        assert np.all(pos[ok] == 2.0)

    def test_censoring(self):
        out = run_to_passage(cp((-1, 1)), 1, False, SimConfig(horizon=5.0), rng())
        assert out.result == Censored(5.0)
        assert not out.crossed

    def test_determinism(self):
        t = cp((1, 0.5), (2, 0.5), (-1.3, 0.4))
        a = passage_sample(t, 2.2, False, 300, SimConfig(seed=11))
        b = passage_sample(t, 2.2, False, 300, SimConfig(seed=11))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_worker_invariance(self):
        t = cp((1, 0.5), (2, 0.5), (-1.3, 0.4))
        a = passage_sample(t, 2.2, False, 200, SimConfig(seed=11))
        b = passage_sample(t, 2.2, False, 200, SimConfig(seed=11, workers=2))
        for x, y in zip(a, b):
            np.testing.assert_array_equal(x, y)

    def test_run_to_passage_matches_sample(self):
        t = cp((1, 0.5), (-1, 0.5))
        cfg = SimConfig(seed=5)
        ok, times, pos = passage_sample(t, 1.5, False, 5, cfg)
        for i in range(5):
            out = run_to_passage(t, 1.5, False, cfg, replicate_stream(5, i))
            assert out.crossed == ok[i]
            if out.crossed:
                assert (out.result.time, out.result.position) == (times[i], pos[i])

    def test_bridge_positions_equal_level(self):
        t = LevyTriplet(1, JumpMeasure(), 0, Cutoff.UNIT_BALL)
        ok, _, pos = passage_sample(t, 0.5, False, 500, SimConfig(horizon=1.0, dt=0.01))
        assert np.all(pos[ok] == 0.5)

    def test_grid_refinement_does_not_raise_median(self):
        t = LevyTriplet(1, JumpMeasure(), 0, Cutoff.UNIT_BALL)
        medians = []
        for dt in (0.04, 0.02, 0.01):
            cfg = SimConfig(seed=3, horizon=1.0, dt=dt, bridge_correction=False)
            ok, _, pos = passage_sample(t, 0.5, False, 2000, cfg)
            medians.append(np.median(pos[ok] - 0.5))
        assert medians[0] > 0
        assert medians[2] <= medians[0]


class TestSupremumDiagnostic:
    def _skel(self, times, values, left, kinds):
        return PathSkeleton(np.array(times, float), np.array(values, float), np.array(kinds, np.int8),
                            np.array(left, float), Engine.EVENT_DRIVEN, 10.0)

    def test_drift_only(self):
        p = simulate(cp((-1, 1e-9), drift=1), SimConfig(horizon=5.0), rng())
        assert supremum_jump_diagnostic(p) == 0

    def test_single_new_max_jump(self):
        p = self._skel([0, 1, 2], [0, -1, 1], [0, 0, -1], [KIND_START, KIND_JUMP, KIND_JUMP])
        # running max 0, jump from -1 to +1: supremum rises by 1
        assert supremum_jump_diagnostic(p) == 1
        p = self._skel([0, 1], [0, 2], [0, 0], [KIND_START, KIND_JUMP])
        assert supremum_jump_diagnostic(p) == 2

    def test_jump_below_max(self):
        p = self._skel([0, 1, 2, 3], [0, 3, 1, 2.5], [0, 0, 3, 1], [KIND_START, 1, 1, 1])
        assert supremum_jump_diagnostic(p) == 3

    def test_spectrally_negative_always_zero(self):
        t = cp((-1, 1), (-0.3, 2), drift=1.5)
        for i in range(200):
            assert supremum_jump_diagnostic(simulate(t, SimConfig(horizon=20.0), rng(i))) == 0


def test_equal_jump_multisets_give_equal_positions():
    t = cp((0.3, 1), (math.pi / 10, 1), (-math.sqrt(2), 0.5))
    ok, _, pos = passage_sample(t, 0.55, False, 3000, SimConfig(seed=6))
    # sizes are rationally independent, so distinct positions come from distinct multisets
    u = np.unique(pos[ok])
    assert np.all(np.diff(u) > 1e-9)
