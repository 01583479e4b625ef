"""Acceptance gate: one test per criterion, each recording a PASS/FAIL line."""
import filecmp
import json
import math
import time
from fractions import Fraction as F

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from levy_overshoot import cli
from levy_overshoot.levy_model import Cutoff, JumpMeasure, LevyTriplet, Variant, classify
from levy_overshoot.oracle import LatticeChainSpec, exact_identity_sides, exact_passage_law, horizon_censoring_bound
from levy_overshoot.overshoot_measures import convolution_check, estimate_law
from levy_overshoot.pathsim import Engine, SimConfig, passage_sample
from levy_overshoot.zoo import CATALOG, run_zoo
from oracles import BROWNIAN_1, Q_GAMBLER, Q_MONOTONE_1_5, reflection_crossing

SKIP_FREE = LevyTriplet(0, JumpMeasure(((1, F(3, 10)), (-1, F(7, 10)))), 0, Cutoff.ZERO)
MONOTONE = LevyTriplet(0, JumpMeasure(((1, F(1, 2)), (3, F(1, 2)))), 0, Cutoff.ZERO)


def record(k, title, ok, detail):
    ACCEPTANCE_LINES.append(f"[{k}] {'PASS' if ok else 'FAIL'} {title}: {detail}")
    assert ok, detail


def test_1_skip_free_exactness():
    cfg = SimConfig(seed=1)
    t0 = time.perf_counter()
    bad = 0
    for i, x in enumerate((0.5, 1.5, 2.5)):
        ok, _, pos = passage_sample(SKIP_FREE, x, False, 10_000, cfg, (i,))
        bad += int(np.count_nonzero(pos[ok] != float(math.ceil(x))))
    elapsed = time.perf_counter() - t0
    record(1, "skip-free exactness", bad == 0 and elapsed < 10.0,
           f"{bad} positions off the lattice prediction, {elapsed:.2f}s for 3x10^4 replicates")


def test_2_passage_probability_vs_oracle():
    n, horizon = 100_000, 100.0
    spec = LatticeChainSpec.from_triplet(SKIP_FREE)
    censor = horizon_censoring_bound(spec, 0.5, horizon)
    exact = exact_passage_law(spec, 0.5)
    law = estimate_law(SKIP_FREE, 0.5, False, n, SimConfig(seed=2, horizon=horizon))
    p = float(Q_GAMBLER)
    tol = 4 * math.sqrt(p * (1 - p) / n)
    dev = abs(law.crossed_mass - p)
    oracle_gap = abs(float(exact.total - Q_GAMBLER))
    ok = dev <= tol and censor < 1e-3 and oracle_gap <= exact.error_bound + 1e-12
    record(2, "passage probability vs 3/7", ok,
           f"crossed={law.crossed_mass:.5f} |dev|={dev:.2e} tol={tol:.2e} censoring<={censor:.1e} "
           f"oracle gap={oracle_gap:.1e}")


def test_3_enumeration_oracle():
    n = 100_000
    spec = LatticeChainSpec.from_triplet(MONOTONE)
    exact = exact_passage_law(spec, 1.5)
    want = {float(k): v for k, v in Q_MONOTONE_1_5.items()}
    law = estimate_law(MONOTONE, 1.5, False, n, SimConfig(seed=3))
    zs = {x: abs(law.mass(x) - float(p)) / math.sqrt(float(p * (1 - p)) / n) for x, p in want.items()}
    extra = set(law.positions.tolist()) - set(want)
    ok = exact.exact and exact.masses == want and max(zs.values()) <= 4 and not extra
    record(3, "enumeration oracle", ok,
           f"exact={ {k: str(v) for k, v in exact.masses.items()} } max z={max(zs.values()):.2f}")


def test_4_convolution_identity():
    n = 100_000
    spec = LatticeChainSpec.from_triplet(MONOTONE)
    bins = [(x, x) for x in exact_passage_law(spec, 1.5).masses]
    rep = convolution_check(MONOTONE, 1.5, 0.5, n, SimConfig(seed=4), bins)
    lhs, rhs = exact_identity_sides(spec, 1.5, 0.5, bins)
    gap = max(abs(float(a - b)) for a, b in zip(lhs, rhs))
    ok = rep.max_studentized <= 3 and gap <= 1e-9
    record(4, "convolution identity", ok, f"max studentized={rep.max_studentized:.3f} exact gap={gap:.1e}")


@pytest.fixture(scope="module")
def zoo_rows():
    return run_zoo(10_000, SimConfig(seed=5), CATALOG, n_diag=2_000)


def test_5_zoo_cross_validation(zoo_rows):
    from levy_overshoot.overshoot_measures import multi_level_consistency
    from levy_overshoot.zoo import default_delta

    problems = []
    variants = set()
    for row in zoo_rows:
        variants.add(row.variant)
        if row.process_class != str(classify([e for e in CATALOG if e.name == row.name][0].triplet)):
            problems.append(f"{row.name}: class column mismatch")
        if not (row.homogeneous and row.theorem_consistent):
            problems.append(f"{row.name}: {row.process_class} vs {row.verdicts}")
        if any(v == "Undecided" for v in row.verdicts):
            problems.append(f"{row.name}: undecided level")
    for name in ("two_positive_atoms", "irrational_atom"):
        entry = [e for e in CATALOG if e.name == name][0]
        row = [r for r in zoo_rows if r.name == name][0]
        if row.verdicts != ["NonTrivial"] * len(entry.levels):
            problems.append(f"{name}: {row.verdicts}")
        cfg = entry.sim_config(SimConfig(seed=5))
        idx = CATALOG.index(entry)
        rep = multi_level_consistency(entry.triplet, entry.levels, 10_000, cfg,
                                      default_delta(entry.triplet, cfg), tag=(idx, 0))
        for law in rep.laws:
            if not law.positions.size or law.positions.max() - law.positions.min() <= 0.1:
                problems.append(f"{name} level {law.level}: support not separated by > 0.1")
    ok = len(zoo_rows) >= 6 and variants == set(Variant) and not problems
    record(5, "zoo cross-validation", ok,
           f"{len(zoo_rows)} entries, variants={sorted(v.value for v in variants)}, problems={problems}")


def test_6_supremum_continuity(zoo_rows):
    problems, checked = [], []
    for row in zoo_rows:
        if row.engine != Engine.EVENT_DRIVEN.value:
            continue
        if row.variant is Variant.SPECTRALLY_NEGATIVE:
            checked.append(f"{row.name}: always 0={row.diag_zero_always}")
            if not row.diag_zero_always:
                problems.append(row.name)
        else:
            checked.append(f"{row.name}: {row.diag_fraction:.3f}>={row.diag_lower_bound:.3f}")
            if not row.diag_consistent:
                problems.append(row.name)
    record(6, "supremum continuity", not problems and len(checked) >= 4, "; ".join(checked))


def test_7_brownian_calibration():
    n = 100_000
    t = LevyTriplet(1, JumpMeasure(), 0, Cutoff.UNIT_BALL)
    ok, _, pos = passage_sample(t, 1.0, False, n, SimConfig(seed=7, horizon=1.0, dt=1e-3))
    p = reflection_crossing(1.0, 1.0, 1.0)
    assert p == pytest.approx(BROWNIAN_1, abs=1e-15)
    freq = ok.mean()
    se = math.sqrt(p * (1 - p) / n)
    exact_zero = bool(np.all(pos[ok] - 1.0 == 0.0))
    record(7, "Brownian crossing calibration", abs(freq - p) <= 3 * se and exact_zero,
           f"freq={freq:.5f} target={p:.5f} z={(freq - p) / se:.2f} overshoots all 0={exact_zero}")


def _zoo_bundle(tmp_path, name, workers):
    cfg = tmp_path / "zoo.json"
    cfg.write_text(json.dumps({"experiment": "zoo", "n": 400, "n_diag": 100, "sim": {"seed": 8}}))
    out = tmp_path / name
    code = cli.main(["zoo", "--config", str(cfg), "--out", str(out), "--workers", str(workers)])
    return code, out


def test_8_reproducibility(tmp_path):
    runs = [_zoo_bundle(tmp_path, f"run{i}", w) for i, w in enumerate((1, 1, 2))]
    files = sorted(p.name for p in runs[0][1].iterdir() if p.name != "timing.json")
    diffs = []
    for _, out in runs[1:]:
        other = sorted(p.name for p in out.iterdir() if p.name != "timing.json")
        if other != files:
            diffs.append(f"{out.name}: file set differs")
            continue
        _, mismatch, errors = filecmp.cmpfiles(runs[0][1], out, files, shallow=False)
        diffs += [f"{out.name}/{m}" for m in mismatch + errors]
    ok = not diffs and all(code == 0 for code, _ in runs)
    record(8, "reproducibility", ok, f"{len(files)} files compared across 3 runs (workers 1, 1, 2), diffs={diffs}")
