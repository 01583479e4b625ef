"""Built-in catalog of processes and the classifier-vs-simulation table."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction as F
from typing import Optional

import numpy as np

from .levy_model import (
    Cutoff,
    JumpMeasure,
    LevyTriplet,
    StableTail,
    Variant,
    classify,
    predicted_passage_position,
)
from .oracle import LatticeChainSpec, exact_passage_law, horizon_censoring_bound
from .overshoot_measures import Verdict, multi_level_consistency
from .pathsim import Engine, SimConfig, _compile, simulate, supremum_jump_diagnostic
from .rng import replicate_stream

LEVELS = (0.5, 1.5, 2.5)


@dataclass(frozen=True)
class ZooEntry:
    name: str
    triplet: LevyTriplet
    levels: tuple = LEVELS
    horizon: float = 100.0
    dt: float = 2e-3
    small_jump_eps: Optional[float] = None
    gaussian_substitution: bool = False

    def sim_config(self, base: SimConfig) -> SimConfig:
        return replace(base, horizon=self.horizon, dt=self.dt, small_jump_eps=self.small_jump_eps,
                       gaussian_substitution=self.gaussian_substitution, bridge_correction=True)


def _cp(*atoms, drift=0):
    return LevyTriplet(0, JumpMeasure(tuple(atoms)), drift, Cutoff.ZERO)


CATALOG = (
    ZooEntry("spectrally_negative_cp_drift_up", _cp((-1, F(1)), drift=F(3, 2))),
    ZooEntry("brownian_drift", LevyTriplet(1, JumpMeasure(), F(1, 2), Cutoff.UNIT_BALL), horizon=10.0),
    ZooEntry("skip_free_up", _cp((1, F(7, 10)), (-1, F(3, 10)))),
    ZooEntry("skip_free_down", _cp((1, F(3, 10)), (-1, F(7, 10)))),
    ZooEntry("skip_free_half_lattice", _cp((F(1, 2), F(1)), (F(-3, 2), F(1, 5))), levels=(0.3, 1.1, 2.6)),
    ZooEntry("two_positive_atoms", _cp((1, F(1, 2)), (2, F(1, 2)))),
    ZooEntry("irrational_atom", _cp((1, F(1, 2)), (-math.sqrt(2), F(1, 2)))),
    ZooEntry("brownian_plus_positive_jump",
             LevyTriplet(1, JumpMeasure(((1, F(1)),)), 0, Cutoff.UNIT_BALL), horizon=10.0),
    ZooEntry("spectrally_negative_stable",
             LevyTriplet(0, JumpMeasure((), StableTail(1.5, 0.0, 1.0)), 1, Cutoff.UNIT_BALL),
             horizon=10.0, small_jump_eps=0.05, gaussian_substitution=True),
    ZooEntry("positive_stable",
             LevyTriplet(0, JumpMeasure((), StableTail(0.8, 1.0, 0.0)), 0, Cutoff.UNIT_BALL),
             horizon=5.0, small_jump_eps=0.01, gaussian_substitution=True),
)


def default_delta(t: LevyTriplet, cfg: SimConfig) -> float:
    """Exact comparison for event-driven paths, ``6 sigma sqrt(dt)`` on a grid."""
    plan = _compile(t, cfg)
    if plan.engine is Engine.EVENT_DRIVEN:
        return 0.0
    return 6.0 * plan.sigma * math.sqrt(cfg.dt)


def diagnostic_lower_bound(t: LevyTriplet, horizon: float) -> Optional[float]:
    """Lower bound on ``P(running supremum jumps before the horizon)`` for event-driven paths.

    With no downward motion every positive jump sets a new supremum, giving
    ``1 - exp(-beta horizon)`` with ``beta`` the positive-jump rate; with a
    non-negative slope the first jump alone gives ``(beta / rate)(1 - exp(-rate horizon))``.
    """
    if t.sigma2 != 0 or t.jumps.tail is not None:
        return None
    beta = float(sum((r for s, r in t.jumps.atoms if s > 0), 0))
    rate = float(t.jumps.total_finite_rate)
    slope = t.zero_cutoff_drift()
    if beta == 0 or slope < 0:
        return 0.0 if beta == 0 else None
    if all(s > 0 for s in t.jumps.sizes):
        return 1.0 - math.exp(-beta * horizon)
    return beta / rate * (1.0 - math.exp(-rate * horizon))


@dataclass
class ZooRow:
    name: str
    process_class: str
    variant: Variant
    engine: str
    levels: list
    predicted: list
    verdicts: list
    points: list
    homogeneous: bool
    theorem_consistent: bool
    oracle_max_z: Optional[float]
    oracle_agrees: Optional[bool]
    diag_fraction: float
    diag_zero_always: bool
    diag_lower_bound: Optional[float]
    diag_consistent: Optional[bool]
    n: int
    delta: float
    support_points: list = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "class": self.process_class,
            "engine": self.engine,
            "levels": self.levels,
            "predicted": self.predicted,
            "verdicts": self.verdicts,
            "homogeneous": self.homogeneous,
            "theorem_consistent": self.theorem_consistent,
            "oracle_max_z": self.oracle_max_z,
            "oracle_agrees": self.oracle_agrees,
            "diag_fraction": self.diag_fraction,
            "diag_lower_bound": self.diag_lower_bound,
            "diag_consistent": self.diag_consistent,
            "n": self.n,
            "delta": self.delta,
        }


def _oracle_agreement(t, laws, cfg):
    """Largest per-atom deviation in units of ``sqrt(p(1-p)/n)`` after removing certified slack."""
    if not t.is_compound_poisson():
        return None, None
    try:
        spec = LatticeChainSpec.from_triplet(t)
        worst = 0.0
        ok = True
        for law in laws:
            exact = exact_passage_law(spec, law.level)
            slack = exact.error_bound + horizon_censoring_bound(spec, law.level, cfg.horizon)
            support = set(exact.masses) | set(law.positions.tolist())
            for x in support:
                p = float(exact.masses.get(x, 0))
                se = math.sqrt(max(p * (1 - p), 1e-300) / law.n_replicates)
                dev = max(0.0, abs(law.mass(x) - p) - slack)
                z = dev / se
                worst = max(worst, z)
                ok &= dev <= 4 * se
        return worst, ok
    except ValueError:
        return None, None


def run_entry(entry: ZooEntry, n: int, base: SimConfig, index: int = 0, n_diag: Optional[int] = None) -> ZooRow:
    t = entry.triplet
    cfg = entry.sim_config(base)
    pc = classify(t)
    delta = default_delta(t, cfg)
    rep = multi_level_consistency(t, entry.levels, n, cfg, delta, tag=(index, 0))
    predicted = [predicted_passage_position(pc, x) for x in entry.levels]
    verdict_labels = [v.label() for v in rep.verdicts]
    points = [v.point for v in rep.verdicts]
    if pc.variant is Variant.NON_DETERMINISTIC:
        consistent = rep.homogeneous and rep.any_non_trivial
    else:
        consistent = rep.homogeneous and all(
            v.verdict is Verdict.TRIVIAL and (v.vacuous or abs(v.point - p) <= delta)
            for v, p in zip(rep.verdicts, predicted)
        )
    z, agrees = _oracle_agreement(t, rep.laws, cfg)

    n_diag = n if n_diag is None else n_diag
    diag = np.array([
        supremum_jump_diagnostic(simulate(t, cfg, replicate_stream(cfg.seed, i, (index, 1))))
        for i in range(n_diag)
    ])
    frac = float(np.mean(diag > 0))
    bound = diagnostic_lower_bound(t, cfg.horizon)
    if pc.variant is Variant.SPECTRALLY_NEGATIVE:
        diag_ok = bool(np.all(diag == 0))
        bound = 0.0
    elif bound is None:
        diag_ok = None
    else:
        se = math.sqrt(max(bound * (1 - bound), 1.0 / n_diag) / n_diag)
        diag_ok = frac >= bound - 4 * se
    support = sorted({float(p) for law in rep.laws for p in law.positions.tolist()})
    return ZooRow(
        name=entry.name, process_class=str(pc), variant=pc.variant,
        engine=_compile(t, cfg).engine.value, levels=list(entry.levels), predicted=predicted,
        verdicts=verdict_labels, points=points, homogeneous=rep.homogeneous,
        theorem_consistent=consistent, oracle_max_z=z, oracle_agrees=agrees,
        diag_fraction=frac, diag_zero_always=bool(np.all(diag == 0)), diag_lower_bound=bound,
        diag_consistent=diag_ok, n=n, delta=delta, support_points=support[:50],
    )


def run_zoo(n: int, base: SimConfig, entries=CATALOG, n_diag: Optional[int] = None):
    return [run_entry(e, n, base, i, n_diag) for i, e in enumerate(entries)]
