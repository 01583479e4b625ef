"""Empirical first-passage laws and the checks built on them."""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .levy_model import LevyTriplet
from .pathsim import SimConfig, passage_sample


@dataclass
class EmpiricalLaw:
    """Sub-probability law of the passage position, kept as integer counts.

    Each of the ``n_replicates`` runs either crossed (counted at its position)
    or was censored at the horizon, so the mass accounting is exact.
    """

    level: float
    positions: np.ndarray
    counts: np.ndarray
    n_replicates: int
    seed: Optional[int] = None

    def __post_init__(self):
        self.positions = np.asarray(self.positions, dtype=float)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.n_replicates < 1:
            raise ValueError("n_replicates must be positive")
        if self.crossed_count > self.n_replicates:
            raise ValueError("more crossed samples than replicates")

    @classmethod
    def from_positions(cls, level, crossed_positions, n_replicates, seed=None):
        pos, cnt = np.unique(np.asarray(crossed_positions, dtype=float), return_counts=True)
        return cls(level, pos, cnt, n_replicates, seed)

    @property
    def crossed_count(self) -> int:
        return int(self.counts.sum())

    @property
    def censored_count(self) -> int:
        return self.n_replicates - self.crossed_count

    @property
    def crossed_mass(self) -> float:
        return self.crossed_count / self.n_replicates

    @property
    def censored_mass(self) -> float:
        return self.censored_count / self.n_replicates

    @property
    def weights(self) -> np.ndarray:
        return self.counts / self.n_replicates

    @property
    def samples(self):
        return list(zip(self.positions.tolist(), self.weights.tolist()))

    def mass(self, lo: float, hi: Optional[float] = None) -> float:
        """Mass of the point ``lo`` (``hi`` omitted) or of ``[lo, hi)``."""
        if hi is None or hi == lo:
            sel = self.positions == lo
        else:
            sel = (self.positions >= lo) & (self.positions < hi)
        return int(self.counts[sel].sum()) / self.n_replicates

    def median(self) -> float:
        if self.crossed_count == 0:
            return math.nan
        cum = np.cumsum(self.counts)
        return float(self.positions[np.searchsorted(cum, (self.crossed_count + 1) // 2)])

    def merge(self, other: "EmpiricalLaw") -> "EmpiricalLaw":
        if other.level != self.level:
            raise ValueError("cannot merge laws at different levels")
        pos = np.concatenate([self.positions, other.positions])
        cnt = np.concatenate([self.counts, other.counts])
        upos, inv = np.unique(pos, return_inverse=True)
        ucnt = np.bincount(inv, weights=cnt, minlength=upos.size).astype(np.int64)
        seed = self.seed if self.seed == other.seed else None
        return EmpiricalLaw(self.level, upos, ucnt, self.n_replicates + other.n_replicates, seed)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(self.header_line() + "\n")
            w = csv.writer(fh)
            w.writerow(["position", "weight"])
            for p, c in zip(self.positions, self.counts):
                w.writerow([repr(float(p)), repr(int(c) / self.n_replicates)])

    def header_line(self) -> str:
        return (
            f"# level={self.level!r},crossed_mass={self.crossed_mass!r},"
            f"censored_mass={self.censored_mass!r},n_replicates={self.n_replicates},seed={self.seed}"
        )

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "crossed_mass": self.crossed_mass,
            "censored_mass": self.censored_mass,
            "n_replicates": self.n_replicates,
            "seed": self.seed,
            "samples": [{"position": p, "weight": w} for p, w in self.samples],
        }


def estimate_law(t: LevyTriplet, level: float, strict: bool, n: int, cfg: SimConfig,
                 tag: tuple = ()) -> EmpiricalLaw:
    crossed, _, pos = passage_sample(t, level, strict, n, cfg, tag)
    return EmpiricalLaw.from_positions(level, pos[crossed], n, cfg.seed)


class Verdict(enum.Enum):
    TRIVIAL = "Trivial"
    NON_TRIVIAL = "NonTrivial"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class TrivialityVerdict:
    verdict: Verdict
    point: Optional[float]
    support_diameter: float
    within_delta_fraction: float
    n_crossed: int
    vacuous: bool = False

    @property
    def decided(self) -> bool:
        return self.verdict is not Verdict.UNDECIDED

    def label(self) -> str:
        if self.verdict is Verdict.TRIVIAL:
            return "Trivial(vacuous)" if self.vacuous else f"Trivial({self.point!r})"
        return self.verdict.value


def triviality_test(law: EmpiricalLaw, delta: float, min_crossed: int = 1) -> TrivialityVerdict:
    """Is the crossed part of ``law`` concentrated at one point, up to ``delta``?

    Fewer than ``min_crossed`` crossed samples count as the zero-mass case,
    which is trivial by convention. ``delta = 0`` asks for exact equality.
    """
    if not delta >= 0:
        raise ValueError("delta must be non-negative")
    n = law.crossed_count
    if n < max(min_crossed, 1):
        return TrivialityVerdict(Verdict.TRIVIAL, None, 0.0, 1.0, n, vacuous=True)
    r = law.median()
    near = np.abs(law.positions - r) <= delta
    frac = float(law.counts[near].sum()) / n
    diam = float(law.positions.max() - law.positions.min())
    if frac == 1.0 and diam <= 2 * delta:
        return TrivialityVerdict(Verdict.TRIVIAL, r, diam, frac, n)
    if frac < 1.0 - 3.0 * math.sqrt(0.25 / n):
        return TrivialityVerdict(Verdict.NON_TRIVIAL, None, diam, frac, n)
    return TrivialityVerdict(Verdict.UNDECIDED, None, diam, frac, n)


# -- convolution identity -----------------------------------------------------


@dataclass
class IdentityReport:
    b: float
    c: float
    n: int
    bins: list
    lhs: list
    rhs: list
    discrepancy: list
    std_error: list
    studentized: list
    lhs_censored_mass: float
    rhs_censored_mass: float

    @property
    def max_studentized(self) -> float:
        return max(self.studentized) if self.studentized else 0.0

    def fraction_within(self, k: float = 3.0) -> float:
        if not self.studentized:
            return 1.0
        return sum(z <= k for z in self.studentized) / len(self.studentized)

    def rows(self):
        for bn, l, r, d, se, z in zip(self.bins, self.lhs, self.rhs, self.discrepancy,
                                      self.std_error, self.studentized):
            yield {"bin_left": bn[0], "bin_right": bn[1], "lhs": l, "rhs": r,
                   "discrepancy": d, "std_error": se, "studentized": z}


def _bin_count(values: np.ndarray, bn) -> int:
    lo, hi = bn
    if lo == hi:
        return int(np.count_nonzero(values == lo))
    return int(np.count_nonzero((values >= lo) & (values < hi)))


def composite_passage_sample(t: LevyTriplet, b: float, c: float, n: int, cfg: SimConfig, tag: tuple = ()):
    """Positions built as ``X(T_c) + X'(T'_{b - X(T_c)})`` with ``X'`` a fresh copy from 0.

    Returns ``(crossed, positions)`` over ``n`` replicates; a replicate is
    censored when either stage is.
    """
    crossed_c, _, x_c = passage_sample(t, c, False, n, cfg, (*tag, 1))
    crossed = np.zeros(n, dtype=bool)
    pos = np.full(n, np.nan)
    idx = np.flatnonzero(crossed_c)
    if idx.size == 0:
        return crossed, pos
    # replicate i restarts on its own stream (seed, *tag, 2, i)
    ok, _, y = passage_sample(t, b - x_c[idx], False, n, cfg, (*tag, 2), indices=idx)
    crossed[idx] = ok
    pos[idx[ok]] = x_c[idx[ok]] + y[ok]
    return crossed, pos


def default_bins(positions, b: float, c: float, h: Optional[float] = None):
    """Uniform bins of width ``h / 4`` on a lattice, else ``(b - c) / 20``, covering the sample."""
    positions = np.unique(np.asarray(positions, dtype=float))
    if positions.size == 0:
        return []
    width = h / 4 if h is not None else (b - c) / 20
    lo = math.floor(positions.min() / width) * width
    hi = positions.max() + width
    edges = np.arange(lo, hi + width, width)
    return [(float(a), float(z)) for a, z in zip(edges[:-1], edges[1:])]


def convolution_check(t: LevyTriplet, b: float, c: float, n: int, cfg: SimConfig,
                      bins=None, tag: tuple = ()) -> IdentityReport:
    """Monte Carlo comparison of ``Q^b`` with the composition of ``Q^c`` and ``Q^{b - x}``."""
    if not 0 < c < b:
        raise ValueError("require 0 < c < b")
    if n < 1:
        raise ValueError("n must be >= 1")
    crossed_l, _, pos_l = passage_sample(t, b, False, n, cfg, (*tag, 0))
    crossed_r, pos_r = composite_passage_sample(t, b, c, n, cfg, tag)
    left = pos_l[crossed_l]
    right = pos_r[crossed_r]
    if bins is None:
        bins = default_bins(np.concatenate([left, right]), b, c)
    lhs, rhs, disc, se, z = [], [], [], [], []
    for bn in bins:
        p1 = _bin_count(left, bn) / n
        p2 = _bin_count(right, bn) / n
        pooled = (p1 + p2) / 2
        s = math.sqrt(pooled * (1 - pooled) * 2 / n)
        d = abs(p1 - p2)
        lhs.append(p1)
        rhs.append(p2)
        disc.append(d)
        se.append(s)
        z.append(d / s if s > 0 else (0.0 if d == 0 else math.inf))
    return IdentityReport(
        b, c, n, list(bins), lhs, rhs, disc, se, z,
        1 - crossed_l.mean(), 1 - crossed_r.mean(),
    )


# -- multi-level consistency --------------------------------------------------


@dataclass
class ConsistencyReport:
    levels: list
    laws: list
    verdicts: list

    @property
    def decided(self):
        return [v for v in self.verdicts if v.decided and not v.vacuous]

    @property
    def homogeneous(self) -> bool:
        kinds = {v.verdict for v in self.decided}
        return len(kinds) <= 1

    @property
    def violation(self) -> bool:
        return not self.homogeneous

    @property
    def any_non_trivial(self) -> bool:
        return any(v.verdict is Verdict.NON_TRIVIAL for v in self.verdicts)


def multi_level_consistency(t: LevyTriplet, levels, n: int, cfg: SimConfig, delta: float,
                            min_crossed: int = 1, strict: bool = False, tag: tuple = ()) -> ConsistencyReport:
    levels = list(levels)
    if len(levels) < 2:
        raise ValueError("need at least two levels")
    laws, verdicts = [], []
    for i, x in enumerate(levels):
        law = estimate_law(t, x, strict, n, cfg, (*tag, i))
        laws.append(law)
        verdicts.append(triviality_test(law, delta, min_crossed))
    return ConsistencyReport(levels, laws, verdicts)
