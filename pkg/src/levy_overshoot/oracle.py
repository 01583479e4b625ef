"""Exact first-passage laws for compound Poisson chains on a lattice ``h * Z``.

Time plays no role in where the chain first lands at or above a level, so the
law is an absorption problem for the embedded jump chain. States below the
floor ``-L`` are absorbed as *lost*; the lost mass is reported together with
a certified bound on how much crossing mass the floor can hide.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np
from scipy import optimize, sparse, stats
from scipy.sparse.linalg import spsolve

from .levy_model import LevyTriplet, lattice_ceil, lattice_point, lattice_span

EXACT_STATE_LIMIT = 2000
DEFAULT_TARGET = 1e-9
MAX_FLOOR = 2**16


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeChainSpec:
    """Jump chain on ``h * Z``: ``steps`` are integer multiples of ``h``."""

    h: Fraction
    steps: tuple
    rates: tuple
    truncation_floor: Optional[int] = None

    def __post_init__(self):
        if not self.h > 0:
            raise OracleError("h must be positive")
        if len(self.steps) != len(self.rates) or not self.steps:
            raise OracleError("need one rate per step")
        if any(not isinstance(k, int) or k == 0 for k in self.steps):
            raise OracleError("steps must be non-zero integers")
        if any(not r > 0 for r in self.rates):
            raise OracleError("rates must be positive")
        if self.truncation_floor is not None and self.truncation_floor < 1:
            raise OracleError("truncation_floor must be >= 1")

    @classmethod
    def from_atoms(cls, atoms, h=None, truncation_floor=None):
        atoms = list(atoms)
        if h is None:
            h = lattice_span([s for s, _ in atoms])
        h = Fraction(h)
        steps = []
        for s, _ in atoms:
            q = Fraction(s) / h
            if q.denominator != 1:
                raise OracleError(f"atom {s} is not on the lattice {h}Z")
            steps.append(int(q))
        return cls(h, tuple(steps), tuple(r for _, r in atoms), truncation_floor)

    @classmethod
    def from_triplet(cls, t: LevyTriplet, truncation_floor=None):
        if not t.is_compound_poisson():
            raise OracleError("oracle needs a compound Poisson triplet")
        return cls.from_atoms(t.jumps.atoms, truncation_floor=truncation_floor)

    @property
    def exact(self) -> bool:
        return all(isinstance(r, (int, Fraction)) for r in self.rates)

    @property
    def total_rate(self):
        return sum(self.rates, 0)

    def probabilities(self):
        tot = self.total_rate
        if self.exact:
            return [Fraction(r) / tot for r in self.rates]
        return [float(r) / float(tot) for r in self.rates]

    @property
    def has_down_steps(self) -> bool:
        return any(k < 0 for k in self.steps)

    def lundberg_exponent(self) -> float:
        """Positive root of ``sum_j p_j exp(theta k_j) = 1``; 0 if there is none.

        With a root, ``P(the chain ever rises by m lattice steps) <= exp(-theta m)``.
        """
        p = np.array([float(x) for x in self.probabilities()])
        k = np.array(self.steps, dtype=float)
        if p @ k >= 0 or not (k > 0).any():
            return math.inf if not (k > 0).any() else 0.0
        def f(th):
            with np.errstate(over="ignore"):
                return float(p @ np.exp(th * k)) - 1.0

        hi = 1.0
        while f(hi) <= 0:
            hi *= 2
        return optimize.brentq(f, 1e-12, hi, xtol=1e-14)


@dataclass
class ExactLaw:
    """Sub-probability law of the first position at or above ``level``.

    ``lost_mass_bound`` is the floor-absorption probability; ``error_bound``
    bounds the crossing mass the floor can hide (every mass is a lower bound
    and ``total + error_bound`` an upper bound on the passage probability).
    """

    level: float
    h: Fraction
    masses: dict
    lost_mass_bound: float
    error_bound: float
    floor: Optional[int]
    exact: bool
    residual: float = 0.0
    indices: dict = field(default_factory=dict)

    @property
    def total(self):
        return sum(self.masses.values(), 0)

    def mass_at(self, position: float):
        return self.masses.get(position, 0)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(f"# lost_mass_bound={float(self.lost_mass_bound)!r},error_bound={self.error_bound!r}\n")
            w = csv.writer(fh)
            w.writerow(["position", "mass"])
            for x in sorted(self.masses):
                w.writerow([repr(x), str(self.masses[x])])


def _visits_exact(n_states, offset, steps, probs):
    """Expected visits ``y`` with ``y (I - P) = e_start``; banded Gauss elimination in rationals.

    States are ``0..n_states-1``; the start state is ``offset``.
    """
    # Build A = (I - P)^T row-wise: A[j][i] = delta_ij - P[i, j]
    rows = [dict() for _ in range(n_states)]
    for i in range(n_states):
        rows[i][i] = rows[i].get(i, 0) + 1
        for k, p in zip(steps, probs):
            j = i + k
            if 0 <= j < n_states:
                rows[j][i] = rows[j].get(i, 0) - p
    b = [Fraction(0)] * n_states
    b[offset] = Fraction(1)
    # forward elimination without pivoting (M-matrix, diagonally dominant columns)
    for c in range(n_states):
        piv = rows[c][c]
        rc = rows[c]
        for r in range(c + 1, min(n_states, c + 1 + max(abs(k) for k in steps))):
            f = rows[r].get(c)
            if not f:
                continue
            f = f / piv
            rr = rows[r]
            for col, val in rc.items():
                if col >= c:
                    rr[col] = rr.get(col, 0) - f * val
            del rr[c]
            b[r] -= f * b[c]
    y = [Fraction(0)] * n_states
    for r in range(n_states - 1, -1, -1):
        acc = b[r]
        for col, val in rows[r].items():
            if col > r:
                acc -= val * y[col]
        y[r] = acc / rows[r][r]
    return y


def _visits_float(n_states, offset, steps, probs):
    ii, jj, vv = [], [], []
    for k, p in zip(steps, probs):
        src = np.arange(n_states)
        dst = src + k
        ok = (dst >= 0) & (dst < n_states)
        ii.append(src[ok])
        jj.append(dst[ok])
        vv.append(np.full(ok.sum(), float(p)))
    P = sparse.csr_matrix(
        (np.concatenate(vv), (np.concatenate(ii), np.concatenate(jj))), shape=(n_states, n_states)
    )
    A = (sparse.identity(n_states, format="csr") - P).T.tocsc()
    b = np.zeros(n_states)
    b[offset] = 1.0
    y = spsolve(A, b)
    resid = float(np.abs(A @ y - b).max())
    return y, resid


def _solve(spec: LatticeChainSpec, K: int, floor: int):
    """Absorption masses for threshold index ``K`` with floor ``-floor``."""
    steps = spec.steps
    probs = spec.probabilities()
    lo = -floor if spec.has_down_steps else 0
    n_states = K - lo
    offset = -lo
    exact = spec.exact and n_states <= EXACT_STATE_LIMIT
    if exact:
        y = _visits_exact(n_states, offset, steps, probs)
        resid = 0.0
        zero = Fraction(0)
    else:
        probs = [float(p) for p in probs]
        y, resid = _visits_float(n_states, offset, steps, probs)
        zero = 0.0
    masses = {}
    lost = zero
    for s in range(n_states):
        ys = y[s]
        if not ys:
            continue
        state = s + lo
        for k, p in zip(steps, probs):
            j = state + k
            if j >= K:
                masses[j] = masses.get(j, zero) + ys * p
            elif j < lo:
                lost = lost + ys * p
    return masses, lost, exact, resid


def exact_passage_law(spec: LatticeChainSpec, level: float, target: float = DEFAULT_TARGET) -> ExactLaw:
    """Law of the first position ``>= level`` on ``{T_level < inf}``.

    Without an explicit ``truncation_floor`` the floor is doubled until the
    certified error bound drops below ``target``.
    """
    if not level > 0:
        raise OracleError("level must be positive")
    K = lattice_ceil(level, spec.h)
    theta = spec.lundberg_exponent()

    def run(floor):
        masses, lost, exact, resid = _solve(spec, K, floor)
        if not spec.has_down_steps:
            bound = 0.0
        elif theta > 0:
            bound = float(lost) * math.exp(-theta * (K + floor + 1))
        else:
            bound = float(lost)
        return masses, lost, exact, resid, bound

    if spec.truncation_floor is not None or not spec.has_down_steps:
        floor = spec.truncation_floor or 1
        res = run(floor)
    else:
        floor = 8
        while True:
            res = run(floor)
            if res[4] < target:
                break
            if floor >= MAX_FLOOR:
                raise OracleError(f"floor {floor} leaves error bound {res[4]:.3g} above target {target:g}")
            floor *= 2
    masses, lost, exact, resid, bound = res
    return ExactLaw(
        level=float(level),
        h=spec.h,
        masses={lattice_point(k, spec.h): m for k, m in sorted(masses.items())},
        lost_mass_bound=lost,
        error_bound=bound,
        floor=floor if spec.has_down_steps else None,
        exact=exact,
        residual=resid,
        indices={k: m for k, m in sorted(masses.items())},
    )


def exact_passage_probability(spec: LatticeChainSpec, level: float, target: float = DEFAULT_TARGET):
    """``(P(T_level < inf), error_bound)``; the true value lies in ``[p, p + bound]``."""
    if level <= 0:
        return 1, 0.0
    law = exact_passage_law(spec, level, target)
    return law.total, law.error_bound


def _law_or_origin(spec, level, target):
    if level <= 0:
        return {0.0: 1}, 0.0
    law = exact_passage_law(spec, level, target)
    return law.masses, law.error_bound


def exact_identity_sides(spec: LatticeChainSpec, b: float, c: float, bins, target: float = DEFAULT_TARGET):
    """Both sides of the first-passage convolution identity, bin by bin.

    Left: ``Q^b(A)``. Right: ``sum_x Q^c({x}) Q^{b-x}(A - x)``. ``bins`` is a
    list of ``(left, right)`` pairs, a point bin when ``left == right``, else
    the half-open interval ``[left, right)``.
    """
    if not 0 < c < b:
        raise OracleError("require 0 < c < b")
    lhs_law, _ = _law_or_origin(spec, b, target)
    mid, _ = _law_or_origin(spec, c, target)
    rhs_points = {}
    for x, w in mid.items():
        sub, _ = _law_or_origin(spec, b - x, target)
        for y, v in sub.items():
            rhs_points[x + y] = rhs_points.get(x + y, 0) + w * v
    lhs = [_bin_mass(lhs_law, bn) for bn in bins]
    rhs = [_bin_mass(rhs_points, bn) for bn in bins]
    return lhs, rhs


def _bin_mass(points: dict, bn):
    lo, hi = bn
    if lo == hi:
        return sum((m for x, m in points.items() if x == lo), 0)
    return sum((m for x, m in points.items() if lo <= x < hi), 0)


def passage_step_tail(spec: LatticeChainSpec, level: float, n_steps: int, floor: int):
    """Crossing probability within the first ``n_steps`` jumps (floor-truncated, float)."""
    K = lattice_ceil(level, spec.h)
    lo = -floor if spec.has_down_steps else 0
    n = K - lo
    dist = np.zeros(n)
    dist[-lo] = 1.0
    probs = [float(p) for p in spec.probabilities()]
    crossed = 0.0
    out = np.empty(n_steps + 1)
    out[0] = 0.0
    for step in range(1, n_steps + 1):
        new = np.zeros(n)
        for k, p in zip(spec.steps, probs):
            if k > 0:
                crossed += p * dist[n - k:].sum() if k <= n else p * dist.sum()
                if k < n:
                    new[k:] += p * dist[: n - k]
            elif -k < n:
                new[: n + k] += p * dist[-k:]
        dist = new
        out[step] = crossed
    return out


def horizon_censoring_bound(spec: LatticeChainSpec, level: float, horizon: float,
                            target: float = DEFAULT_TARGET) -> float:
    """Upper bound on ``P(horizon < T_level < inf)`` for the continuous-time chain.

    Crossing at jump ``J`` after the horizon needs either ``J > N`` or fewer
    than ``N`` arrivals by the horizon; the bound is minimised over ``N``.
    """
    law = exact_passage_law(spec, level, target)
    total = float(law.total) + law.error_bound
    rate = float(spec.total_rate)
    mean = rate * horizon
    n_max = int(mean + 10 * math.sqrt(mean) + 50)
    within = passage_step_tail(spec, level, n_max, law.floor or 1)
    N = np.arange(n_max + 1)
    after = np.maximum(total - within, 0.0)
    few = stats.poisson.cdf(N - 1, mean)
    return float(np.min(after + few))
