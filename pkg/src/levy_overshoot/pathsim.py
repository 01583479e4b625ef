"""Path simulation and first-passage outcomes.

Two engines share one randomness contract (a generator per replicate, see
:mod:`levy_overshoot.rng`):

* ``EventDriven`` for finite-activity triplets without a Gaussian part. Paths
  are exact: Poisson arrival times, i.i.d. atom jumps, linear motion between
  jumps. Lattice triplets with zero slope are carried in integer arithmetic.
* ``Grid`` for triplets with a Gaussian part or a stable tail. Finite-activity
  jumps sit at their exact times; the continuous part is sampled on the union
  of the grid and the jump times, with an optional Brownian-bridge test for
  crossings between sampled points.
"""
from __future__ import annotations

import csv
import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from fractions import Fraction
from functools import partial
from typing import Optional, Union

import numpy as np

from .levy_model import (
    Cutoff,
    InvalidTripletError,
    JumpMeasure,
    LevyTriplet,
    lattice_point,
    lattice_span,
    validate_triplet,
)
from .rng import replicate_stream

_MAX_LATTICE_STEP = 2**20


class Engine(enum.Enum):
    EVENT_DRIVEN = "EventDriven"
    GRID = "Grid"


class EngineError(ValueError):
    pass


@dataclass(frozen=True)
class SimConfig:
    seed: int = 0
    horizon: float = 100.0
    dt: float = 1e-2
    bridge_correction: bool = True
    small_jump_eps: Optional[float] = None
    gaussian_substitution: bool = False
    workers: int = 1

    def __post_init__(self):
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.small_jump_eps is not None and not 0 < self.small_jump_eps <= 1:
            raise ValueError("small_jump_eps must lie in (0, 1]")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


KIND_START, KIND_JUMP, KIND_GRID = 0, 1, 2
_KIND_NAMES = {KIND_START: "start", KIND_JUMP: "jump", KIND_GRID: "grid"}


@dataclass
class PathSkeleton:
    """Trajectory as ordered ``(time, value, kind)`` records.

    ``left_limits`` holds ``X(t-)`` at each record (equal to ``value`` except at
    jumps). Between event-driven records the path moves with ``slope``.
    ``lattice`` is ``(h, indices)`` when values are exact multiples of ``h``.
    """

    times: np.ndarray
    values: np.ndarray
    kinds: np.ndarray
    left_limits: np.ndarray
    engine: Engine
    horizon: float
    slope: float = 0.0
    lattice: Optional[tuple] = None

    @property
    def records(self):
        return [
            (float(t), float(v), _KIND_NAMES[int(k)])
            for t, v, k in zip(self.times, self.values, self.kinds)
        ]

    @property
    def n_jumps(self) -> int:
        return int(np.count_nonzero(self.kinds == KIND_JUMP))

    def terminal_value(self) -> float:
        """``X`` at the horizon."""
        last = float(self.values[-1])
        if self.engine is Engine.EVENT_DRIVEN:
            return last + self.slope * (self.horizon - float(self.times[-1]))
        return last

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "value", "kind"])
            for t, v, k in self.records:
                w.writerow([repr(t), repr(v), k])


@dataclass(frozen=True)
class Crossed:
    time: float
    position: float
    overshoot: float


@dataclass(frozen=True)
class Censored:
    horizon: float


@dataclass(frozen=True)
class PassageOutcome:
    level: float
    strict: bool
    result: Union[Crossed, Censored]

    @property
    def crossed(self) -> bool:
        return isinstance(self.result, Crossed)


# -- jump-measure bookkeeping -------------------------------------------------


def decompose_jumps(t: LevyTriplet, a: float):
    """Split off the positive jumps larger than ``a``.

    Returns ``(small_part, big_part, beta)`` where ``big_part`` is the jump
    measure of the compound Poisson process of jumps exceeding ``a`` and
    ``beta`` its total rate, so the first such jump arrives at an
    ``Exp(beta)`` time independently of ``small_part``.
    """
    if not a > 0:
        raise ValueError("split level must be positive")
    jm = t.jumps
    big_atoms = tuple((s, r) for s, r in jm.atoms if s > a)
    small_atoms = tuple((s, r) for s, r in jm.atoms if not s > a)
    big_tail = small_tail = None
    tail = jm.tail
    if tail is not None:
        lo, hi = tail.plus_window
        if tail.c_plus > 0 and hi > max(lo, a):
            big_tail = replace(tail, c_minus=0.0, plus_window=(max(lo, a), hi))
        small_tail = replace(tail, plus_window=(lo, min(hi, a)))
    big = JumpMeasure(big_atoms, big_tail)
    beta = float(big.total_finite_rate) + (big_tail.mass(+1) if big_tail is not None else 0.0)
    drift = t.drift
    if t.cutoff is Cutoff.UNIT_BALL and a < 1:
        # jumps in (a, 1] were compensated in the full process but not in the big part
        drift = drift - sum((s * r for s, r in big_atoms if s <= 1), 0)
        if big_tail is not None:
            drift = drift - big_tail.first_moment(+1, 0.0, 1.0)
    small = LevyTriplet(t.sigma2, JumpMeasure(small_atoms, small_tail), drift, t.cutoff)
    return small, big, beta


@dataclass
class _Plan:
    engine: Engine
    slope: float
    sigma: float
    rate: float
    cum_probs: np.ndarray
    atom_sizes: np.ndarray
    tail_pieces: list
    steps: Optional[np.ndarray] = None
    h: Optional[Fraction] = None
    tail: object = None


def _compile(t: LevyTriplet, cfg: SimConfig, engine: Optional[Engine] = None) -> _Plan:
    report = validate_triplet(t)
    if not report.ok:
        raise InvalidTripletError(report.violations)
    jm = t.jumps
    natural = Engine.EVENT_DRIVEN if (t.sigma2 == 0 and jm.tail is None) else Engine.GRID
    engine = engine or natural
    if engine is Engine.EVENT_DRIVEN:
        if t.sigma2 != 0 or jm.tail is not None:
            raise EngineError("event-driven engine needs sigma2 = 0 and finite activity")
        if not jm.total_finite_rate > 0:
            raise EngineError("not compound Poisson: the jump measure has zero mass")
    else:
        if t.sigma2 == 0 and jm.tail is None:
            raise EngineError("grid engine needs a Gaussian part or a tail family")
        if jm.tail is not None and not jm.tail.is_finite() and cfg.small_jump_eps is None:
            raise EngineError("small_jump_eps is required with an infinite-activity tail")

    sizes = [float(s) for s in jm.sizes]
    rates = [float(r) for _, r in jm.atoms]
    pieces = []
    sigma2 = float(t.sigma2)
    slope_adj = 0.0
    tail = jm.tail
    if tail is not None:
        eps = cfg.small_jump_eps if cfg.small_jump_eps is not None else 0.0
        for side in (+1, -1):
            m = tail.mass(side, eps, math.inf)
            if m > 0:
                pieces.append((side, eps, math.inf))
                rates.append(m)
            if eps > 0 and cfg.gaussian_substitution:
                sigma2 += tail.second_moment(side, 0.0, eps)
        if t.cutoff is Cutoff.UNIT_BALL and eps < 1:
            # compensator of the simulated jumps with magnitude in (eps, 1]
            slope_adj = tail.first_moment(+1, eps, 1.0) - tail.first_moment(-1, eps, 1.0)
    if t.cutoff is Cutoff.UNIT_BALL:
        slope = float(t.drift) - sum(s * r for s, r in zip(sizes, rates) if abs(s) <= 1) - slope_adj
    else:
        slope = float(t.drift)
    rate = float(sum(rates))
    cum = np.cumsum(rates) / rate if rate > 0 else np.zeros(0)
    if cum.size:
        cum[-1] = 1.0
    plan = _Plan(engine, slope, math.sqrt(sigma2), rate, cum, np.array(sizes), pieces, tail=tail)
    if engine is Engine.EVENT_DRIVEN and t.zero_cutoff_drift() == 0:
        plan.slope = 0.0
        h = lattice_span(jm.sizes)
        ks = [Fraction(s) / h for s in jm.sizes]
        if h > 0 and max(abs(k) for k in ks) <= _MAX_LATTICE_STEP:
            plan.h = h
            plan.steps = np.array([int(k) for k in ks], dtype=np.int64)
    return plan


def _arrivals(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    if rate <= 0:
        return np.zeros(0)
    mean = rate * horizon
    m = int(mean + 6.0 * math.sqrt(mean) + 16)
    t = np.cumsum(rng.exponential(1.0 / rate, m))
    while t[-1] <= horizon:
        more = t[-1] + np.cumsum(rng.exponential(1.0 / rate, m))
        t = np.concatenate([t, more])
    return t[: np.searchsorted(t, horizon, side="right")]


def _draw_components(plan: _Plan, rng: np.random.Generator, n: int) -> np.ndarray:
    return np.searchsorted(plan.cum_probs, rng.random(n), side="right")


def _jump_sizes(plan: _Plan, rng: np.random.Generator, comp: np.ndarray) -> np.ndarray:
    na = plan.atom_sizes.size
    out = np.empty(comp.size)
    is_atom = comp < na
    out[is_atom] = plan.atom_sizes[comp[is_atom]]
    for j, (side, lo, hi) in enumerate(plan.tail_pieces):
        sel = comp == na + j
        k = int(np.count_nonzero(sel))
        if k:
            out[sel] = side * plan.tail.sample(rng, side, lo, hi, k)
    return out


# -- event-driven engine ------------------------------------------------------


def _raw_event(plan: _Plan, rng: np.random.Generator, horizon: float):
    times = _arrivals(rng, plan.rate, horizon)
    comp = _draw_components(plan, rng, times.size)
    if plan.steps is not None:
        return times, np.cumsum(plan.steps[comp]), None
    jumps = _jump_sizes(plan, rng, comp)
    if plan.tail_pieces:
        jump_part = np.cumsum(jumps)
    else:
        # per-atom counts, so equal jump multisets give bit-equal positions
        counts = np.cumsum(np.eye(plan.atom_sizes.size, dtype=np.int64)[comp], axis=0)
        jump_part = counts @ plan.atom_sizes if comp.size else np.zeros(0)
    post = plan.slope * times + jump_part
    return times, post, jumps


def _lattice_values(idx: np.ndarray, h: Fraction) -> np.ndarray:
    if h.denominator == 1:
        return idx.astype(float) * float(h)
    return np.array([lattice_point(int(k), h) for k in idx], dtype=float)


def simulate_event_driven(t: LevyTriplet, cfg: SimConfig, rng: np.random.Generator) -> PathSkeleton:
    plan = _compile(t, cfg, Engine.EVENT_DRIVEN)
    times, post, jumps = _raw_event(plan, rng, cfg.horizon)
    lattice = None
    if plan.steps is not None:
        idx = np.concatenate([[0], post]).astype(np.int64)
        values = _lattice_values(idx, plan.h)
        left = np.concatenate([[0.0], values[:-1]])
        lattice = (plan.h, idx)
    else:
        values = np.concatenate([[0.0], post])
        left = np.concatenate([[0.0], post - jumps])
    kinds = np.full(values.size, KIND_JUMP, dtype=np.int8)
    kinds[0] = KIND_START
    return PathSkeleton(
        np.concatenate([[0.0], times]), values, kinds, left,
        Engine.EVENT_DRIVEN, cfg.horizon, plan.slope, lattice,
    )


def _event_passage(plan: _Plan, rng, level: float, strict: bool, horizon: float):
    times, post, jumps = _raw_event(plan, rng, horizon)
    if plan.steps is not None:
        q = Fraction(level) / plan.h
        k = math.floor(q) + 1 if strict else math.ceil(q)
        hit = np.flatnonzero(post >= k)
        if hit.size:
            i = hit[0]
            return float(times[i]), lattice_point(int(post[i]), plan.h)
        return None
    slope = plan.slope
    n = times.size
    jump_at = n
    if n:
        hit = np.flatnonzero(post > level) if strict else np.flatnonzero(post >= level)
        if hit.size:
            jump_at = hit[0]
    if slope > 0:
        # segment k runs from the value after jump k-1 to the left limit of jump k
        seg_t0 = np.concatenate([[0.0], times])
        seg_v0 = np.concatenate([[0.0], post])
        seg_v1 = np.concatenate([post - jumps, [seg_v0[-1] + slope * (horizon - seg_t0[-1])]])
        if strict:
            cont = (seg_v0 <= level) & (seg_v1 > level)
        else:
            cont = (seg_v0 < level) & (seg_v1 >= level)
        c = np.flatnonzero(cont)
        if c.size and c[0] <= jump_at:
            k = c[0]
            return float(seg_t0[k] + (level - seg_v0[k]) / slope), float(level)
    if jump_at < n:
        return float(times[jump_at]), float(post[jump_at])
    return None


# -- grid engine --------------------------------------------------------------


def _raw_grid(plan: _Plan, rng: np.random.Generator, cfg: SimConfig):
    n_grid = max(1, math.ceil(cfg.horizon / cfg.dt - 1e-9))
    grid = cfg.dt * np.arange(1, n_grid + 1)
    grid[-1] = cfg.horizon
    jt = _arrivals(rng, plan.rate, cfg.horizon)
    comp = _draw_components(plan, rng, jt.size)
    js = _jump_sizes(plan, rng, comp)
    times = np.concatenate([grid, jt])
    kinds = np.concatenate([np.full(n_grid, KIND_GRID, np.int8), np.full(jt.size, KIND_JUMP, np.int8)])
    jumps = np.concatenate([np.zeros(n_grid), js])
    order = np.argsort(times, kind="stable")
    times, kinds, jumps = times[order], kinds[order], jumps[order]
    dts = np.diff(times, prepend=0.0)
    z = rng.standard_normal(times.size)
    cont = plan.slope * dts + plan.sigma * np.sqrt(dts) * z
    post = np.cumsum(cont + jumps)
    left = post - jumps
    u = rng.random(times.size) if (cfg.bridge_correction and plan.sigma > 0) else None
    return times, kinds, post, left, dts, u


def simulate_grid(t: LevyTriplet, cfg: SimConfig, rng: np.random.Generator) -> PathSkeleton:
    plan = _compile(t, cfg, Engine.GRID)
    times, kinds, post, left, _, _ = _raw_grid(plan, rng, cfg)
    keep = times > 0
    return PathSkeleton(
        np.concatenate([[0.0], times[keep]]),
        np.concatenate([[0.0], post[keep]]),
        np.concatenate([[KIND_START], kinds[keep]]).astype(np.int8),
        np.concatenate([[0.0], left[keep]]),
        Engine.GRID, cfg.horizon, plan.slope,
    )


def _grid_passage(plan: _Plan, rng, level: float, strict: bool, cfg: SimConfig):
    times, kinds, post, left, dts, u = _raw_grid(plan, rng, cfg)
    start = np.concatenate([[0.0], post[:-1]])
    cont = left >= level
    if u is not None:
        g0 = np.maximum(level - start, 0.0)
        g1 = np.maximum(level - left, 0.0)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.exp(-2.0 * g0 * g1 / (plan.sigma**2 * dts))
        cont |= (dts > 0) & (u < p)
    jump = (kinds == KIND_JUMP) & ((post > level) if strict else (post >= level))
    c = np.flatnonzero(cont)
    j = np.flatnonzero(jump)
    ci = c[0] if c.size else times.size
    ji = j[0] if j.size else times.size
    if ci < times.size and ci <= ji:
        if plan.sigma == 0:
            # linear piece: exact crossing time
            t0 = times[ci] - dts[ci]
            return float(t0 + (level - start[ci]) / (left[ci] - start[ci]) * dts[ci]), float(level)
        if cfg.bridge_correction:
            return float(times[ci]), float(level)
        return float(times[ci]), float(left[ci])
    if ji < times.size:
        return float(times[ji]), float(post[ji])
    return None


# -- passage ------------------------------------------------------------------


def _passage(plan: _Plan, cfg: SimConfig, level: float, strict: bool, rng):
    if level < 0 or (level == 0 and not strict):
        return 0.0, 0.0
    if plan.engine is Engine.EVENT_DRIVEN:
        return _event_passage(plan, rng, level, strict, cfg.horizon)
    return _grid_passage(plan, rng, level, strict, cfg)


def _outcome(level, strict, horizon, hit) -> PassageOutcome:
    if hit is None:
        return PassageOutcome(level, strict, Censored(horizon))
    time, pos = hit
    return PassageOutcome(level, strict, Crossed(time, pos, pos - level))


def run_to_passage(t: LevyTriplet, level: float, strict: bool, cfg: SimConfig,
                   rng: np.random.Generator) -> PassageOutcome:
    """First passage above ``level`` (``>=`` or, with ``strict``, ``>``), censored at the horizon."""
    plan = _compile(t, cfg)
    return _outcome(level, strict, cfg.horizon, _passage(plan, cfg, level, strict, rng))


def _passage_chunk(t, strict, cfg, tag, levels, indices):
    plan = _compile(t, cfg)
    m = len(indices)
    crossed = np.zeros(m, dtype=bool)
    times = np.full(m, np.nan)
    pos = np.full(m, np.nan)
    for j, (i, level) in enumerate(zip(indices, levels)):
        hit = _passage(plan, cfg, float(level), strict, replicate_stream(cfg.seed, int(i), tag))
        if hit is not None:
            crossed[j] = True
            times[j], pos[j] = hit
    return crossed, times, pos


def _chunks(m: int, k: int):
    """Split ``range(m)`` into at most ``k`` contiguous ``(start, stop)`` pieces."""
    edges = np.linspace(0, m, min(k, m) + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def passage_sample(t: LevyTriplet, level, strict: bool, n: int, cfg: SimConfig, tag: tuple = (),
                   indices=None):
    """Replicates of :func:`run_to_passage` as arrays ``(crossed, times, positions)``.

    Replicate ``i`` uses stream ``(cfg.seed, *tag, i)``, so results do not
    depend on ``cfg.workers``. ``indices`` selects a subset of ``0..n-1`` and
    ``level`` may be an array with one level per selected replicate.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    _compile(t, cfg)  # fail fast on engine preconditions
    indices = np.arange(n) if indices is None else np.asarray(indices, dtype=np.int64)
    levels = np.broadcast_to(np.asarray(level, dtype=float), indices.shape)
    fn = partial(_passage_chunk, t, strict, cfg, tuple(tag))
    m = indices.size
    if cfg.workers == 1 or m < 2 * cfg.workers:
        return fn(levels, indices)
    bounds = _chunks(m, cfg.workers * 4)
    with ProcessPoolExecutor(cfg.workers) as ex:
        parts = list(ex.map(fn, [levels[a:b] for a, b in bounds], [indices[a:b] for a, b in bounds]))
    return tuple(np.concatenate(x) for x in zip(*parts))


def simulate(t: LevyTriplet, cfg: SimConfig, rng: np.random.Generator) -> PathSkeleton:
    """Skeleton from whichever engine the triplet calls for."""
    if t.sigma2 == 0 and t.jumps.tail is None:
        return simulate_event_driven(t, cfg, rng)
    return simulate_grid(t, cfg, rng)


def supremum_jump_diagnostic(p: PathSkeleton) -> float:
    """Largest upward jump of the running supremum along the skeleton."""
    v, left = p.values, p.left_limits
    if v.size < 2:
        return 0.0
    prior = np.maximum(np.maximum.accumulate(v)[:-1], np.maximum.accumulate(left)[1:])
    gain = np.where(p.kinds[1:] == KIND_JUMP, v[1:] - prior, 0.0)
    return float(max(0.0, gain.max()))
