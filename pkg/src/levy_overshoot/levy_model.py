"""Lévy triplets, jump measures and the overshoot classifier.

Atom sizes and rates may be given as :class:`fractions.Fraction` (exact) or
``float``. Exactness is preserved wherever a decision depends on it, most
importantly in :func:`lattice_fit`.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Optional, Union

Number = Union[Fraction, float, int]


class InvalidTripletError(ValueError):
    """Raised when an operation needs a valid triplet and gets a broken one."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class Cutoff(enum.Enum):
    ZERO = "zero"
    UNIT_BALL = "unit_ball"


@dataclass(frozen=True)
class StableTail:
    """Stable-like Lévy density ``c_plus x^(-1-alpha)`` on x > 0 and
    ``c_minus |x|^(-1-alpha)`` on x < 0.

    Each side may be restricted to a window ``(lo, hi]`` of jump magnitudes;
    a side with ``lo == 0`` and positive weight has infinite activity.
    """

    alpha: float
    c_plus: float = 1.0
    c_minus: float = 0.0
    plus_window: tuple = (0.0, math.inf)
    minus_window: tuple = (0.0, math.inf)

    kind = "stable"

    @property
    def activity_index(self) -> float:
        return self.alpha

    def _side(self, side: int):
        if side > 0:
            return self.c_plus, self.plus_window
        return self.c_minus, self.minus_window

    def mass(self, side: int, lo: float = 0.0, hi: float = math.inf) -> float:
        """Jump rate of magnitudes in ``(lo, hi]`` on one side (+1 or -1)."""
        c, (wlo, whi) = self._side(side)
        lo, hi = max(lo, wlo), min(hi, whi)
        if c == 0 or hi <= lo:
            return 0.0
        if lo == 0:
            return math.inf
        a = self.alpha
        return c * (lo ** -a - (0.0 if math.isinf(hi) else hi ** -a)) / a

    def second_moment(self, side: int, lo: float = 0.0, hi: float = math.inf) -> float:
        c, (wlo, whi) = self._side(side)
        lo, hi = max(lo, wlo), min(hi, whi)
        if c == 0 or hi <= lo:
            return 0.0
        if math.isinf(hi):
            return math.inf
        a = self.alpha
        return c * (hi ** (2 - a) - lo ** (2 - a)) / (2 - a)

    def first_moment(self, side: int, lo: float = 0.0, hi: float = math.inf) -> float:
        """Integral of |x| over magnitudes in ``(lo, hi]`` on one side."""
        c, (wlo, whi) = self._side(side)
        lo, hi = max(lo, wlo), min(hi, whi)
        if c == 0 or hi <= lo:
            return 0.0
        a = self.alpha
        if math.isinf(hi):
            return math.inf if a <= 1 else c * lo ** (1 - a) / (a - 1)
        if lo == 0:
            return math.inf if a >= 1 else c * hi ** (1 - a) / (1 - a)
        if a == 1:
            return c * math.log(hi / lo)
        return c * (hi ** (1 - a) - lo ** (1 - a)) / (1 - a)

    def sample(self, rng, side: int, lo: float, hi: float, size: int):
        """Draw magnitudes from the normalised density on ``(lo, hi]``."""
        _, (wlo, whi) = self._side(side)
        lo, hi = max(lo, wlo), min(hi, whi)
        a = self.alpha
        u = rng.random(size)
        top = 0.0 if math.isinf(hi) else hi ** -a
        return (lo ** -a - u * (lo ** -a - top)) ** (-1.0 / a)

    def has_positive_mass(self) -> bool:
        lo, hi = self.plus_window
        return self.c_plus > 0 and hi > lo

    def has_negative_mass(self) -> bool:
        lo, hi = self.minus_window
        return self.c_minus > 0 and hi > lo

    def is_finite(self) -> bool:
        return self.mass(+1) < math.inf and self.mass(-1) < math.inf

    def problems(self) -> list:
        out = []
        if not 0 < self.alpha < 2:
            out.append("stable alpha outside (0, 2)")
        if self.c_plus < 0 or self.c_minus < 0:
            out.append("stable weight negative")
        for name, (lo, hi) in (("plus", self.plus_window), ("minus", self.minus_window)):
            if not 0 <= lo <= hi:
                out.append(f"stable {name}_window malformed")
        return out


@dataclass(frozen=True)
class JumpMeasure:
    atoms: tuple = ()
    tail: Optional[StableTail] = None

    def __post_init__(self):
        object.__setattr__(self, "atoms", tuple((s, r) for s, r in self.atoms))

    @property
    def sizes(self) -> list:
        return [s for s, _ in self.atoms]

    @property
    def total_finite_rate(self) -> Number:
        return sum((r for _, r in self.atoms), 0)

    def positive_atoms(self) -> list:
        return [(s, r) for s, r in self.atoms if s > 0]

    def is_finite(self) -> bool:
        return self.tail is None or self.tail.is_finite()

    def total_mass(self) -> float:
        m = float(self.total_finite_rate)
        if self.tail is not None:
            m += self.tail.mass(+1) + self.tail.mass(-1)
        return m

    def positive_mass(self) -> float:
        m = float(sum((r for s, r in self.atoms if s > 0), 0))
        if self.tail is not None:
            m += self.tail.mass(+1)
        return m

    def problems(self) -> list:
        out = []
        sizes = self.sizes
        if any(s == 0 for s in sizes):
            out.append("atom size zero")
        if len(set(sizes)) != len(sizes):
            out.append("atom sizes not distinct")
        if any(not r > 0 for _, r in self.atoms):
            out.append("atom rate not positive")
        if any(isinstance(v, float) and not math.isfinite(v) for a in self.atoms for v in a):
            out.append("atom not finite")
        if self.tail is not None:
            out.extend(self.tail.problems())
        return out


@dataclass(frozen=True)
class LevyTriplet:
    """Generating data ``(sigma2, jumps, drift)`` under a declared cutoff.

    ``drift`` is always relative to ``cutoff`` and never converted in place;
    :meth:`zero_cutoff_drift` gives the linear slope of the compound Poisson
    representation when it exists.
    """

    sigma2: Number = 0
    jumps: JumpMeasure = field(default_factory=JumpMeasure)
    drift: Number = 0
    cutoff: Cutoff = Cutoff.ZERO

    def zero_cutoff_drift(self) -> Number:
        if self.cutoff is Cutoff.ZERO:
            return self.drift
        if not self.jumps.is_finite():
            raise ValueError("no zero-cutoff drift under infinite activity")
        comp = sum((s * r for s, r in self.jumps.atoms if abs(s) <= 1), 0)
        out = self.drift - comp
        t = self.jumps.tail
        if t is not None:
            out -= t.first_moment(+1, 0.0, 1.0) - t.first_moment(-1, 0.0, 1.0)
        return out

    def is_compound_poisson(self) -> bool:
        return (
            self.sigma2 == 0
            and self.jumps.tail is None
            and 0 < self.jumps.total_finite_rate
            and self.zero_cutoff_drift() == 0
        )

    def scaled(self, s: Number) -> "LevyTriplet":
        """Image of the process under ``x -> s x`` for ``s > 0``."""
        if not s > 0:
            raise ValueError("scale must be positive")
        atoms = tuple((a * s, r) for a, r in self.jumps.atoms)
        tail = self.jumps.tail
        if tail is not None:
            a = tail.alpha
            tail = replace(
                tail,
                c_plus=tail.c_plus * float(s) ** a,
                c_minus=tail.c_minus * float(s) ** a,
                plus_window=tuple(w * float(s) for w in tail.plus_window),
                minus_window=tuple(w * float(s) for w in tail.minus_window),
            )
        drift = self.drift * s
        if self.cutoff is Cutoff.UNIT_BALL and s != 1:
            # the unit ball is not scale invariant: move compensation across |x| = 1/s
            drift += sum((a * s * r for a, r in self.jumps.atoms if abs(a * s) <= 1), 0)
            drift -= sum((a * s * r for a, r in self.jumps.atoms if abs(a) <= 1), 0)
            t = self.jumps.tail
            if t is not None:
                lo, hi = sorted((1.0, 1.0 / float(s)))
                sign = 1 if float(s) < 1 else -1
                drift += sign * float(s) * (t.first_moment(+1, lo, hi) - t.first_moment(-1, lo, hi))
        return LevyTriplet(self.sigma2 * s * s, JumpMeasure(atoms, tail), drift, self.cutoff)


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok


def validate_triplet(t: LevyTriplet) -> ValidationReport:
    v = []
    if t.sigma2 < 0:
        v.append("sigma2 negative")
    if not isinstance(t.cutoff, Cutoff):
        v.append("unknown cutoff")
    v.extend(t.jumps.problems())
    if t.cutoff is Cutoff.ZERO and t.jumps.tail is not None:
        v.append("Zero cutoff with infinite activity")
    return ValidationReport(v)


class Variant(enum.Enum):
    SPECTRALLY_NEGATIVE = "SpectrallyNegative"
    UPWARDS_SKIP_FREE = "UpwardsSkipFree"
    NON_DETERMINISTIC = "NonDeterministicOvershoots"


@dataclass(frozen=True)
class ProcessClass:
    variant: Variant
    rationale: str
    h: Optional[Number] = None

    def __str__(self):
        if self.variant is Variant.UPWARDS_SKIP_FREE:
            return f"UpwardsSkipFree(h={self.h})"
        return self.variant.value

    @property
    def deterministic_overshoot(self) -> bool:
        return self.variant is not Variant.NON_DETERMINISTIC


def _multiple_of(s: Number, h: Number, tol: float) -> bool:
    if tol == 0:
        q = Fraction(s) / Fraction(h)
        return q.denominator == 1
    k = round(float(s) / float(h))
    return abs(float(s) - k * float(h)) <= tol


def lattice_fit(atoms, tol: float = 0.0):
    """Return the lattice span ``h`` of an upward skip-free atom set, else None.

    ``h`` is the unique positive atom size and every other size must lie in
    ``h * Z`` (exactly when ``tol == 0``).
    """
    atoms = list(atoms)
    if not atoms:
        raise ValueError("empty atom list")
    if tol < 0:
        raise ValueError("tol must be non-negative")
    positive = [s for s, _ in atoms if s > 0]
    if len(positive) != 1:
        return None
    h = positive[0]
    if all(_multiple_of(s, h, tol) for s, _ in atoms):
        return h
    return None


def lattice_span(sizes):
    """Rational gcd of exact sizes (floats are taken at their binary value)."""
    fr = [Fraction(s) for s in sizes]
    num = 0
    den = 1
    for f in fr:
        den = den * f.denominator // math.gcd(den, f.denominator)
    for f in fr:
        num = math.gcd(num, abs(f.numerator * (den // f.denominator)))
    return Fraction(num, den)


def classify(t: LevyTriplet, tol: float = 0.0) -> ProcessClass:
    report = validate_triplet(t)
    if not report.ok:
        raise InvalidTripletError(report.violations)
    jm = t.jumps
    has_positive = bool(jm.positive_atoms()) or (jm.tail is not None and jm.tail.has_positive_mass())
    if not has_positive:
        return ProcessClass(Variant.SPECTRALLY_NEGATIVE, "no_positive_jumps")
    if t.sigma2 > 0:
        return ProcessClass(Variant.NON_DETERMINISTIC, "diffusion_present")
    if jm.tail is not None:
        reason = "positive_tail_mass" if jm.tail.is_finite() else "infinite_activity"
        return ProcessClass(Variant.NON_DETERMINISTIC, reason)
    if t.zero_cutoff_drift() != 0:
        return ProcessClass(Variant.NON_DETERMINISTIC, "nonzero_drift")
    if len(jm.positive_atoms()) > 1:
        return ProcessClass(Variant.NON_DETERMINISTIC, "multiple_positive_atoms")
    h = lattice_fit(jm.atoms, tol)
    if h is None:
        return ProcessClass(Variant.NON_DETERMINISTIC, "off_lattice_atom")
    return ProcessClass(Variant.UPWARDS_SKIP_FREE, "upwards_skip_free", h)


def lattice_ceil(x: Number, h: Number) -> int:
    """Smallest integer k with ``k * h >= x``, in exact arithmetic."""
    return math.ceil(Fraction(x) / Fraction(h))


def lattice_point(k: int, h: Number) -> float:
    """Float value of ``k * h``; the single place lattice indices become reals."""
    return float(k * Fraction(h))


def predicted_passage_position(c: ProcessClass, x: Number) -> Optional[float]:
    if x <= 0:
        return 0.0
    if c.variant is Variant.SPECTRALLY_NEGATIVE:
        return float(x)
    if c.variant is Variant.UPWARDS_SKIP_FREE:
        return lattice_point(lattice_ceil(x, c.h), c.h)
    return None
