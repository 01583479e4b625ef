"""JSON experiment configuration.

Numbers may be JSON numbers or strings; strings are parsed exactly, so
``"1/3"`` and ``"0.3"`` become :class:`fractions.Fraction` values.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Optional

from .levy_model import Cutoff, JumpMeasure, LevyTriplet, StableTail, validate_triplet
from .pathsim import SimConfig

EXPERIMENTS = ("classify", "qx", "identity", "consistency", "zoo")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid config:\n  " + "\n  ".join(self.problems))


@dataclass
class ExperimentConfig:
    experiment: str
    triplet: Optional[LevyTriplet] = None
    levels: list = field(default_factory=list)
    strict: bool = False
    n: int = 10_000
    sim: SimConfig = field(default_factory=SimConfig)
    output: str = "out"
    format: str = "csv"
    b: Optional[float] = None
    c: Optional[float] = None
    delta: Optional[float] = None
    min_crossed: int = 1
    bins: Optional[list] = None
    raw: dict = field(default_factory=dict, repr=False)


def parse_number(value, where: str, problems: list):
    if isinstance(value, bool) or value is None:
        problems.append(f"{where}: expected a number, got {value!r}")
        return None
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            problems.append(f"{where}: not finite")
            return None
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            problems.append(f"{where}: cannot parse {value!r} as a decimal or p/q")
            return None
    problems.append(f"{where}: expected a number, got {type(value).__name__}")
    return None


def parse_triplet(obj, problems: list, where: str = "triplet") -> Optional[LevyTriplet]:
    if not isinstance(obj, dict):
        problems.append(f"{where}: expected an object")
        return None
    known = {"sigma2", "drift", "cutoff", "atoms", "tail"}
    for k in obj:
        if k not in known:
            problems.append(f"{where}.{k}: unknown field")
    before = len(problems)
    sigma2 = parse_number(obj.get("sigma2", 0), f"{where}.sigma2", problems)
    drift = parse_number(obj.get("drift", 0), f"{where}.drift", problems)
    cutoff_name = obj.get("cutoff", "zero")
    try:
        cutoff = Cutoff(cutoff_name)
    except ValueError:
        problems.append(f"{where}.cutoff: expected 'zero' or 'unit_ball', got {cutoff_name!r}")
        cutoff = None
    atoms = []
    raw_atoms = obj.get("atoms", [])
    if not isinstance(raw_atoms, list):
        problems.append(f"{where}.atoms: expected a list of [size, rate] pairs")
        raw_atoms = []
    for i, pair in enumerate(raw_atoms):
        if not (isinstance(pair, list) and len(pair) == 2):
            problems.append(f"{where}.atoms[{i}]: expected [size, rate]")
            continue
        s = parse_number(pair[0], f"{where}.atoms[{i}][0]", problems)
        r = parse_number(pair[1], f"{where}.atoms[{i}][1]", problems)
        atoms.append((s, r))
    tail = None
    if obj.get("tail") is not None:
        tobj = obj["tail"]
        if not isinstance(tobj, dict) or tobj.get("kind") != "stable":
            problems.append(f"{where}.tail: only {{'kind': 'stable', ...}} is supported")
        else:
            vals = {}
            for key, default in (("alpha", None), ("c_plus", 1.0), ("c_minus", 0.0)):
                raw = tobj.get(key, default)
                if raw is None:
                    problems.append(f"{where}.tail.{key}: required")
                    continue
                v = parse_number(raw, f"{where}.tail.{key}", problems)
                if v is not None:
                    vals[key] = float(v)
            if len(vals) == 3:
                tail = StableTail(vals["alpha"], vals["c_plus"], vals["c_minus"])
    if len(problems) > before or cutoff is None:
        return None
    t = LevyTriplet(sigma2, JumpMeasure(tuple(atoms), tail), drift, cutoff)
    problems.extend(f"{where}: {v}" for v in validate_triplet(t).violations)
    return t


def _sim(obj, problems, seed_override=None) -> SimConfig:
    obj = obj or {}
    if not isinstance(obj, dict):
        problems.append("sim: expected an object")
        obj = {}
    kw = {}
    for key in ("horizon", "dt", "small_jump_eps"):
        if obj.get(key) is not None:
            v = parse_number(obj[key], f"sim.{key}", problems)
            if v is not None:
                kw[key] = float(v)
    for key in ("bridge_correction", "gaussian_substitution"):
        if key in obj:
            if not isinstance(obj[key], bool):
                problems.append(f"sim.{key}: expected true/false")
            else:
                kw[key] = obj[key]
    for key in ("seed", "workers"):
        if key in obj:
            if isinstance(obj[key], bool) or not isinstance(obj[key], int):
                problems.append(f"sim.{key}: expected an integer")
            else:
                kw[key] = obj[key]
    if seed_override is not None:
        kw["seed"] = seed_override
    try:
        return SimConfig(**kw)
    except ValueError as e:
        problems.append(f"sim: {e}")
        return SimConfig()


def config_from_dict(obj: dict, seed=None, output=None, fmt=None, experiment=None) -> ExperimentConfig:
    problems: list = []
    if not isinstance(obj, dict):
        raise ConfigError(["top level: expected a JSON object"])
    exp = experiment or obj.get("experiment")
    if exp not in EXPERIMENTS:
        problems.append(f"experiment: expected one of {', '.join(EXPERIMENTS)}, got {exp!r}")
    triplet = None
    if "triplet" in obj:
        triplet = parse_triplet(obj["triplet"], problems)
    elif exp not in ("zoo", None):
        problems.append("triplet: required")
    levels = []
    raw_levels = obj.get("levels", [])
    if not isinstance(raw_levels, list):
        problems.append("levels: expected a list")
        raw_levels = []
    for i, x in enumerate(raw_levels):
        v = parse_number(x, f"levels[{i}]", problems)
        if v is not None:
            levels.append(float(v))
    n = obj.get("n", 10_000)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        problems.append("n: expected a positive integer")
        n = 1
    strict = obj.get("strict", False)
    if not isinstance(strict, bool):
        problems.append("strict: expected true/false")
    sim = _sim(obj.get("sim"), problems, seed)
    fmt = fmt or obj.get("format", "csv")
    if fmt not in FORMATS:
        problems.append(f"format: expected csv or json, got {fmt!r}")
    b = c = delta = None
    if obj.get("b") is not None:
        b = parse_number(obj["b"], "b", problems)
    if obj.get("c") is not None:
        c = parse_number(obj["c"], "c", problems)
    if obj.get("delta") is not None:
        delta = parse_number(obj["delta"], "delta", problems)
        if delta is not None and delta < 0:
            problems.append("delta: must be non-negative")
    min_crossed = obj.get("min_crossed", 1)
    if isinstance(min_crossed, bool) or not isinstance(min_crossed, int) or min_crossed < 0:
        problems.append("min_crossed: expected a non-negative integer")
    bins = obj.get("bins")
    if bins is not None:
        ok = isinstance(bins, list) and all(isinstance(x, list) and len(x) == 2 for x in bins)
        if not ok:
            problems.append("bins: expected a list of [left, right] pairs")
        else:
            parsed = []
            for i, (lo, hi) in enumerate(bins):
                lo = parse_number(lo, f"bins[{i}][0]", problems)
                hi = parse_number(hi, f"bins[{i}][1]", problems)
                if lo is not None and hi is not None:
                    if hi < lo:
                        problems.append(f"bins[{i}]: right < left")
                    parsed.append((float(lo), float(hi)))
            bins = parsed

    if exp == "identity":
        if b is None or c is None:
            problems.append("identity: b and c are required")
        elif not 0 < c < b:
            problems.append("identity: require 0<c<b")
    if exp == "qx" and not levels:
        problems.append("qx: at least one level is required")
    if exp == "consistency":
        if len(levels) < 2:
            problems.append("consistency: at least two levels are required")
        if any(x <= 0 for x in levels):
            problems.append("consistency: levels must be positive")
    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(
        experiment=exp, triplet=triplet, levels=levels, strict=strict, n=n, sim=sim,
        output=output or obj.get("output", "out"), format=fmt,
        b=None if b is None else float(b), c=None if c is None else float(c),
        delta=None if delta is None else float(delta), min_crossed=min_crossed,
        bins=bins, raw=obj,
    )


def load_config(path, **overrides) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError([f"{path}:{e.lineno}:{e.colno}: {e.msg}"]) from None
    return config_from_dict(obj, **overrides)


def triplet_to_dict(t: LevyTriplet) -> dict:
    def num(v):
        if isinstance(v, Fraction):
            return str(v)
        return v

    out = {
        "sigma2": num(t.sigma2),
        "drift": num(t.drift),
        "cutoff": t.cutoff.value,
        "atoms": [[num(s), num(r)] for s, r in t.jumps.atoms],
    }
    if t.jumps.tail is not None:
        tl = t.jumps.tail
        out["tail"] = {"kind": "stable", "alpha": tl.alpha, "c_plus": tl.c_plus, "c_minus": tl.c_minus}
    return out
