"""Experiment dispatch and report bundles.

A bundle is a directory of result files that depends only on the config and
the seed. Wall time is written next to it in ``timing.json``, which is not
part of the bundle, so bundles can be compared byte for byte.
"""
from __future__ import annotations

import csv
import io
import json
import math
import platform
import time
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ExperimentConfig, triplet_to_dict
from .levy_model import classify, predicted_passage_position
from .oracle import LatticeChainSpec, OracleError, exact_identity_sides, exact_passage_law
from .overshoot_measures import (
    EmpiricalLaw,
    convolution_check,
    estimate_law,
    multi_level_consistency,
    triviality_test,
)
from .zoo import CATALOG, default_delta, run_zoo

EXIT_OK, EXIT_INVALID, EXIT_VIOLATION = 0, 1, 2


@dataclass
class ReportBundle:
    experiment: str
    meta: dict
    tables: dict = field(default_factory=dict)
    files: dict = field(default_factory=dict)
    summary: list = field(default_factory=list)
    violation: bool = False
    wall_time: float = 0.0

    @property
    def exit_code(self) -> int:
        return EXIT_VIOLATION if self.violation else EXIT_OK


def _plain(v):
    if isinstance(v, Fraction):
        return str(v)
    if isinstance(v, (np.floating,)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    if isinstance(v, dict):
        return {str(k): _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def _meta(cfg: ExperimentConfig) -> dict:
    return {
        "experiment": cfg.experiment,
        "seed": cfg.sim.seed,
        "n": cfg.n,
        "versions": {
            "levy_overshoot": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "triplet": triplet_to_dict(cfg.triplet) if cfg.triplet is not None else None,
        "sim": {
            "horizon": cfg.sim.horizon, "dt": cfg.sim.dt,
            "bridge_correction": cfg.sim.bridge_correction,
            "small_jump_eps": cfg.sim.small_jump_eps,
            "gaussian_substitution": cfg.sim.gaussian_substitution,
        },
    }


def histogram_rows(law: EmpiricalLaw, bins=None):
    """``(bin_left, bin_right, mass)`` rows; point bins when ``left == right``."""
    if law.crossed_count == 0:
        return []
    if bins is None:
        lo, hi = float(law.positions.min()), float(law.positions.max())
        if lo == hi:
            bins = [(lo - 0.5, hi + 0.5)]
        else:
            edges = np.linspace(lo, hi, 21)
            bins = list(zip(edges[:-1], edges[1:]))
            bins[-1] = (bins[-1][0], np.nextafter(hi, np.inf))
    return [(float(a), float(b), law.mass(a, b)) for a, b in bins]


def emit_histogram_data(law: EmpiricalLaw, bins, path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        fh.write(law.header_line() + "\n")
        w = csv.writer(fh)
        w.writerow(["bin_left", "bin_right", "mass"])
        for row in histogram_rows(law, bins):
            w.writerow([repr(x) for x in row])
    return path


def _lattice_spec(t):
    if t is None or not t.is_compound_poisson():
        return None
    try:
        return LatticeChainSpec.from_triplet(t)
    except OracleError:
        return None


def _run_classify(cfg: ExperimentConfig, bundle: ReportBundle):
    pc = classify(cfg.triplet)
    rows = [{"level": x, "predicted_position": predicted_passage_position(pc, x)} for x in cfg.levels]
    bundle.tables["classification"] = [{"class": str(pc), "variant": pc.variant.value,
                                        "h": pc.h, "rationale": pc.rationale}]
    bundle.tables["predictions"] = rows
    bundle.summary.append(f"class: {pc} ({pc.rationale})")


def _run_qx(cfg: ExperimentConfig, bundle: ReportBundle):
    t = cfg.triplet
    pc = classify(t)
    delta = cfg.delta if cfg.delta is not None else default_delta(t, cfg.sim)
    spec = _lattice_spec(t)
    verdicts = []
    for i, x in enumerate(cfg.levels):
        law = estimate_law(t, x, cfg.strict, cfg.n, cfg.sim, (i,))
        v = triviality_test(law, delta, cfg.min_crossed)
        row = {
            "level": x, "crossed_mass": law.crossed_mass, "censored_mass": law.censored_mass,
            "verdict": v.label(), "support_diameter": v.support_diameter,
            "within_delta_fraction": v.within_delta_fraction,
            "predicted_position": predicted_passage_position(pc, x), "delta": delta,
        }
        if spec is not None and x > 0 and not cfg.strict:
            ex = exact_passage_law(spec, x)
            row["exact_passage_probability"] = float(ex.total)
            row["exact_error_bound"] = ex.error_bound
        verdicts.append(row)
        bundle.files[f"law_{i}"] = law
        bundle.tables[f"histogram_{i}"] = [
            {"bin_left": a, "bin_right": b, "mass": m} for a, b, m in histogram_rows(law)
        ]
        bundle.summary.append(f"level {x!r}: {v.label()} crossed={law.crossed_mass:.6g}")
    bundle.tables["verdicts"] = verdicts
    bundle.summary.insert(0, f"class: {pc}")


def _run_identity(cfg: ExperimentConfig, bundle: ReportBundle):
    t = cfg.triplet
    spec = _lattice_spec(t)
    bins = cfg.bins
    exact = None
    if bins is None and spec is not None:
        law_b = exact_passage_law(spec, cfg.b)
        bins = [(x, x) for x in law_b.masses]
    if spec is not None and bins is not None:
        exact = exact_identity_sides(spec, cfg.b, cfg.c, bins)
    rep = convolution_check(t, cfg.b, cfg.c, cfg.n, cfg.sim, bins)
    rows = list(rep.rows())
    if exact is not None:
        for row, l, r in zip(rows, *exact):
            row["exact_lhs"] = float(l)
            row["exact_rhs"] = float(r)
    bundle.tables["identity"] = rows
    bundle.tables["identity_summary"] = [{
        "b": cfg.b, "c": cfg.c, "n": cfg.n, "max_studentized": rep.max_studentized,
        "fraction_within_3se": rep.fraction_within(3.0),
        "lhs_censored_mass": rep.lhs_censored_mass, "rhs_censored_mass": rep.rhs_censored_mass,
        "exact_max_gap": None if exact is None else max(
            (abs(float(l - r)) for l, r in zip(*exact)), default=0.0),
    }]
    bundle.summary.append(f"identity b={cfg.b!r} c={cfg.c!r}: max studentized {rep.max_studentized:.4g}")


def _run_consistency(cfg: ExperimentConfig, bundle: ReportBundle):
    t = cfg.triplet
    delta = cfg.delta if cfg.delta is not None else default_delta(t, cfg.sim)
    rep = multi_level_consistency(t, cfg.levels, cfg.n, cfg.sim, delta, cfg.min_crossed, cfg.strict)
    bundle.tables["consistency"] = [
        {"level": x, "verdict": v.label(), "crossed_mass": law.crossed_mass,
         "within_delta_fraction": v.within_delta_fraction}
        for x, v, law in zip(rep.levels, rep.verdicts, rep.laws)
    ]
    bundle.violation = rep.violation
    bundle.summary.append(f"homogeneous: {rep.homogeneous}")


def _run_zoo(cfg: ExperimentConfig, bundle: ReportBundle):
    names = cfg.raw.get("entries")
    entries = CATALOG if not names else tuple(e for e in CATALOG if e.name in names)
    n_diag = cfg.raw.get("n_diag")
    rows = run_zoo(cfg.n, cfg.sim, entries, n_diag)
    bundle.tables["zoo"] = [r.as_dict() for r in rows]
    bundle.violation = not all(r.homogeneous and r.theorem_consistent for r in rows)
    for r in rows:
        bundle.summary.append(
            f"{r.name:32s} {r.process_class:28s} {' '.join(r.verdicts)} "
            f"homogeneous={r.homogeneous} consistent={r.theorem_consistent}"
        )


_DISPATCH = {
    "classify": _run_classify,
    "qx": _run_qx,
    "identity": _run_identity,
    "consistency": _run_consistency,
    "zoo": _run_zoo,
}


def run_experiment(cfg: ExperimentConfig) -> ReportBundle:
    t0 = time.perf_counter()
    bundle = ReportBundle(cfg.experiment, _meta(cfg))
    _DISPATCH[cfg.experiment](cfg, bundle)
    bundle.meta["violation"] = bundle.violation
    bundle.wall_time = time.perf_counter() - t0
    return bundle


def _csv_text(rows) -> str:
    buf = io.StringIO()
    if rows:
        keys = list(rows[0].keys())
        for r in rows[1:]:
            keys += [k for k in r if k not in keys]
        w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: json.dumps(_plain(r.get(k))) if isinstance(r.get(k), (list, dict))
                        else _fmt(r.get(k)) for k in keys})
    return buf.getvalue()


def _fmt(v):
    v = _plain(v)
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_bundle(bundle: ReportBundle, out_dir, fmt: str = "csv") -> list:
    """Write the bundle; returns the written paths (``timing.json`` excluded)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        doc = {"meta": bundle.meta, "tables": bundle.tables,
               "laws": {k: law.to_dict() for k, law in bundle.files.items()}}
        p = out / "report.json"
        p.write_text(json.dumps(_plain(doc), indent=2, sort_keys=True) + "\n")
        written.append(p)
    else:
        p = out / "meta.json"
        p.write_text(json.dumps(_plain(bundle.meta), indent=2, sort_keys=True) + "\n")
        written.append(p)
        for name, rows in bundle.tables.items():
            p = out / f"{name}.csv"
            p.write_text(_csv_text(rows))
            written.append(p)
        for name, law in bundle.files.items():
            p = out / f"{name}.csv"
            law.to_csv(p)
            written.append(p)
    p = out / "summary.txt"
    p.write_text("\n".join([f"experiment: {bundle.experiment}", f"seed: {bundle.meta['seed']}",
                            f"version: {bundle.meta['versions']['levy_overshoot']}"]
                           + bundle.summary) + "\n")
    written.append(p)
    (out / "timing.json").write_text(json.dumps({"wall_time_seconds": bundle.wall_time}) + "\n")
    return written
