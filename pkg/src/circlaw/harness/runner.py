"""Run an experiment configuration and persist its results.

Layout of a results directory::

    manifest.json     config hash, version, seeds, file inventory with sha256
    config.ini        canonical config text
    timings.json      wall-clock per task (not digested, varies run to run)
    *.csv / *.json    result tables

Every statistic depends only on the config: tasks are split into trials,
each trial draws from streams derived from ``(seed, trial, row)``, and the
per-trial outputs are assembled in trial order whatever the completion
order.  Floats are written with ``repr`` (shortest round-trip form).
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import __version__
from ..assumptions import (check_a1, check_a2_order1, check_a2_order_k, check_a3, check_replacement_cond1,
                           sigma_min_experiment)
from ..ensembles import EnsembleSpec, sample_matrix
from ..moments import (GammaTree, class_table, empirical_trace_moments, moment_polynomial, xi_n_estimate)
from ..norms import distinguished_subspace, estimate_norm_d_delta, estimate_norm_fixed_W
from ..spectra import circular_law_distance, eigenvalues, esd_distance, mp_ks, singular_values
from .config import ExperimentConfig, dump_config

__all__ = ["WORKERS_ENV", "EXIT_OK", "EXIT_FAILED", "EXIT_CONFIG", "EXIT_BUDGET", "BudgetExceeded",
           "RunResult", "run", "format_value", "write_csv", "sha256_file", "check_budget"]

logger = logging.getLogger(__name__)

WORKERS_ENV = "CIRCLAW_WORKERS"
EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class BudgetExceeded(RuntimeError):
    """The configuration asks for more than its resource budget allows."""


@dataclass
class RunResult:
    directory: Path
    exit_code: int
    failures: list = field(default_factory=list)
    assertion_results: list = field(default_factory=list)


# -- serialisation ----------------------------------------------------------

def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (complex, np.complexfloating)):
        return repr(complex(v)).strip("()")
    return str(v)


def write_csv(path: Path, header, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([format_value(r[h]) if isinstance(r, dict) else format_value(x)
                    for h, x in zip(header, r if not isinstance(r, dict) else header)])
    path.write_text(buf.getvalue(), encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(type(o))


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


# -- budgets and workers ----------------------------------------------------

def check_budget(cfg: ExperimentConfig) -> None:
    b = cfg.budget
    if max(cfg.n) > b["max_n"]:
        raise BudgetExceeded(f"n = {max(cfg.n)} exceeds max_n = {b['max_n']}")
    if cfg.trials > b["max_trials"]:
        raise BudgetExceeded(f"trials = {cfg.trials} exceeds max_trials = {b['max_trials']}")
    if cfg.kind == "moments" and cfg.k > b["max_k"]:
        raise BudgetExceeded(f"k = {cfg.k} exceeds max_k = {b['max_k']}")
    if cfg.kind == "xi" and cfg.k > 6:
        raise BudgetExceeded(f"tree with {cfg.k} edges exceeds the 6-edge limit")


def _workers() -> int:
    raw = os.environ.get(WORKERS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger.warning("ignoring non-integer %s=%r", WORKERS_ENV, raw)
        return 1


def _map_trials(fn, args: list) -> list:
    """Apply ``fn`` to each argument tuple; results come back in input order."""
    w = _workers()
    if w == 1 or len(args) < 2:
        return [fn(*a) for a in args]
    with ProcessPoolExecutor(max_workers=w) as ex:
        return list(ex.map(fn, *zip(*args)))


# -- per-trial kernels (module level so worker processes can import them) ---

def _circular_trial(spec: EnsembleSpec, n: int, trial: int):
    A = sample_matrix(spec, n, n, trial=trial).entries
    s = eigenvalues(A / math.sqrt(n))
    return s.eigenvalues, s.residual, circular_law_distance(s.eigenvalues)


def _mp_trial(spec: EnsembleSpec, n: int, N: int, trial: int):
    A = sample_matrix(spec, n, N, trial=trial).entries
    ev = np.sort(singular_values(A / math.sqrt(N)) ** 2)
    return ev, mp_ks(ev, n / N)


def _gram_trial(spec: EnsembleSpec, n: int, z: complex, trial: int):
    A = sample_matrix(spec, n, n, trial=trial).entries
    return np.sort(singular_values(A / math.sqrt(n) - z * np.eye(n), method="svd") ** 2)


# -- experiments ------------------------------------------------------------

def _exp_circular(cfg, out: Path, rec):
    stats, spectra = [], []
    for name, spec in cfg.ensembles:
        for n in cfg.n:
            res = _map_trials(_circular_trial, [(spec, n, t) for t in range(cfg.trials)])
            for t, (eig, resid, d) in enumerate(res):
                stats.append({"ensemble": name, "n": n, "trial": t, "radial_ks": d["radial_ks"],
                              "angular_ks": d["angular_ks"], "residual": resid})
                order = np.lexsort((eig.imag, eig.real))
                spectra += [{"ensemble": name, "n": n, "trial": t, "re": v.real, "im": v.imag} for v in eig[order]]
    write_csv(out / "stats.csv", ["ensemble", "n", "trial", "radial_ks", "angular_ks", "residual"], stats)
    write_csv(out / "spectra.csv", ["ensemble", "n", "trial", "re", "im"], spectra)
    rec("radial_ks_max", max(s["radial_ks"] for s in stats))
    rec("angular_ks_max", max(s["angular_ks"] for s in stats))


def _exp_mp(cfg, out: Path, rec):
    stats, spectra = [], []
    for name, spec in cfg.ensembles:
        for n in cfg.n:
            N = int(round(n / cfg.y))
            res = _map_trials(_mp_trial, [(spec, n, N, t) for t in range(cfg.trials)])
            for t, (ev, ks) in enumerate(res):
                stats.append({"ensemble": name, "n": n, "N": N, "trial": t, "mp_ks": ks})
                spectra += [{"ensemble": name, "n": n, "trial": t, "eigenvalue": v} for v in ev]
    write_csv(out / "stats.csv", ["ensemble", "n", "N", "trial", "mp_ks"], stats)
    write_csv(out / "spectra.csv", ["ensemble", "n", "trial", "eigenvalue"], spectra)
    rec("mp_ks_max", max(s["mp_ks"] for s in stats))


def _exp_universality(cfg, out: Path, rec):
    (ref_name, ref), others = cfg.ensembles[0], cfg.ensembles[1:]
    rows = []
    for n in cfg.n:
        for z in cfg.z:
            base = _map_trials(_gram_trial, [(ref, n, z, t) for t in range(cfg.trials)])
            for name, spec in others:
                cmp_ = _map_trials(_gram_trial, [(spec, n, z, t) for t in range(cfg.trials)])
                for t, (a, b) in enumerate(zip(base, cmp_)):
                    rows.append({"reference": ref_name, "ensemble": name, "n": n, "z_re": z.real, "z_im": z.imag,
                                 "trial": t, "esd_distance": esd_distance(a, b)})
    write_csv(out / "stats.csv", ["reference", "ensemble", "n", "z_re", "z_im", "trial", "esd_distance"], rows)
    rec("esd_distance_max", max(r["esd_distance"] for r in rows))


def _exp_norms(cfg, out: Path, rec):
    rows = []
    trials_W = max(1, min(cfg.trials, 50))
    for name, spec in cfg.ensembles:
        for n in cfg.n:
            for delta in cfg.delta:
                if spec.kind in ("radial_example", "slab"):
                    est = estimate_norm_fixed_W(spec, distinguished_subspace(n, cfg.d), cfg.d, delta, 200 * cfg.trials)
                else:
                    est = estimate_norm_d_delta(spec, n, cfg.d, delta, trials_W, 2000)
                row = est.as_row(spec.kind, n)
                row["ensemble"] = name
                rows.append(row)
    header = ["ensemble", "kind", "n", "d", "delta", "mode", "value", "se", "trials_X", "trials_W"]
    write_csv(out / "norms.csv", header, rows)
    rec("norm_value_max", max(r["value"] for r in rows))


def _exp_sigma_min(cfg, out: Path, rec):
    summary, tails = [], []
    for name, spec in cfg.ensembles:
        for row in sigma_min_experiment(spec, cfg.n, cfg.trials):
            summary.append({"ensemble": name, **{k: row[k] for k in ("n", "trials", "sigma_min_min",
                            "sigma_min_median", "threshold", "violations", "bound_holds")}})
            for t in row["tail"]:
                tails.append({"ensemble": name, "n": row["n"], **t})
    write_csv(out / "sigma_min.csv", ["ensemble", "n", "trials", "sigma_min_min", "sigma_min_median", "threshold",
                                      "violations", "bound_holds"], summary)
    write_csv(out / "sigma_min_tail.csv", ["ensemble", "n", "delta", "p_emp", "p_se", "bound", "bound_se",
                                           "resolved", "below"], tails)
    rec("sigma_min_violations_max", max(s["violations"] for s in summary))


def _exp_moments(cfg, out: Path, rec):
    ks = list(range(1, cfg.k + 1))
    polys = [moment_polynomial(k) for k in ks]
    _write_json(out / "moment_polynomials.json", [p.to_json() for p in polys])
    table = [row for k in ks for row in class_table(k)]
    write_csv(out / "class_table.csv", ["k", "S", "UP", "count"], table)
    rows = []
    for name, spec in cfg.ensembles:
        for n in cfg.n:
            for z in cfg.z:
                emp = empirical_trace_moments(spec, n, ks, z, cfg.trials)
                for p in polys:
                    a = p.at_z(z)
                    m, se = emp[p.k]
                    rows.append({"ensemble": name, "n": n, "k": p.k, "z_re": z.real, "z_im": z.imag,
                                 "analytic": a, "empirical": m, "se": se, "rel_err": abs(m - a) / a})
    write_csv(out / "moments.csv", ["ensemble", "n", "k", "z_re", "z_im", "analytic", "empirical", "se", "rel_err"],
              rows)
    if rows:
        rec("moment_rel_err_max", max(r["rel_err"] for r in rows))


def _path_tree(edges: int) -> GammaTree:
    # ordinary path rooted at one end: even depths in U, odd depths in D
    return GammaTree(edges + 1, tuple((v, v + 1) if v % 2 == 0 else (v + 1, v) for v in range(edges)))


def _exp_xi(cfg, out: Path, rec):
    tree = _path_tree(cfg.k)
    rows = []
    for name, spec in cfg.ensembles:
        for n in cfg.n:
            r = xi_n_estimate(tree, spec, n, cfg.trials)
            rows.append({"ensemble": name, "n": n, "edges": cfg.k, "mean": r["mean"], "se": r["se"],
                         "abs_err": abs(r["mean"] - 1.0)})
    write_csv(out / "xi.csv", ["ensemble", "n", "edges", "mean", "se", "abs_err"], rows)
    rec("xi_abs_err_max", rows[-1]["abs_err"] if rows else 0.0)


def _exp_assumptions(cfg, out: Path, rec):
    rows, verdicts = [], {}
    for name, spec in cfg.ensembles:
        reports = [check_a1(spec, 4, cfg.n, cfg.trials), check_a2_order1(spec, cfg.n),
                   check_a2_order_k(spec, min(cfg.n), 2, max(2, cfg.trials)), check_a3(spec, cfg.n, cfg.eps, cfg.trials)]
        for rep in reports:
            for r in rep.rows():
                rows.append({"ensemble": name, **r})
            verdicts[f"{name}:{rep.assumption}"] = rep.verdict
        f = check_replacement_cond1(spec, max(cfg.n), cfg.trials)
        rows.append({"ensemble": name, "assumption": "frobenius", "kind": spec.kind, "n": max(cfg.n),
                     "statistic": f["mean"], "se": 0.0, "verdict": "report-only"})
    write_csv(out / "assumptions.csv", ["ensemble", "assumption", "kind", "n", "statistic", "se", "verdict"], rows)
    _write_json(out / "verdicts.json", verdicts)


_EXPERIMENTS = {
    "circular-law": _exp_circular,
    "mp-law": _exp_mp,
    "universality": _exp_universality,
    "norms": _exp_norms,
    "sigma-min": _exp_sigma_min,
    "moments": _exp_moments,
    "xi": _exp_xi,
    "assumptions": _exp_assumptions,
}


def _config_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def run(cfg: ExperimentConfig, output=None) -> RunResult:
    """Run ``cfg`` into ``output`` (or ``cfg.output``) and return the outcome.

    Raises :class:`BudgetExceeded` before any work if the budget is breached.
    A failing experiment is recorded in the manifest instead of raised.
    """
    check_budget(cfg)
    out = Path(output or cfg.output or "results")
    out.mkdir(parents=True, exist_ok=True)
    text = dump_config(cfg)
    (out / "config.ini").write_text(text, encoding="utf-8")

    measured: dict = {}

    def rec(key, value):
        measured[key] = float(value)

    failures = []
    t0 = time.perf_counter()
    try:
        _EXPERIMENTS[cfg.kind](cfg, out, rec)
    except Exception as exc:  # recorded, not raised: sibling outputs stay on disk
        logger.exception("experiment %s failed", cfg.kind)
        failures.append({"task": cfg.kind, "error": f"{type(exc).__name__}: {exc}"})
    elapsed = time.perf_counter() - t0

    checks = []
    for key, limit in cfg.assertions:
        got = measured.get(key)
        checks.append({"assertion": key, "limit": limit, "value": got, "passed": got is not None and got <= limit})

    inventory = {}
    for p in sorted(out.iterdir()):
        if p.is_file() and p.name not in ("manifest.json", "timings.json"):
            inventory[p.name] = sha256_file(p)
    manifest = {
        "config_hash": _config_hash(text),
        "version": __version__,
        "experiment": cfg.kind,
        "seeds": {name: {"master": spec.seed, "derivation": "SeedSequence(seed, spawn_key=(crc32(key), trial, row))"}
                  for name, spec in cfg.ensembles},
        "files": inventory,
        "failures": failures,
        "assertions": checks,
        "measured": measured,
    }
    _write_json(out / "manifest.json", manifest)
    _write_json(out / "timings.json", {cfg.kind: elapsed})
    ok = not failures and all(c["passed"] for c in checks)
    return RunResult(out, EXIT_OK if ok else EXIT_FAILED, failures, checks)
