"""Integrity-checked summaries and plot data for a results directory.

Plot files carry exactly three columns ``x, y, series``; plotting itself is
left to the reader's tool of choice.
"""
from __future__ import annotations

import csv
import json
from collections import defaultdict
from pathlib import Path

import numpy as np

from ..spectra import mp_density
from .runner import format_value, sha256_file, write_csv

__all__ = ["IntegrityError", "verify", "report"]


class IntegrityError(RuntimeError):
    """A result file is missing or its digest does not match the manifest."""


def _read_csv(path: Path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def verify(results_dir) -> dict:
    """Load the manifest and check every listed digest."""
    d = Path(results_dir)
    mpath = d / "manifest.json"
    if not mpath.is_file():
        raise IntegrityError(f"no manifest.json in {d}")
    manifest = json.loads(mpath.read_text(encoding="utf-8"))
    for name, digest in manifest.get("files", {}).items():
        p = d / name
        if not p.is_file():
            raise IntegrityError(f"{name}: listed in manifest but missing")
        if sha256_file(p) != digest:
            raise IntegrityError(f"{name}: digest mismatch")
    return manifest


def _plot(path: Path, points) -> None:
    write_csv(path, ["x", "y", "series"], points)


def _radial_cdf(d: Path) -> list:
    groups = defaultdict(list)
    for r in _read_csv(d / "spectra.csv"):
        if r["trial"] == "0":
            groups[(r["ensemble"], r["n"])].append(abs(complex(float(r["re"]), float(r["im"]))))
    pts = []
    for (name, n), radii in sorted(groups.items()):
        r = np.sort(radii)
        cdf = np.arange(1, r.size + 1) / r.size
        pts += [(float(x), float(y), f"empirical:{name}:n={n}") for x, y in zip(r, cdf)]
    grid = np.linspace(0.0, 1.2, 121)
    pts += [(float(x), float(min(x * x, 1.0)), "reference:r^2") for x in grid]
    return pts


def _mp_hist(d: Path, y: float) -> list:
    groups = defaultdict(list)
    for r in _read_csv(d / "spectra.csv"):
        groups[(r["ensemble"], r["n"])].append(float(r["eigenvalue"]))
    pts = []
    b = (1 + np.sqrt(y)) ** 2
    edges = np.linspace(0.0, b * 1.05, 41)
    mids = 0.5 * (edges[1:] + edges[:-1])
    for (name, n), ev in sorted(groups.items()):
        h, _ = np.histogram(ev, bins=edges, density=True)
        pts += [(float(x), float(v), f"esd:{name}:n={n}") for x, v in zip(mids, h)]
    pts += [(float(x), float(v), "reference:mp") for x, v in zip(mids, mp_density(mids, y))]
    return pts


def report(results_dir) -> str:
    """Verify ``results_dir``, write ``summary.txt`` and plot CSVs, return the summary."""
    d = Path(results_dir)
    manifest = verify(d)
    kind = manifest["experiment"]
    lines = [f"experiment: {kind}", f"version: {manifest['version']}", f"config sha256: {manifest['config_hash']}", ""]
    lines.append("tables:")
    for name in sorted(manifest["files"]):
        lines.append(f"  {name}")
    written = []
    if kind == "circular-law":
        _plot(d / "plot_radial_cdf.csv", _radial_cdf(d))
        written.append("plot_radial_cdf.csv")
    elif kind == "mp-law":
        cfg_y = 1.0
        for line in (d / "config.ini").read_text(encoding="utf-8").splitlines():
            if line.startswith("y ="):
                cfg_y = float(line.split("=", 1)[1])
        _plot(d / "plot_esd_histogram.csv", _mp_hist(d, cfg_y))
        written.append("plot_esd_histogram.csv")
    elif kind == "sigma-min":
        pts = []
        for r in _read_csv(d / "sigma_min_tail.csv"):
            pts.append((float(r["delta"]), float(r["p_emp"]), f"empirical:{r['ensemble']}:n={r['n']}"))
            pts.append((float(r["delta"]), float(r["bound"]), f"bound:{r['ensemble']}:n={r['n']}"))
        _plot(d / "plot_sigma_min_tail.csv", pts)
        written.append("plot_sigma_min_tail.csv")
    elif kind == "moments":
        rows = _read_csv(d / "moments.csv")
        table = [{"k": r["k"], "z": format_value(complex(float(r["z_re"]), float(r["z_im"]))),
                  "analytic": r["analytic"], "empirical": r["empirical"], "rel_err": r["rel_err"],
                  "ensemble": r["ensemble"], "n": r["n"]} for r in rows]
        write_csv(d / "moment_comparison.csv", ["ensemble", "n", "k", "z", "analytic", "empirical", "rel_err"], table)
        written.append("moment_comparison.csv")
        _plot(d / "plot_moments.csv",
              [(int(r["k"]), float(r["empirical"]), f"empirical:{r['ensemble']}:z={r['z_re']}+{r['z_im']}j")
               for r in rows]
              + [(int(r["k"]), float(r["analytic"]), f"analytic:z={r['z_re']}+{r['z_im']}j") for r in rows])
        written.append("plot_moments.csv")
    if written:
        lines += ["", "plot data:"] + [f"  {w}" for w in written]
    lines += ["", "assertions:"]
    for c in manifest.get("assertions", []):
        lines.append(f"  {c['assertion']}: value={c['value']} limit={c['limit']} {'PASS' if c['passed'] else 'FAIL'}")
    if not manifest.get("assertions"):
        lines.append("  none")
    if manifest.get("failures"):
        lines += ["", "failures:"] + [f"  {f['task']}: {f['error']}" for f in manifest["failures"]]
    text = "\n".join(lines) + "\n"
    (d / "summary.txt").write_text(text, encoding="utf-8")
    return text
