import json

import pytest
from hypothesis import given, settings, strategies as st

from circlaw.ensembles import EnsembleSpec
from circlaw.harness.cli import main
from circlaw.harness.config import ConfigError, ExperimentConfig, dump_config, parse_config
from circlaw.harness.report import IntegrityError, report, verify
from circlaw.harness.runner import WORKERS_ENV, BudgetExceeded, format_value, run

MINIMAL = """\
[experiment]
kind = circular-law
n = 64
trials = 2
seed = 5

[ensemble.g]
kind = ginibre

[ensemble.s]
kind = sphere_rows

[assertions]
radial_ks_max = 0.5
"""


def test_parse_minimal():
    cfg = parse_config(MINIMAL)
    assert cfg.kind == "circular-law"
    assert cfg.n == (64,)
    assert cfg.spec("g") == EnsembleSpec("ginibre", seed=5)
    assert cfg.assertion_map == {"radial_ks_max": 0.5}


def test_round_trip_minimal():
    cfg = parse_config(MINIMAL)
    assert parse_config(dump_config(cfg)) == cfg


_kinds = st.sampled_from(["ginibre", "sphere_rows", "correlated_gaussian", "bernoulli_pm", "slab"])


@settings(max_examples=60, deadline=None)
@given(
    kind=st.sampled_from(["circular-law", "mp-law", "moments", "norms", "assumptions"]),
    n=st.lists(st.integers(2, 1024), min_size=1, max_size=3),
    trials=st.integers(1, 200),
    seed=st.integers(0, 2**31),
    z=st.lists(st.complex_numbers(max_magnitude=2, allow_nan=False, allow_infinity=False), min_size=1, max_size=3),
    delta=st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=3),
    eps=st.floats(1e-3, 2.0),
    ens=st.lists(st.tuples(_kinds, st.floats(-0.9, 0.9), st.booleans()), min_size=1, max_size=3),
    asserts=st.dictionaries(st.sampled_from(["radial_ks_max", "mp_ks_max", "esd_distance_max"]),
                            st.floats(0, 1), max_size=2),
)
def test_round_trip_property(kind, n, trials, seed, z, delta, eps, ens, asserts):
    ensembles = []
    for i, (k, rho, own_seed) in enumerate(ens):
        kw = {"kind": k, "seed": seed + 1 if own_seed else seed}
        if k == "correlated_gaussian":
            kw["rho"] = rho
        ensembles.append((f"e{i}", EnsembleSpec(**kw)))
    cfg = ExperimentConfig(kind=kind, ensembles=tuple(ensembles), n=tuple(n), trials=trials, seed=seed,
                           z=tuple(complex(v) for v in z), delta=tuple(delta), eps=eps,
                           assertions=tuple(sorted(asserts.items())))
    assert parse_config(dump_config(cfg)) == cfg


@pytest.mark.parametrize("text, key, line", [
    (MINIMAL.replace("trials = 2", "trials = 0"), "trials", 4),
    (MINIMAL.replace("seed = 5", "seed = 5\ncolour = red"), "colour", 6),
    (MINIMAL.replace("kind = ginibre", "kind = ginibre\nrh0 = 0.2"), "rh0", 9),
    (MINIMAL.replace("radial_ks_max", "radial_ks_mx"), "radial_ks_mx", 14),
    (MINIMAL.replace("n = 64", "n = sixty"), "n", 3),
])
def test_errors_name_key_and_line(text, key, line):
    with pytest.raises(ConfigError) as exc:
        parse_config(text)
    assert exc.value.key == key
    assert exc.value.line == line
    assert key in str(exc.value)


@pytest.mark.parametrize("text", [
    "[experiment]\nkind = circular-law\n",                                # no ensemble
    MINIMAL.replace("circular-law", "spiral-law"),
    MINIMAL.replace("kind = sphere_rows", "kind = torus_rows"),
    MINIMAL + "\n[plots]\nx = 1\n",
    MINIMAL.replace("seed = 5", "seed = 5\nseed = 6"),
    "kind = x\n",
])
def test_invalid_configs(text):
    with pytest.raises(ConfigError):
        parse_config(text)


def test_budget_override():
    cfg = parse_config(MINIMAL.replace("n = 64", "n = 2048"))
    with pytest.raises(BudgetExceeded):
        run(cfg, "/nonexistent/never-created")
    cfg = parse_config(MINIMAL.replace("n = 64", "n = 2048\nmax_n = 4096"))
    assert cfg.budget["max_n"] == 4096


def test_run_and_report(tmp_path):
    cfg = parse_config(MINIMAL)
    res = run(cfg, tmp_path / "r")
    assert res.exit_code == 0
    manifest = verify(tmp_path / "r")
    assert set(manifest["files"]) == {"config.ini", "spectra.csv", "stats.csv"}
    assert manifest["assertions"][0]["passed"]
    text = report(tmp_path / "r")
    assert "stats.csv" in text and "plot_radial_cdf.csv" in text
    header = (tmp_path / "r" / "plot_radial_cdf.csv").read_text().splitlines()[0]
    assert header == "x,y,series"
    assert "reference:r^2" in (tmp_path / "r" / "plot_radial_cdf.csv").read_text()


def test_failed_assertion_gives_exit_1(tmp_path):
    cfg = parse_config(MINIMAL.replace("radial_ks_max = 0.5", "radial_ks_max = 0.0"))
    assert run(cfg, tmp_path / "r").exit_code == 1


def test_tampering_detected(tmp_path):
    run(parse_config(MINIMAL), tmp_path / "r")
    p = tmp_path / "r" / "stats.csv"
    p.write_text(p.read_text() + "x\n")
    with pytest.raises(IntegrityError, match="stats.csv"):
        report(tmp_path / "r")


def _digests(d):
    return json.loads((d / "manifest.json").read_text())["files"]


def test_determinism_and_worker_independence(tmp_path, monkeypatch):
    cfg = parse_config(MINIMAL)
    run(cfg, tmp_path / "a")
    monkeypatch.setenv(WORKERS_ENV, "2")
    run(cfg, tmp_path / "b")
    assert _digests(tmp_path / "a") == _digests(tmp_path / "b")
    assert (tmp_path / "a" / "manifest.json").read_bytes() == (tmp_path / "b" / "manifest.json").read_bytes()


@pytest.mark.parametrize("kind, extra, files", [
    ("mp-law", "y = 0.5", {"stats.csv", "spectra.csv"}),
    ("universality", "z = 0.5+0.5j", {"stats.csv"}),
    ("moments", "k = 3\nz = 0, 0.5", {"moments.csv", "class_table.csv", "moment_polynomials.json"}),
    ("xi", "k = 2", {"xi.csv"}),
    ("norms", "delta = 0.2\nd = 1", {"norms.csv"}),
    ("sigma-min", "", {"sigma_min.csv", "sigma_min_tail.csv"}),
    ("assumptions", "eps = 0.5", {"assumptions.csv", "verdicts.json"}),
])
def test_every_experiment_kind(tmp_path, kind, extra, files):
    text = MINIMAL.replace("circular-law", kind).replace("n = 64", "n = 16\n" + extra)
    text = text.replace("[assertions]\nradial_ks_max = 0.5\n", "")
    res = run(parse_config(text), tmp_path / kind)
    assert res.failures == []
    assert files <= set(_digests(tmp_path / kind))
    report(tmp_path / kind)


def test_moment_report_table(tmp_path):
    text = MINIMAL.replace("circular-law", "moments").replace("n = 64", "n = 32\nk = 2")
    text = text.replace("[assertions]\nradial_ks_max = 0.5\n", "")
    run(parse_config(text), tmp_path / "m")
    report(tmp_path / "m")
    header = (tmp_path / "m" / "moment_comparison.csv").read_text().splitlines()[0]
    assert header == "ensemble,n,k,z,analytic,empirical,rel_err"


def test_task_failure_is_recorded(tmp_path):
    # sigma-min on a 2x2 rank-deficient spanning law: norm estimation aborts
    # inside a task, and the run records it rather than raising
    text = MINIMAL.replace("circular-law", "norms").replace("kind = ginibre", "kind = bernoulli_pm\np = 1e-12")
    text = text.replace("n = 64", "n = 3").replace("[assertions]\nradial_ks_max = 0.5\n", "")
    res = run(parse_config(text), tmp_path / "f")
    assert res.exit_code == 1 and res.failures


def test_format_value():
    assert format_value(0.1) == "0.1"
    assert format_value(True) == "true"
    assert format_value(1 + 2j) == "1+2j"
    assert format_value(3) == "3"


def test_cli(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text(MINIMAL)
    assert main(["validate-config", str(cfg)]) == 0
    assert "[ensemble.g]" in capsys.readouterr().out
    assert main(["list-ensembles"]) == 0
    assert "sphere_rows" in capsys.readouterr().out
    assert main(["run", str(cfg), "-o", str(tmp_path / "out")]) == 0
    assert main(["report", str(tmp_path / "out")]) == 0
    bad = tmp_path / "bad.ini"
    bad.write_text(MINIMAL.replace("trials = 2", "trials = 0"))
    assert main(["run", str(bad)]) == 2
    assert "trials" in capsys.readouterr().err
    big = tmp_path / "big.ini"
    big.write_text(MINIMAL.replace("trials = 2", "trials = 500"))
    assert main(["run", str(big), "-o", str(tmp_path / "big")]) == 3
    (tmp_path / "out" / "spectra.csv").write_text("tampered\n")
    assert main(["report", str(tmp_path / "out")]) == 1
    assert main(["validate-config", str(tmp_path / "missing.ini")]) == 2
