"""Experiment configuration: a sectioned key-value text format.

Grammar (INI as read by :mod:`configparser`, ``#`` and ``;`` comments)::

    [experiment]
    kind = circular-law          ; one of EXPERIMENT_KINDS
    n = 256, 512                 ; comma-separated n grid
    trials = 4
    seed = 0
    output = results/circ        ; optional, the CLI may override
    z = 0, 0.5+0.5j              ; complex shifts (Python complex syntax)
    k = 4                        ; largest moment order
    delta = 0.05, 0.1            ; tube radii
    eps = 0.5                    ; A3 tolerance
    d = 1                        ; codimension
    y = 1.0                      ; aspect ratio n/N
    max_n = 1024                 ; budget overrides
    max_trials = 200
    max_k = 8

    [ensemble.NAME]              ; one section per ensemble, any NAME
    kind = ginibre
    rho = 0.5                    ; any EnsembleSpec field

    [assertions]                 ; hard acceptance assertions, all optional
    radial_ks_max = 0.05

Unknown sections and keys are rejected with their line number.  The seed
of each ensemble is the experiment seed unless the section sets its own.
"""
from __future__ import annotations

import configparser
import io
import re
from dataclasses import dataclass, field, fields

from ..ensembles import KINDS, EnsembleSpec

__all__ = [
    "EXPERIMENT_KINDS",
    "ASSERTION_KEYS",
    "DEFAULT_BUDGETS",
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "dump_config",
]

EXPERIMENT_KINDS = ("circular-law", "mp-law", "universality", "norms", "sigma-min", "moments", "xi", "assumptions")

ASSERTION_KEYS = (
    "radial_ks_max",
    "angular_ks_max",
    "mp_ks_max",
    "esd_distance_max",
    "moment_rel_err_max",
    "xi_abs_err_max",
    "sigma_min_violations_max",
    "norm_value_max",
)

DEFAULT_BUDGETS = {"max_n": 1024, "max_trials": 200, "max_k": 8}

_EXPERIMENT_KEYS = ("kind", "n", "trials", "seed", "output", "z", "k", "delta", "eps", "d", "y", "max_n",
                    "max_trials", "max_k")
_SPEC_FIELDS = {f.name: f for f in fields(EnsembleSpec)}
_NAME_RE = re.compile(r"^[A-Za-z0-9_\-]+$")


class ConfigError(ValueError):
    """Invalid configuration; the message names the key and line when known."""

    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = ""
        if key is not None:
            where += f"key {key!r}"
        if line is not None:
            where += f"{' ' if where else ''}(line {line})"
        super().__init__(f"{where}: {message}" if where else message)
        self.key = key
        self.line = line


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    ensembles: tuple                  # ((name, EnsembleSpec), ...)
    n: tuple = (256,)
    trials: int = 1
    seed: int = 0
    output: str = ""
    z: tuple = (0j,)
    k: int = 4
    delta: tuple = (0.1,)
    eps: float = 0.5
    d: int = 1
    y: float = 1.0
    budgets: tuple = tuple(sorted(DEFAULT_BUDGETS.items()))
    assertions: tuple = ()            # ((key, value), ...) sorted

    @property
    def budget(self) -> dict:
        return dict(self.budgets)

    @property
    def assertion_map(self) -> dict:
        return dict(self.assertions)

    def spec(self, name: str) -> EnsembleSpec:
        return dict(self.ensembles)[name]

    def to_text(self) -> str:
        return dump_config(self)


def _line_index(text: str) -> dict:
    """Map (section, key) and (section, None) to 1-based line numbers."""
    out = {}
    section = None
    for no, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "#;":
            continue
        if line.startswith("[") and line.endswith("]"):
            section = line[1:-1].strip()
            out.setdefault((section, None), no)
        elif section is not None:
            m = re.match(r"([^=:\s]+)\s*[=:]", line)
            if m:
                out.setdefault((section, m.group(1).strip().lower()), no)
    return out


def _split(value: str) -> list:
    return [v.strip() for v in value.split(",") if v.strip()]


def _int(value: str, key, line) -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"expected an integer, got {value!r}", key, line) from None


def _float(value: str, key, line) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"expected a number, got {value!r}", key, line) from None


def _complex(value: str, key, line) -> complex:
    try:
        return complex(value.replace(" ", ""))
    except ValueError:
        raise ConfigError(f"expected a complex number, got {value!r}", key, line) from None


def _bool(value: str, key, line) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {value!r}", key, line)


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate configuration text."""
    lines = _line_index(text)
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"), default_section="\0")
    try:
        cp.read_string(text)
    except configparser.DuplicateOptionError as exc:
        raise ConfigError("duplicate key", exc.option, exc.lineno) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", None, exc.lineno) from None
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None

    if not cp.has_section("experiment"):
        raise ConfigError("missing [experiment] section")
    for sec in cp.sections():
        if sec not in ("experiment", "assertions") and not sec.startswith("ensemble."):
            raise ConfigError(f"unknown section [{sec}]", None, lines.get((sec, None)))

    exp = cp["experiment"]

    def line(key, sec="experiment"):
        return lines.get((sec, key))

    for key in exp:
        if key not in _EXPERIMENT_KEYS:
            raise ConfigError("unknown key in [experiment]", key, line(key))
    if "kind" not in exp:
        raise ConfigError("missing experiment kind", "kind")
    kind = exp["kind"].strip()
    if kind not in EXPERIMENT_KINDS:
        raise ConfigError(f"unknown experiment kind {kind!r}; expected one of {EXPERIMENT_KINDS}", "kind", line("kind"))

    kw: dict = {"kind": kind}
    if "n" in exp:
        kw["n"] = tuple(_int(v, "n", line("n")) for v in _split(exp["n"]))
        if not kw["n"] or min(kw["n"]) < 2:
            raise ConfigError("n grid must be nonempty with every n >= 2", "n", line("n"))
    for key in ("trials", "seed", "k", "d"):
        if key in exp:
            kw[key] = _int(exp[key], key, line(key))
    if kw.get("trials", 1) < 1:
        raise ConfigError("trials must be >= 1", "trials", line("trials"))
    if kw.get("seed", 0) < 0:
        raise ConfigError("seed must be >= 0", "seed", line("seed"))
    if kw.get("k", 1) < 1:
        raise ConfigError("k must be >= 1", "k", line("k"))
    if kw.get("d", 1) < 1:
        raise ConfigError("d must be >= 1", "d", line("d"))
    if "output" in exp:
        kw["output"] = exp["output"].strip()
    if "z" in exp:
        kw["z"] = tuple(_complex(v, "z", line("z")) for v in _split(exp["z"]))
    if "delta" in exp:
        kw["delta"] = tuple(_float(v, "delta", line("delta")) for v in _split(exp["delta"]))
        if not kw["delta"] or min(kw["delta"]) <= 0:
            raise ConfigError("delta values must be positive", "delta", line("delta"))
    for key in ("eps", "y"):
        if key in exp:
            kw[key] = _float(exp[key], key, line(key))
            if kw[key] <= 0:
                raise ConfigError(f"{key} must be positive", key, line(key))
    if kw.get("y", 1.0) > 1:
        raise ConfigError("aspect ratio y must lie in (0, 1]", "y", line("y"))
    budgets = dict(DEFAULT_BUDGETS)
    for key in DEFAULT_BUDGETS:
        if key in exp:
            budgets[key] = _int(exp[key], key, line(key))
            if budgets[key] < 1:
                raise ConfigError("budget must be >= 1", key, line(key))
    kw["budgets"] = tuple(sorted(budgets.items()))

    seed = kw.get("seed", 0)
    ensembles = []
    for sec in cp.sections():
        if not sec.startswith("ensemble."):
            continue
        name = sec[len("ensemble."):]
        if not _NAME_RE.match(name):
            raise ConfigError(f"invalid ensemble name {name!r}", None, lines.get((sec, None)))
        body = cp[sec]
        args: dict = {"seed": seed}
        for key, raw in body.items():
            ln = line(key, sec)
            if key not in _SPEC_FIELDS:
                raise ConfigError(f"unknown key in [{sec}]", key, ln)
            default = _SPEC_FIELDS[key].default
            if key in ("kind", "structure"):
                args[key] = raw.strip()
            elif isinstance(default, bool):
                args[key] = _bool(raw, key, ln)
            elif isinstance(default, int):
                args[key] = _int(raw, key, ln)
            else:
                args[key] = _float(raw, key, ln)
        if "kind" not in args:
            raise ConfigError(f"[{sec}] needs a kind; known kinds: {', '.join(KINDS)}", "kind", lines.get((sec, None)))
        try:
            spec = EnsembleSpec(**args)
        except ValueError as exc:
            raise ConfigError(str(exc), None, lines.get((sec, None))) from None
        ensembles.append((name, spec))
    if not ensembles and kind != "moments":
        raise ConfigError("at least one [ensemble.NAME] section is required")
    if kind == "universality" and len(ensembles) < 2:
        raise ConfigError("universality needs at least two ensembles")
    kw["ensembles"] = tuple(ensembles)

    asserts = {}
    if cp.has_section("assertions"):
        for key, raw in cp["assertions"].items():
            if key not in ASSERTION_KEYS:
                raise ConfigError("unknown assertion", key, line(key, "assertions"))
            asserts[key] = _float(raw, key, line(key, "assertions"))
    kw["assertions"] = tuple(sorted(asserts.items()))
    return ExperimentConfig(**kw)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, complex):
        return repr(v).strip("()")
    if isinstance(v, float):
        return repr(v)
    return str(v)


def dump_config(cfg: ExperimentConfig) -> str:
    """Canonical text form; ``parse_config(dump_config(c)) == c``."""
    buf = io.StringIO()
    buf.write("[experiment]\n")
    buf.write(f"kind = {cfg.kind}\n")
    buf.write(f"n = {', '.join(map(str, cfg.n))}\n")
    buf.write(f"trials = {cfg.trials}\n")
    buf.write(f"seed = {cfg.seed}\n")
    if cfg.output:
        buf.write(f"output = {cfg.output}\n")
    buf.write(f"z = {', '.join(_fmt(complex(z)) for z in cfg.z)}\n")
    buf.write(f"k = {cfg.k}\n")
    buf.write(f"delta = {', '.join(_fmt(float(x)) for x in cfg.delta)}\n")
    buf.write(f"eps = {_fmt(float(cfg.eps))}\n")
    buf.write(f"d = {cfg.d}\n")
    buf.write(f"y = {_fmt(float(cfg.y))}\n")
    for key, val in cfg.budgets:
        buf.write(f"{key} = {val}\n")
    for name, spec in cfg.ensembles:
        buf.write(f"\n[ensemble.{name}]\n")
        for key, val in spec.non_default_items().items():
            if key == "seed" and val == cfg.seed:
                continue
            buf.write(f"{key} = {_fmt(val)}\n")
    if cfg.assertions:
        buf.write("\n[assertions]\n")
        for key, val in cfg.assertions:
            buf.write(f"{key} = {_fmt(float(val))}\n")
    return buf.getvalue()
