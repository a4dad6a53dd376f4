"""Run configuration: an INI document with a fixed section/key schema.

Eight sections drive every subcommand. All keys carry defaults, unknown
sections or keys are rejected with the offending line number, and every
value is checked against the owning module's preconditions at load time
(so a config that loads is a config that runs). parse -> serialize ->
parse is the identity on the parsed values.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .dnn import TrainConfig
from .errors import ConfigError, ToolkitError
from .grid import make_grid
from .solver.config import BoundarySpec, SolverConfig
from .uq.cases import CaseASpec, CaseBSpec

_BOOL_WORDS = {"true": True, "false": False, "on": True, "off": False,
               "yes": True, "no": False, "1": True, "0": False}


def _int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise ValueError("expected an integer") from None


def _float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise ValueError("expected a number") from None
    if not np.isfinite(v):
        raise ValueError("expected a finite number")
    return v


def _pos_int(s: str) -> int:
    v = _int(s)
    if v < 1:
        raise ValueError("must be >= 1")
    return v


def _nonneg_int(s: str) -> int:
    v = _int(s)
    if v < 0:
        raise ValueError("must be >= 0")
    return v


def _min2_int(s: str) -> int:
    v = _int(s)
    if v < 2:
        raise ValueError("must be >= 2")
    return v


def _pos_float(s: str) -> float:
    v = _float(s)
    if v <= 0.0:
        raise ValueError("must be > 0")
    return v


def _nonneg_float(s: str) -> float:
    v = _float(s)
    if v < 0.0:
        raise ValueError("must be >= 0")
    return v


def _bool(s: str) -> bool:
    try:
        return _BOOL_WORDS[s.strip().lower()]
    except KeyError:
        raise ValueError("expected true/false") from None


def _auto_dt(s: str):
    if s.strip().lower() == "auto":
        return None
    return _pos_float(s)


def _batch(s: str):
    if s.strip().lower() == "full":
        return None
    return _pos_int(s)


def _grid_n(s: str) -> int:
    v = _int(s)
    make_grid(v)  # GridError on bad sizes, rewrapped by the loader
    return v


def _sizes(s: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(tok) for tok in s.split(","))
    except ValueError:
        raise ValueError("expected comma-separated integers") from None
    for v in vals:
        make_grid(v)
    if list(vals) != sorted(set(vals)):
        raise ValueError("sizes must be strictly increasing")
    return vals


def _choice(*options):
    def parse(s: str) -> str:
        v = s.strip().lower()
        if v not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return v
    return parse


def _text(s: str) -> str:
    if not s:
        raise ValueError("must not be empty")
    return s


def _show(value) -> str:
    if value is None:
        raise ValueError("no formatter for None")  # pragma: no cover
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _show_or(word: str):
    return lambda v: word if v is None else _show(v)


@dataclass(frozen=True)
class _Key:
    default: str
    parse: object
    help: str
    show: object = _show


# section -> key -> (default, parser, help). Order here is the canonical
# serialization order.
SCHEMA: dict[str, dict[str, _Key]] = {
    "grid": {
        "n": _Key("16", _grid_n, "cells per side for single runs and ensembles"),
        "sizes": _Key("16, 24, 32", _sizes,
                      "grid sequence for the verify study (needs >= 3)"),
    },
    "solver": {
        "ra": _Key("1e5", _pos_float, "Rayleigh number for simulate/verify"),
        "pr": _Key("7.5", _pos_float, "Prandtl number"),
        "dt": _Key("auto", _auto_dt,
                   "time step; 'auto' adapts to the CFL target",
                   _show_or("auto")),
        "cfl_target": _Key("0.5", _pos_float, "adaptive time-step CFL number"),
        "steady_tol": _Key("1e-4", _pos_float,
                           "per-step relative change defining steady state"),
        "max_steps": _Key("40000", _pos_int, "time-step cap"),
        "poisson_tol": _Key("1e-8", _pos_float,
                            "pressure Poisson relative tolerance"),
        "helmholtz_tol": _Key("1e-9", _pos_float,
                              "diffusion Helmholtz relative tolerance"),
        "buoyancy": _Key("true", _bool, "couple temperature into momentum"),
        "theta_ref": _Key("1.0", _float, "buoyancy gauge temperature"),
        "workers": _Key("1", _pos_int, "parallel ensemble workers"),
    },
    "boundary": {
        "cold_value": _Key("0.95", _float, "cold plate temperature (x=0)"),
        "hot_value": _Key("1.05", _float, "hot plate temperature (x=1)"),
    },
    "case_a": {
        "mu_ra": _Key("1e5", _pos_float, "mean Rayleigh number (1e5 or 1e6)"),
        "sigma_fraction": _Key("0.02", _nonneg_float,
                               "input std as a fraction of the mean"),
        "seed": _Key("0", _nonneg_int, "base seed for designs and MC draws"),
        "n_test": _Key("30", _nonneg_int,
                       "Latin hypercube test points (0 skips the test set)"),
        "mc_samples": _Key("10000", _min2_int,
                           "Monte Carlo draws through the expansion"),
    },
    "case_b": {
        "strips": _Key("4", _pos_int, "hot-wall strip count (4/8/16/32)"),
        "n_train": _Key("60", _min2_int, "training ensemble size"),
        "n_val": _Key("10", _min2_int, "validation ensemble size"),
        "n_test": _Key("10", _min2_int, "test ensemble size"),
        "seed": _Key("0", _nonneg_int, "base seed for designs and MC draws"),
        "mc_samples": _Key("10000", _min2_int,
                           "Monte Carlo draws through the networks"),
    },
    "pce": {
        "level": _Key("4", _pos_int, "tensor collocation level (points per axis)"),
        "order": _Key("3", _nonneg_int, "total polynomial order"),
    },
    "dnn": {
        "learning_rate": _Key("0.003", _pos_float, "Adam step size"),
        "epochs": _Key("500", _pos_int, "training epochs"),
        "batch_size": _Key("32", _batch, "mini-batch size; 'full' for one batch",
                           _show_or("full")),
        "amsgrad": _Key("true", _bool, "use the amsgrad second-moment maximum"),
        "scale": _Key("desk", _choice("desk", "paper"),
                      "network size family: desk (32x4) or paper (300-wide)"),
    },
    "output": {
        "directory": _Key("runs/latest", _text,
                          "artifact root when --out-dir is not given"),
        "case": _Key("a", _choice("a", "b"),
                     "which study the ensemble/fit/propagate stages address"),
        "figures": _Key("true", _bool, "render figures next to the CSV output"),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Parsed configuration: section -> key -> typed value."""

    values: dict

    def __getitem__(self, section: str) -> dict:
        return self.values[section]


def _line_map(text: str):
    """First line number of every section header and key assignment."""
    sections: dict[str, int] = {}
    keys: dict[tuple[str, str], int] = {}
    current = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            current = line[1:line.index("]")] if "]" in line else line[1:]
            sections.setdefault(current, lineno)
        elif "=" in line and current is not None:
            key = line.split("=", 1)[0].strip().lower()
            keys.setdefault((current, key), lineno)
    return sections, keys


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Parse and fully validate an INI document."""
    cp = configparser.ConfigParser(
        delimiters=("=",),
        comment_prefixes=("#",),
        inline_comment_prefixes=("#",),
        interpolation=None,
        strict=True,
        empty_lines_in_values=False,
    )
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from exc

    section_lines, key_lines = _line_map(text)
    if cp.defaults():
        line = section_lines.get("DEFAULT", 0)
        raise ConfigError(f"{source}:{line}: the DEFAULT section is not supported")
    for name in cp.sections():
        if name not in SCHEMA:
            line = section_lines.get(name, 0)
            raise ConfigError(f"{source}:{line}: unknown section [{name}]")
    for name in SCHEMA:
        if not cp.has_section(name):
            raise ConfigError(f"{source}: missing [{name}] section")

    values: dict = {}
    for section, keys in SCHEMA.items():
        got = dict(cp.items(section))
        for key in got:
            if key not in keys:
                line = key_lines.get((section, key), 0)
                raise ConfigError(
                    f"{source}:{line}: unknown key '{key}' in [{section}]"
                )
        parsed = {}
        for key, kspec in keys.items():
            raw = got.get(key, kspec.default).strip()
            try:
                parsed[key] = kspec.parse(raw)
            except ValueError as exc:
                line = key_lines.get((section, key), 0)
                raise ConfigError(
                    f"{source}:{line}: [{section}] {key} = {raw!r}: {exc}"
                ) from exc
            except ToolkitError as exc:
                line = key_lines.get((section, key), 0)
                raise ConfigError(
                    f"{source}:{line}: [{section}] {key} = {raw!r}: {exc}"
                ) from exc
        values[section] = parsed

    rc = RunConfig(values=values)
    # cross-key checks: building the domain objects runs every module's
    # own validation, so bad combinations fail here and not mid-run
    try:
        solver_config(rc)
        boundary_spec(rc)
        case_a_spec(rc)
        case_b_spec(rc)
        train_config(rc)
    except ConfigError:
        raise
    except ToolkitError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return rc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, source=str(path))


def serialize_config(rc: RunConfig) -> str:
    """Canonical INI text for a parsed configuration."""
    lines = []
    for section, keys in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, kspec in keys.items():
            lines.append(f"{key} = {kspec.show(rc.values[section][key])}")
        lines.append("")
    return "\n".join(lines)


def default_config() -> RunConfig:
    return parse_config("\n".join(f"[{s}]" for s in SCHEMA), source="<defaults>")


def help_text() -> str:
    """Every recognized key with its default, for --help epilogs."""
    lines = ["configuration keys (defaults in parentheses):"]
    for section, keys in SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, kspec in keys.items():
            lines.append(f"    {key} ({kspec.default}): {kspec.help}")
    return "\n".join(lines)


def override(rc: RunConfig, section: str, key: str, value) -> RunConfig:
    """New config with one value replaced (used by CLI flags)."""
    if key not in SCHEMA[section]:
        raise ConfigError(f"unknown key '{key}' in [{section}]")
    values = {s: dict(kv) for s, kv in rc.values.items()}
    values[section][key] = value
    return RunConfig(values=values)


def solver_config(rc: RunConfig) -> SolverConfig:
    s = rc["solver"]
    return SolverConfig(
        ra=s["ra"], pr=s["pr"], dt=s["dt"], cfl_target=s["cfl_target"],
        steady_tol=s["steady_tol"], max_steps=s["max_steps"],
        poisson_tol=s["poisson_tol"], helmholtz_tol=s["helmholtz_tol"],
        buoyancy=s["buoyancy"], theta_ref=s["theta_ref"],
    )


def boundary_spec(rc: RunConfig) -> BoundarySpec:
    b = rc["boundary"]
    return BoundarySpec(cold_value=b["cold_value"], hot_value=b["hot_value"])


def case_a_spec(rc: RunConfig) -> CaseASpec:
    a = rc["case_a"]
    return CaseASpec(
        mu_ra=a["mu_ra"], level=rc["pce"]["level"], order=rc["pce"]["order"],
        seed=a["seed"], sigma_fraction=a["sigma_fraction"],
    )


def case_b_spec(rc: RunConfig) -> CaseBSpec:
    b = rc["case_b"]
    return CaseBSpec(
        strips=b["strips"], n_train=b["n_train"], n_val=b["n_val"],
        n_test=b["n_test"], seed=b["seed"],
    )


def train_config(rc: RunConfig) -> TrainConfig:
    d = rc["dnn"]
    return TrainConfig(
        learning_rate=d["learning_rate"], epochs=d["epochs"],
        batch_size=d["batch_size"], amsgrad=d["amsgrad"],
    )
