"""Run configuration read from TOML files.

Complex numbers are written as ``[re, im]`` pairs.  Unknown keys are errors.

Example::

    [model]
    m = 1
    n = 1
    multiplicities = [2, 1]
    q_re = 0.6
    q_im = 0.2
    lift_convention = "exchange"

    [chain]
    p0 = 3
    homogeneous = true

    [bethe]
    magnon_counts = [1]
    seeds = [[[[0.1, 0.3]]]]     # seed sets -> levels -> rapidities
    final_branch = 0
    max_iter = 200
    tol = 1e-10

    [spectrum]
    operator = "transfer"
    mu = [0.3, 0.1]

    [output]
    path = "out.json"
    format = "json"
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .chain import ChainSpec
from .graded_space import LiftConvention, ModelSpec

__all__ = ["ConfigError", "BetheSettings", "SpectrumSettings", "RunConfig", "load_config", "parse_config"]

DEFAULT_MU_GRID = (0.31 + 0.2j, -0.4 + 0.1j, 0.17 - 0.33j, 0.05 + 0.5j, -0.2 - 0.2j)

_SECTIONS = {
    "model": {"m", "n", "multiplicities", "q_re", "q_im", "lift_convention"},
    "chain": {"p0", "inhomogeneities", "homogeneous", "dim_cap"},
    "bethe": {"magnon_counts", "seeds", "final_branch", "max_iter", "tol", "mu_grid", "form"},
    "spectrum": {"operator", "mu"},
    "output": {"path", "format"},
}


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


@dataclass(frozen=True)
class BetheSettings:
    magnon_counts: tuple[int, ...] = ()
    seeds: tuple[tuple[tuple[complex, ...], ...], ...] = ()
    final_branch: int = 0
    max_iter: int = 200
    tol: float = 1e-10
    mu_grid: tuple[complex, ...] = DEFAULT_MU_GRID
    form: str = "graded"


@dataclass(frozen=True)
class SpectrumSettings:
    operator: str = "hamiltonian"
    mu: complex | None = None


@dataclass(frozen=True)
class RunConfig:
    chain: ChainSpec
    bethe: BetheSettings = field(default_factory=BetheSettings)
    spectrum: SpectrumSettings = field(default_factory=SpectrumSettings)
    output_path: str | None = None
    output_format: str = "json"

    @property
    def model(self) -> ModelSpec:
        return self.chain.model


def _complex(value: Any, where: str) -> complex:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError(f"{where}: expected a [re, im] pair of numbers, got {value!r}")
    return complex(float(value[0]), float(value[1]))


def _int(value: Any, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError(f"{where}: expected an integer, got {value!r}")
    return value


def _number(value: Any, where: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise ConfigError(f"{where}: expected a number, got {value!r}")
    return float(value)


def _check_keys(data: dict, allowed: set[str], where: str):
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")


def _parse_model(sec: dict) -> ModelSpec:
    for key in ("m", "n", "multiplicities", "q_re"):
        if key not in sec:
            raise ConfigError(f"model: missing required key {key!r}")
    mult = sec["multiplicities"]
    if not isinstance(mult, list):
        raise ConfigError("model.multiplicities: expected a list of integers")
    q = complex(_number(sec["q_re"], "model.q_re"), _number(sec.get("q_im", 0.0), "model.q_im"))
    try:
        conv = LiftConvention.parse(sec.get("lift_convention", "exchange"))
        return ModelSpec(
            _int(sec["m"], "model.m"),
            _int(sec["n"], "model.n"),
            tuple(_int(k, "model.multiplicities") for k in mult),
            q,
            conv,
        )
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from None


def _parse_chain(sec: dict, model: ModelSpec) -> ChainSpec:
    if "p0" not in sec:
        raise ConfigError("chain: missing required key 'p0'")
    p0 = _int(sec["p0"], "chain.p0")
    homogeneous = sec.get("homogeneous", "inhomogeneities" not in sec)
    if not isinstance(homogeneous, bool):
        raise ConfigError("chain.homogeneous: expected true or false")
    if homogeneous:
        if "inhomogeneities" in sec:
            raise ConfigError("chain: inhomogeneities given for a homogeneous chain")
        inh: tuple[complex, ...] = ()
    else:
        raw = sec.get("inhomogeneities")
        if not isinstance(raw, list):
            raise ConfigError("chain.inhomogeneities: required list of [re, im] pairs")
        inh = tuple(_complex(v, "chain.inhomogeneities") for v in raw)
    kwargs = {}
    if "dim_cap" in sec:
        kwargs["dim_cap"] = _int(sec["dim_cap"], "chain.dim_cap")
    try:
        return ChainSpec(model, p0, inh, **kwargs)
    except ValueError as exc:
        raise ConfigError(f"chain: {exc}") from None


def _parse_bethe(sec: dict, model: ModelSpec) -> BetheSettings:
    K = model.n_base - 1
    counts = tuple(_int(v, "bethe.magnon_counts") for v in sec.get("magnon_counts", []))
    if len(counts) > K or any(c < 0 for c in counts):
        raise ConfigError(f"bethe.magnon_counts: expected at most {K} non-negative counts")
    counts = counts + (0,) * (K - len(counts))
    seeds = []
    for i, seed in enumerate(sec.get("seeds", [])):
        if not isinstance(seed, list) or len(seed) > K:
            raise ConfigError(f"bethe.seeds[{i}]: expected a list of at most {K} levels")
        levels = tuple(
            tuple(_complex(v, f"bethe.seeds[{i}][{k}]") for v in lev) for k, lev in enumerate(seed)
        )
        levels = levels + ((),) * (K - len(levels))
        if tuple(len(lev) for lev in levels) != counts:
            raise ConfigError(f"bethe.seeds[{i}]: level sizes do not match magnon_counts {list(counts)}")
        seeds.append(levels)
    mu_grid = DEFAULT_MU_GRID
    if "mu_grid" in sec:
        mu_grid = tuple(_complex(v, "bethe.mu_grid") for v in sec["mu_grid"])
        if not mu_grid:
            raise ConfigError("bethe.mu_grid: must not be empty")
    form = sec.get("form", "graded")
    if form not in ("graded", "bosonic"):
        raise ConfigError("bethe.form: expected 'graded' or 'bosonic'")
    tol = _number(sec.get("tol", 1e-10), "bethe.tol")
    max_iter = _int(sec.get("max_iter", 200), "bethe.max_iter")
    if tol <= 0 or max_iter < 1:
        raise ConfigError("bethe: tol must be positive and max_iter >= 1")
    return BetheSettings(
        magnon_counts=counts,
        seeds=tuple(seeds),
        final_branch=_int(sec.get("final_branch", 0), "bethe.final_branch"),
        max_iter=max_iter,
        tol=tol,
        mu_grid=mu_grid,
        form=form,
    )


def _parse_spectrum(sec: dict) -> SpectrumSettings:
    op = sec.get("operator", "hamiltonian")
    if op not in ("hamiltonian", "transfer"):
        raise ConfigError("spectrum.operator: expected 'hamiltonian' or 'transfer'")
    mu = _complex(sec["mu"], "spectrum.mu") if "mu" in sec else None
    if op == "transfer" and mu is None:
        raise ConfigError("spectrum.mu: required for the transfer operator")
    return SpectrumSettings(op, mu)


def parse_config(data: dict) -> RunConfig:
    """Validate a parsed TOML document and build a :class:`RunConfig`."""
    _check_keys(data, set(_SECTIONS), "config")
    for name, allowed in _SECTIONS.items():
        sec = data.get(name, {})
        if not isinstance(sec, dict):
            raise ConfigError(f"[{name}] must be a table")
        _check_keys(sec, allowed, name)
    if "model" not in data or "chain" not in data:
        raise ConfigError("config needs [model] and [chain] sections")
    model = _parse_model(data["model"])
    chain = _parse_chain(data["chain"], model)
    out = data.get("output", {})
    fmt = out.get("format", "json")
    if fmt != "json":
        raise ConfigError("output.format: only 'json' is supported")
    path = out.get("path")
    if path is not None and not isinstance(path, str):
        raise ConfigError("output.path: expected a string")
    return RunConfig(
        chain=chain,
        bethe=_parse_bethe(data.get("bethe", {}), model),
        spectrum=_parse_spectrum(data.get("spectrum", {})),
        output_path=path,
        output_format=fmt,
    )


def load_config(path: str | Path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path}: {exc}") from None
    return parse_config(data)
