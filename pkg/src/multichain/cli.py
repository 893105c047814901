"""Command-line front end: ``check``, ``spectrum`` and ``bethe``.

Exit codes: 0 success, 1 a check failed (or every Bethe seed failed),
2 invalid configuration.  JSON payloads are deterministic; run metadata
(timestamp, timing, version) goes to a ``<out>.meta.json`` sidecar.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import time
import warnings
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .bethe import (
    BetheConfig,
    BetheSolveError,
    eigenvalue_recursion,
    energy,
    energy_from_eigenvalue,
    solve_bethe,
    termination_constant,
    rapidity_distance,
)
from .chain import (
    ChainSpec,
    DimensionCapError,
    hamiltonian_closed,
    hamiltonian_density_closed,
    hamiltonian_density_fd,
    rtt_residual,
    transfer,
)
from .config import ConfigError, RunConfig, load_config
from .rmatrix import PoleError, build_r_lifted, check_form_constraint, check_ybe, regularity_residual
from .spectra import degeneracy_histogram, dense_spectrum, match_aba_to_ed

__all__ = ["dumps_json", "run_checks", "cmd_check", "cmd_spectrum", "cmd_bethe", "main"]

EXIT_OK, EXIT_CHECK_FAILED, EXIT_CONFIG = 0, 1, 2


# ---------------------------------------------------------------- JSON output


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    return format(x + 0.0, ".17g")  # + 0.0 folds -0.0 into 0.0


def dumps_json(obj: Any, indent: int = 2, _level: int = 0) -> str:
    """Serialize with every float at 17 significant digits, keys in insertion order."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if obj is None:
        return "null"
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    scalar = lambda v: v is None or isinstance(v, (bool, int, float, str, np.integer, np.floating))
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        if all(scalar(v) for v in obj.values()):
            return "{" + ", ".join(f"{dumps_json(str(k))}: {dumps_json(v)}" for k, v in obj.items()) + "}"
        items = [f"{pad}{dumps_json(str(k))}: {dumps_json(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(scalar(v) for v in obj):
            return "[" + ", ".join(dumps_json(v) for v in obj) + "]"
        items = [pad + dumps_json(v, indent, _level + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def _c(z: complex) -> dict:
    z = complex(z)
    return {"re": z.real, "im": z.imag}


def _model_json(chain: ChainSpec) -> dict:
    model = chain.model
    return {
        "m": model.m,
        "n": model.n,
        "multiplicities": list(model.multiplicities),
        "q": _c(model.q),
        "lift_convention": model.lift_convention.value,
        "p0": chain.p0,
        "inhomogeneities": [_c(v) for v in chain.inhomogeneities],
    }


def _emit(payload: dict, out: str | None, command: str, config_path: str, started: float) -> None:
    text = dumps_json(payload) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    path = Path(out)
    path.write_text(text)
    meta = {
        "command": command,
        "config": str(Path(config_path).resolve()),
        "version": __version__,
        "created": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        "elapsed_seconds": time.perf_counter() - started,
    }
    Path(str(path) + ".meta.json").write_text(dumps_json(meta) + "\n")


# ---------------------------------------------------------------- check


def _rtt_chain(chain: ChainSpec) -> ChainSpec:
    # RTT runs on (aux, aux, sites); shorten the chain if that space is too big
    N = chain.model.dim
    p = chain.p0
    while p > 1 and N ** (p + 2) > 4096:
        p -= 1
    return ChainSpec(chain.model, p, chain.inhomogeneities[:p])


def run_checks(config: RunConfig, tol: float | None = None) -> list[dict]:
    """Evaluate every consistency check; each entry has name, residual, threshold, passed.

    ``tol``, when given, replaces the thresholds of the numerical identities.
    """
    chain = config.chain
    model = chain.model
    rng = np.random.default_rng(0)
    draws = [rng.normal(size=3) * 0.5 + 1j * rng.normal(size=3) * 0.5 for _ in range(3)]
    checks = []

    def add(name, residual, threshold, **extra):
        passed = bool(residual is not None and residual <= threshold)
        checks.append({"name": name, "residual": residual, "threshold": threshold, "passed": passed, **extra})

    t = lambda default: default if tol is None else tol
    add("yang_baxter", max(check_ybe(model, *d) for d in draws), t(1e-12))
    form_ok = check_form_constraint(build_r_lifted(model, 0.37 + 0.21j), model)
    add("form_constraint", 0.0 if form_ok else 1.0, 0.0)
    add("regularity", regularity_residual(model), t(1e-14))
    small = _rtt_chain(chain)
    add("rtt", rtt_residual(small, 0.3 + 0.2j, -0.15 + 0.1j), t(1e-10), p0_used=small.p0)
    ta = transfer(chain, 0.31 + 0.2j).entries
    tb = transfer(chain, -0.4 + 0.1j).entries
    comm = np.max(np.abs(ta @ tb - tb @ ta)) / (np.max(np.abs(ta)) * np.max(np.abs(tb)))
    add("transfer_commutativity", float(comm), t(1e-12))
    # the closed-form density passes if it sits within 10 h^2 of the central
    # difference or the difference shrinks at second order when h halves
    h = 1e-4
    closed = hamiltonian_density_closed(model)
    err_h = (closed - hamiltonian_density_fd(model, h)).max_abs()
    err_h2 = (closed - hamiltonian_density_fd(model, h / 2)).max_abs()
    ratio = err_h / err_h2 if err_h2 > 0 else math.inf
    checks.append({
        "name": "hamiltonian_density",
        "residual": err_h,
        "threshold": 10 * h * h,
        "halving_ratio": ratio if math.isfinite(ratio) else None,
        "passed": bool(err_h <= 10 * h * h or ratio >= 3.5),
    })
    return checks


def cmd_check(config: RunConfig, out: str | None = None, tol: float | None = None,
              config_path: str = "", started: float | None = None) -> int:
    started = time.perf_counter() if started is None else started
    checks = run_checks(config, tol)
    ok = all(c["passed"] for c in checks)
    payload = {"model": _model_json(config.chain), "checks": checks, "passed": ok}
    _emit(payload, out, "check", config_path, started)
    for c in checks:
        if not c["passed"]:
            print(f"check failed: {c['name']} residual {c['residual']:.3e} > {c['threshold']:.1e}", file=sys.stderr)
    return EXIT_OK if ok else EXIT_CHECK_FAILED


# ---------------------------------------------------------------- spectrum


def cmd_spectrum(config: RunConfig, out: str | None = None, config_path: str = "",
                 started: float | None = None) -> int:
    started = time.perf_counter() if started is None else started
    settings = config.spectrum
    chain = config.chain
    if settings.operator == "hamiltonian":
        if not chain.homogeneous or chain.p0 < 2:
            raise ConfigError("the Hamiltonian needs a homogeneous chain with p0 >= 2")
        op = hamiltonian_closed(chain)
    else:
        op = transfer(chain, settings.mu)
    eigs = dense_spectrum(op)
    payload: dict[str, Any] = {"model": _model_json(chain), "operator": settings.operator}
    if settings.operator == "transfer":
        payload["mu"] = _c(settings.mu)
    payload["eigenvalues"] = [_c(z) for z in eigs]
    payload["degeneracies"] = [
        {"re": d.value.real, "im": d.value.imag, "count": d.count} for d in degeneracy_histogram(eigs)
    ]
    _emit(payload, out, "spectrum", config_path, started)
    return EXIT_OK


# ---------------------------------------------------------------- bethe


def seed_grid(counts: Sequence[int], k: int) -> list[tuple[tuple[complex, ...], ...]]:
    """Deterministic seed sets drawn from a ``k x k`` grid in the strip |Im| < pi/2."""
    if k < 1:
        raise ConfigError("--seed-grid must be >= 1")
    pts = [complex(x, y) for y in np.linspace(-0.6, 0.6, k) for x in np.linspace(-0.9, 0.9, k)]
    total = sum(counts)
    if total == 0:
        return []
    if total > len(pts):
        raise ConfigError(f"--seed-grid {k} gives {len(pts)} points, fewer than {total} rapidities")
    stride = len(pts) // total
    seeds = []
    for s in range(len(pts)):
        flat = [pts[(s + j * stride) % len(pts)] for j in range(total)]
        levels, i = [], 0
        for c in counts:
            levels.append(tuple(flat[i : i + c]))
            i += c
        seeds.append(tuple(levels))
    return seeds


def _same_solution(a: BetheConfig, b: BetheConfig, tol: float = 1e-8) -> bool:
    if a.final_branch != b.final_branch or a.magnon_counts != b.magnon_counts:
        return False
    for la, lb in zip(a.rapidities, b.rapidities):
        remaining = list(lb)
        for x in la:
            hit = next((i for i, y in enumerate(remaining) if rapidity_distance(x, y) < tol), None)
            if hit is None:
                return False
            remaining.pop(hit)
    return True


def _optional(fn, config) -> dict | None:
    try:
        return _c(fn(config))
    except (ValueError, ZeroDivisionError):
        return None


def cmd_bethe(config: RunConfig, out: str | None = None, seed_grid_k: int | None = None,
              tol: float | None = None, config_path: str = "", started: float | None = None) -> int:
    started = time.perf_counter() if started is None else started
    chain = config.chain
    st = config.bethe
    newton_tol = st.tol if tol is None else tol
    seeds = list(st.seeds)
    if seed_grid_k is not None:
        seeds += seed_grid(st.magnon_counts, seed_grid_k)
    vacuum = sum(st.magnon_counts) == 0
    if vacuum:
        seeds = [tuple(() for _ in st.magnon_counts)]
    elif not seeds:
        raise ConfigError("bethe: no seeds given (add bethe.seeds or --seed-grid)")

    entries, converged = [], []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        for sid, seed in enumerate(seeds):
            entry: dict[str, Any] = {"id": sid, "seed": [[_c(v) for v in lev] for lev in seed]}
            try:
                cfg = BetheConfig(chain, seed, st.final_branch)
            except ValueError as exc:
                raise ConfigError(f"bethe: {exc}") from None
            try:
                res = solve_bethe(cfg, max_iter=st.max_iter, tol=newton_tol, form=st.form)
            except BetheSolveError as exc:
                raps = exc.rapidities if exc.rapidities is not None else seed
                entry.update(
                    converged=False, reason=exc.reason, iterations=exc.iterations,
                    residual=float(exc.residual), rapidities=[[_c(v) for v in lev] for lev in raps],
                )
                entries.append(entry)
                continue
            sol = res.config
            dup = next((e["id"] for e, c in converged if _same_solution(c, sol)), None)
            entry.update(
                converged=True, reason=None, iterations=res.iterations, residual=res.residual,
                rapidities=[[_c(v) for v in lev] for lev in sol.rapidities],
                final_branch=sol.final_branch, duplicate_of=dup,
            )
            try:
                entry["lambda0"] = [{"mu": _c(mu), "value": _c(eigenvalue_recursion(sol, 0, mu))} for mu in st.mu_grid]
            except PoleError:
                entry["lambda0"] = None
            entry["energy"] = _optional(energy, sol)
            entry["energy_log_derivative"] = _optional(energy_from_eigenvalue, sol)
            entries.append(entry)
            converged.append((entry, sol))

    if converged:
        report = match_aba_to_ed(chain, [c for _, c in converged], st.mu_grid)
        for m in report.matched_aba:
            converged[m.solution_id][0]["ed_match"] = {"branch": m.branch_index, "deviation": m.deviation}
        for m in report.unmatched:
            e = converged[m.solution_id][0]
            e["ed_match"] = None
            e["closest_branch"] = {"branch": m.branch_index, "deviation": m.deviation}
    payload = {
        "model": _model_json(chain),
        "mu_grid": [_c(mu) for mu in st.mu_grid],
        "termination_constant": _c(termination_constant(BetheConfig(chain))),
        "solutions": entries,
    }
    _emit(payload, out, "bethe", config_path, started)
    return EXIT_OK if converged else EXIT_CHECK_FAILED


# ---------------------------------------------------------------- entry point


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multichain", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in [
        ("check", "run R-matrix and transfer-matrix consistency checks"),
        ("spectrum", "exact spectrum of the Hamiltonian or a transfer matrix"),
        ("bethe", "solve Bethe equations and compare with exact diagonalization"),
    ]:
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", required=True, help="TOML run configuration")
        s.add_argument("--out", help="output JSON path (default: output.path or stdout)")
        s.add_argument("--tol", type=float, help="check thresholds (check) or Newton tolerance (bethe)")
        if name == "bethe":
            s.add_argument("--seed-grid", type=int, metavar="K", help="add K*K automatically placed seeds")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = _parser().parse_args(argv)
    started = time.perf_counter()
    try:
        config = load_config(args.config)
        out = args.out if args.out is not None else config.output_path
        if args.command == "check":
            return cmd_check(config, out, args.tol, args.config, started)
        if args.command == "spectrum":
            return cmd_spectrum(config, out, args.config, started)
        return cmd_bethe(config, out, args.seed_grid, args.tol, args.config, started)
    except (ConfigError, DimensionCapError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
