"""Nested algebraic Bethe ansatz: eigenvalues, Bethe equations, energies.

Levels are numbered ``k = 0..K`` with ``K = m + n - 1``.  Level 0 carries
the chain inhomogeneities; level ``k >= 1`` carries ``p_k`` rapidities.  The
weight ``a_k`` at level ``k`` is the intra-set weight of base index ``k``,
whose grade decides the sign factors.  For purely bosonic models all grade
signs are one and the recursion reduces to its ungraded form.
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np

from .chain import ChainSpec, _apply_monodromy, _lax_list
from .graded_space import StateIndex, flatten_state
from .rmatrix import PoleError, weight, weight_derivative

__all__ = [
    "BetheConfig",
    "BetheResult",
    "BetheSolveError",
    "CollisionError",
    "LevelEigenvalue",
    "level_eigenvalue",
    "eigenvalue_recursion",
    "final_level_eigenvalue",
    "termination_constant",
    "rapidity_distance",
    "bethe_residual",
    "residual_vector",
    "solve_bethe",
    "one_magnon_roots",
    "energy",
    "energy_from_eigenvalue",
    "fit_energy_normalization",
    "vacuum_vector",
    "one_magnon_vector",
]

COLLISION_TOL = 1e-8
_B_ZERO_TOL = 1e-14


class CollisionError(ValueError):
    """Two rapidities on the same level coincide."""


class BetheSolveError(RuntimeError):
    """Newton failure; ``reason`` is one of ``'non-convergence'``,
    ``'singular-jacobian'`` or ``'collision'``."""

    def __init__(self, reason: str, message: str, rapidities=None, iterations: int = 0, residual: float = math.nan):
        super().__init__(f"{reason}: {message}")
        self.reason = reason
        self.rapidities = rapidities
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class BetheConfig:
    """Rapidities of every nesting level on a given chain.

    Parameters
    ----------
    chain : ChainSpec
    rapidities : sequence of sequences of complex
        ``rapidities[k - 1]`` holds the ``p_k`` rapidities of level ``k``.
        Missing trailing levels are taken as empty.
    final_branch : int
        Selects ``omega = exp(2 pi i final_branch / p_K)`` at the last level.
    pseudo_vacuum_labels : sequence of int
        Label of the reference state in ``A_k`` for ``k = 0..K-1``.
    """

    chain: ChainSpec
    rapidities: tuple[tuple[complex, ...], ...] = ()
    final_branch: int = 0
    pseudo_vacuum_labels: tuple[int, ...] = field(default=())

    def __post_init__(self):
        K = self.n_levels
        raps = tuple(tuple(complex(v) for v in lev) for lev in self.rapidities)
        if len(raps) > K:
            raise ValueError(f"model has {K} nesting levels, got rapidities for {len(raps)}")
        raps = raps + ((),) * (K - len(raps))
        object.__setattr__(self, "rapidities", raps)
        labels = tuple(int(v) for v in self.pseudo_vacuum_labels) or (0,) * K
        if len(labels) != K:
            raise ValueError(f"expected {K} pseudo-vacuum labels, got {len(labels)}")
        mult = self.chain.model.multiplicities
        if any(not 0 <= a < mult[k] for k, a in enumerate(labels)):
            raise ValueError("pseudo-vacuum label outside its multiplicity set")
        object.__setattr__(self, "pseudo_vacuum_labels", labels)
        object.__setattr__(self, "final_branch", int(self.final_branch))
        p_last = len(raps[-1]) if K else 0
        if p_last and mult[K] == 1 and self.final_branch % p_last:
            # a single state in the last set: the shift acts trivially, so omega = 1
            raise ValueError(
                f"final_branch {self.final_branch} needs at least two states in the last set; "
                f"n_{K} = 1 only admits omega = 1"
            )
        counts = self.magnon_counts_all
        for k in range(K):
            if counts[k + 1] > counts[k]:
                warnings.warn(
                    f"level {k + 1} has more magnons ({counts[k + 1]}) than level {k} ({counts[k]})",
                    stacklevel=2,
                )

    @property
    def model(self):
        return self.chain.model

    @property
    def n_levels(self) -> int:
        return self.chain.model.n_base - 1

    @property
    def magnon_counts(self) -> tuple[int, ...]:
        """``(p_1, ..., p_K)``."""
        return tuple(len(lev) for lev in self.rapidities)

    @property
    def magnon_counts_all(self) -> tuple[int, ...]:
        """``(p_0, p_1, ..., p_K)``."""
        return (self.chain.p0,) + self.magnon_counts

    def level(self, k: int) -> tuple[complex, ...]:
        if k == 0:
            return self.chain.inhomogeneities
        if not 1 <= k <= self.n_levels:
            raise ValueError(f"level {k} outside 0..{self.n_levels}")
        return self.rapidities[k - 1]

    def flat(self) -> np.ndarray:
        return np.array([v for lev in self.rapidities for v in lev], dtype=np.complex128)

    def with_flat(self, values: Sequence[complex]) -> "BetheConfig":
        out, i = [], 0
        for p in self.magnon_counts:
            out.append(tuple(complex(v) for v in values[i : i + p]))
            i += p
        return replace(self, rapidities=tuple(out))

    @property
    def omega(self) -> complex:
        p = self.magnon_counts_all[-1]
        if p == 0:
            return 1.0 + 0j
        return cmath.exp(2j * math.pi * self.final_branch / p)


def _sign(grade: int) -> float:
    return -1.0 if grade else 1.0


def _a(config: BetheConfig, k: int, lam: complex) -> complex:
    return weight("a", lam, config.model, k)


def _b(config: BetheConfig, lam: complex, *, denominator: bool = False) -> complex:
    value = weight("b", lam, config.model)
    if denominator and abs(value) < _B_ZERO_TOL:
        raise PoleError(f"b vanishes at {lam}; eigenvalue has a pole there")
    return value


def termination_constant(config: BetheConfig) -> complex:
    """Level-``K`` eigenvalue for an empty final level: ``(-1)^{|K|} n_K``.

    It is the supertrace of the identity on ``A_K``.
    """
    model = config.model
    K = config.n_levels
    return _sign(model.base_grade(K)) * model.multiplicities[K]


def final_level_eigenvalue(config: BetheConfig, mu: complex) -> complex:
    """``(-1)^{|K|} omega prod_x a_K(mu - lambda^K_x)``."""
    K = config.n_levels
    lev = config.level(K)
    if not lev:
        return termination_constant(config)
    g = config.model.base_grade(K)
    prod = complex(np.prod([_a(config, K, mu - x) for x in lev]))
    return _sign(g) * config.omega * prod


def _second_term(config: BetheConfig, k: int, mu: complex) -> complex:
    g = config.model.base_grade(k)
    here = config.level(k)
    nxt = config.level(k + 1)
    val = _sign(g) * complex(np.prod([_a(config, k, mu - x) for x in here]))
    for y in nxt:
        val *= _a(config, k, y - mu) / _b(config, y - mu, denominator=True)
    return val


def eigenvalue_recursion(config: BetheConfig, k: int, mu: complex) -> complex:
    """Level-``k`` eigenvalue ``Lambda^k(mu)``.

    Three contributions: the multiplicity term
    ``(-1)^{|k|} (n_k - 1) prod b`` (present only when ``p_k = p_{k+1}``), the
    reference-state term and the nested term carrying ``Lambda^{k+1}``.

    Raises
    ------
    PoleError
        If ``mu`` sits on a zero of ``b`` in a denominator.
    """
    K = config.n_levels
    if not 0 <= k <= K:
        raise ValueError(f"level {k} outside 0..{K}")
    if k == K:
        return final_level_eigenvalue(config, mu)
    model = config.model
    g = model.base_grade(k)
    here = config.level(k)
    nxt = config.level(k + 1)
    prod_b = complex(np.prod([_b(config, mu - x) for x in here]))
    first = 0j
    if len(here) == len(nxt):
        first = _sign(g) * (model.multiplicities[k] - 1) * prod_b
    second = _second_term(config, k, mu)
    denom = complex(np.prod([_b(config, mu - y, denominator=True) for y in nxt]))
    third = prod_b / denom * eigenvalue_recursion(config, k + 1, mu)
    return first + second + third


@dataclass(frozen=True)
class LevelEigenvalue:
    """``Lambda^k`` as a callable of the spectral parameter."""

    config: BetheConfig
    k: int

    def __call__(self, mu: complex) -> complex:
        return eigenvalue_recursion(self.config, self.k, mu)


def level_eigenvalue(config: BetheConfig, k: int = 0) -> LevelEigenvalue:
    return LevelEigenvalue(config, k)


def rapidity_distance(a: complex, b: complex) -> float:
    """Distance between rapidities modulo ``i pi`` (weights depend on ``exp(2 lam)``)."""
    d = complex(a) - complex(b)
    return abs(d - 1j * math.pi * round(d.imag / math.pi))


def _check_distinct(values: Sequence[complex], tol: float, level: int):
    for i in range(len(values)):
        for j in range(i):
            if rapidity_distance(values[i], values[j]) < tol:
                raise CollisionError(f"rapidities {j} and {i} on level {level} coincide")


def bethe_residual(config: BetheConfig, k: int, z: int, form: str = "graded") -> complex:
    """LHS - RHS of the level-``k`` Bethe equation for rapidity ``lambda^{k+1}_z``.

    The left-hand side is::

        prod_{y in k+2} a_{k+1}(l_y - l_z) / b(l_y - l_z)
        * prod_{y != z in k+1} a_{k+1}(l_z - l_y) b(l_y - l_z) / (a_k(l_y - l_z) b(l_z - l_y))
        * prod_{x in k} b(l_z - l_x) / a_k(l_z - l_x)

    multiplied by ``omega`` when level ``k + 1`` is the last one.  ``form``
    selects the right-hand side: ``'graded'`` uses 1, ``'bosonic'`` uses
    ``1 / a_{k+1}(0)``.
    """
    K = config.n_levels
    if not 0 <= k < K:
        raise ValueError(f"Bethe equations exist for levels 0..{K - 1}, got {k}")
    lev = config.level(k + 1)
    if not 0 <= z < len(lev):
        raise IndexError(f"level {k + 1} has {len(lev)} rapidities, index {z} requested")
    _check_distinct(lev, COLLISION_TOL, k + 1)
    lz = lev[z]
    lhs = 1.0 + 0j
    if k + 1 < K:
        for y in config.level(k + 2):
            lhs *= _a(config, k + 1, y - lz) / _b(config, y - lz)
    for y, ly in enumerate(lev):
        if y == z:
            continue
        lhs *= _a(config, k + 1, lz - ly) * _b(config, ly - lz)
        lhs /= _a(config, k, ly - lz) * _b(config, lz - ly)
    for x in config.level(k):
        lhs *= _b(config, lz - x) / _a(config, k, lz - x)
    if k + 1 == K:
        lhs *= config.omega
    if form == "graded":
        rhs = 1.0
    elif form == "bosonic":
        rhs = 1.0 / _a(config, k + 1, 0.0)
    else:
        raise ValueError(f"unknown Bethe equation form {form!r}")
    return lhs - rhs


def residual_vector(config: BetheConfig, form: str = "graded") -> np.ndarray:
    """All Bethe residuals stacked level by level."""
    out = [
        bethe_residual(config, k, z, form)
        for k in range(config.n_levels)
        for z in range(len(config.level(k + 1)))
    ]
    return np.array(out, dtype=np.complex128)


@dataclass(frozen=True)
class BetheResult:
    config: BetheConfig
    iterations: int
    residual: float
    report: dict


def _max_abs(v: np.ndarray) -> float:
    return float(np.max(np.abs(v))) if v.size else 0.0


def _safe_residual(f: Callable[[np.ndarray], np.ndarray], x: np.ndarray) -> np.ndarray | None:
    try:
        r = f(x)
    except (PoleError, CollisionError, ZeroDivisionError, OverflowError):
        return None
    return r if np.all(np.isfinite(r)) else None


def _jacobian(f, x: np.ndarray, r0: np.ndarray, step: float) -> np.ndarray:
    # residuals are holomorphic in the rapidities, so a complex central difference suffices
    J = np.empty((r0.size, x.size), dtype=np.complex128)
    for j in range(x.size):
        h = step * max(1.0, abs(x[j]))
        dx = np.zeros_like(x)
        dx[j] = h
        fp, fm = _safe_residual(f, x + dx), _safe_residual(f, x - dx)
        if fp is None or fm is None:
            raise BetheSolveError("singular-jacobian", "residual undefined next to the iterate")
        J[:, j] = (fp - fm) / (2 * h)
    return J


def solve_bethe(
    config: BetheConfig,
    *,
    max_iter: int = 200,
    tol: float = 1e-10,
    collision_tol: float = COLLISION_TOL,
    form: str = "graded",
    max_halvings: int = 8,
    fd_step: float = 1e-7,
) -> BetheResult:
    """Damped Newton iteration on the stacked Bethe residuals.

    The rapidities of ``config`` are the seed.  A step is halved (up to
    ``max_halvings`` times) while it fails to lower the residual max-norm.

    Returns
    -------
    BetheResult
        Converged configuration, iteration count, final residual and a report
        recording the termination constant and right-hand-side conventions.

    Raises
    ------
    BetheSolveError
        On non-convergence, a singular Jacobian or colliding rapidities.
    """
    for k in range(1, config.n_levels + 1):
        try:
            _check_distinct(config.level(k), collision_tol, k)
        except CollisionError as exc:
            raise BetheSolveError("collision", str(exc), config.rapidities) from None

    f = lambda v: residual_vector(config.with_flat(v), form)
    x = config.flat()
    r = _safe_residual(f, x)
    if r is None:
        raise BetheSolveError("non-convergence", "residual undefined at the seed", config.rapidities)
    it = 0
    while _max_abs(r) >= tol:
        if it >= max_iter:
            raise BetheSolveError(
                "non-convergence", f"no convergence after {max_iter} iterations",
                config.with_flat(x).rapidities, it, _max_abs(r),
            )
        J = _jacobian(f, x, r, fd_step)
        try:
            if np.linalg.cond(J) > 1e14:
                raise np.linalg.LinAlgError
            step = np.linalg.solve(J, r)
        except np.linalg.LinAlgError:
            raise BetheSolveError(
                "singular-jacobian", f"singular Jacobian at iteration {it}",
                config.with_flat(x).rapidities, it, _max_abs(r),
            ) from None
        norm = _max_abs(r)
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = x - t * step
            r_trial = _safe_residual(f, trial)
            if r_trial is not None and _max_abs(r_trial) < norm:
                break
            t *= 0.5
        if r_trial is None:
            raise BetheSolveError(
                "non-convergence", "iterate left the domain of the residual",
                config.with_flat(x).rapidities, it, norm,
            )
        x, r = trial, r_trial
        it += 1

    solved = config.with_flat(x)
    for k in range(1, config.n_levels + 1):
        try:
            _check_distinct(solved.level(k), collision_tol, k)
        except CollisionError as exc:
            raise BetheSolveError("collision", str(exc), solved.rapidities, it, _max_abs(r)) from None
    report = {
        "iterations": it,
        "residual": _max_abs(r),
        "form": form,
        "omega": solved.omega,
        "termination_constant": termination_constant(solved) if not solved.level(solved.n_levels) else None,
        "rhs_forms_agree": _rhs_forms_agree(solved),
    }
    return BetheResult(solved, it, _max_abs(r), report)


def _rhs_forms_agree(config: BetheConfig) -> bool:
    # graded RHS is 1, bosonic RHS is 1/a_{k+1}(0); they differ on fermionic levels
    return all(
        abs(1.0 / _a(config, k + 1, 0.0) - 1.0) < 1e-14
        for k in range(config.n_levels)
        if config.level(k + 1)
    )


def one_magnon_roots(chain: ChainSpec) -> list[complex]:
    """Closed-form single-magnon rapidities on a homogeneous chain.

    With a bosonic reference state ``a_0 = 1`` and the level-1 equation is
    ``b(lam)**p0 = 1``; inverting ``b(lam) = omega`` gives
    ``exp(2 lam) = q (omega q - 1) / (omega - q)`` for each ``omega**p0 = 1``.
    """
    model = chain.model
    if model.base_grade(0) != 0:
        raise ValueError("closed-form roots need a bosonic reference state (m >= 1)")
    if not chain.homogeneous:
        raise ValueError("closed-form roots need a homogeneous chain")
    q = model.q
    roots = []
    for j in range(chain.p0):
        w = cmath.exp(2j * math.pi * j / chain.p0)
        e = q * (w * q - 1) / (w - q)
        if abs(e) < 1e-300:
            continue
        roots.append(0.5 * cmath.log(e))
    return roots


def _gamma(model) -> complex:
    return -cmath.log(model.q)


def _check_energy_regime(config: BetheConfig):
    if not config.chain.homogeneous:
        raise ValueError("energy formulas need a homogeneous chain")
    p = config.magnon_counts_all
    if any(pk >= p[0] for pk in p[1:]):
        raise ValueError("energy formulas need p0 > p_k for every level k >= 1")


def energy(config: BetheConfig) -> complex:
    """Energy from the closed formulas in ``gamma = -log q`` (principal branch).

    Level-1 bosonic: ``sum_y sinh g / (sinh(l_y + g) sinh l_y)``.
    Level-1 fermionic: ``p0 - p1 - p0 coth g + sum_y coth l_y``.
    """
    _check_energy_regime(config)
    g = _gamma(config.model)
    lev = config.level(1)
    for lam in lev:
        if abs(cmath.sinh(lam)) < 1e-10 or abs(cmath.sinh(lam + g)) < 1e-10:
            raise PoleError(f"rapidity {lam} is a pole of the energy formula")
    if config.model.base_grade(1) == 0:
        return complex(sum(cmath.sinh(g) / (cmath.sinh(lam + g) * cmath.sinh(lam)) for lam in lev))
    p0, p1 = config.chain.p0, len(lev)
    coth = lambda z: cmath.cosh(z) / cmath.sinh(z)
    return complex(p0 - p1 - p0 * coth(g) + sum(coth(lam) for lam in lev))


def energy_from_eigenvalue(config: BetheConfig) -> complex:
    """``d/dmu log Lambda^0`` at ``mu = 0``, the eigenvalue of the chain Hamiltonian.

    Valid when ``p0 > p1`` and ``p0 >= 2``; then only the reference-state term
    of ``Lambda^0`` survives to first order at ``mu = 0``.
    """
    _check_energy_regime(config)
    if config.chain.p0 < 2:
        raise ValueError("needs p0 >= 2")
    model = config.model
    p0 = config.chain.p0
    out = p0 * weight_derivative("a", 0.0, model, 0) / weight("a", 0.0, model, 0)
    for lam in config.level(1):
        out += weight_derivative("b", lam, model) / weight("b", lam, model)
        out -= weight_derivative("a", lam, model, 0) / weight("a", lam, model, 0)
    return complex(out)


def fit_energy_normalization(formula: Sequence[complex], reference: Sequence[complex]) -> tuple[complex, complex]:
    """Least-squares ``(scale, shift)`` with ``reference ~ scale * formula + shift``."""
    f = np.asarray(formula, dtype=np.complex128)
    A = np.column_stack([f, np.ones_like(f)])
    (scale, shift), *_ = np.linalg.lstsq(A, np.asarray(reference, dtype=np.complex128), rcond=None)
    return complex(scale), complex(shift)


def vacuum_vector(chain: ChainSpec, label: int = 0) -> np.ndarray:
    """Product state with every site in ``(0, label)``."""
    model = chain.model
    local = flatten_state(model, StateIndex(0, label))
    idx = sum(local * model.dim**s for s in range(chain.p0))
    v = np.zeros(chain.dim, dtype=np.complex128)
    v[idx] = 1.0
    return v


def one_magnon_vector(chain: ChainSpec, lam: complex, target: StateIndex, vacuum_label: int = 0) -> np.ndarray:
    """``B_target(lam)`` applied to the reference state.

    ``B_target`` is the monodromy block with auxiliary row ``(0, vacuum_label)``
    and auxiliary column ``target``.
    """
    model = chain.model
    hat = StateIndex(0, vacuum_label)
    if tuple(target) == tuple(hat):
        raise ValueError("target must differ from the reference state")
    N, D = model.dim, chain.dim
    col = flatten_state(model, StateIndex(*target))
    row = flatten_state(model, hat)
    M = np.zeros((N * D, 1), dtype=np.complex128)
    M[col * D :(col + 1) * D, 0] = vacuum_vector(chain, vacuum_label)
    M = _apply_monodromy(chain, _lax_list(chain, lam), M)
    v = M[row * D : (row + 1) * D, 0].copy()
    if not np.any(np.abs(v) > 1e-300):
        raise ValueError(f"B_{tuple(target)}({lam}) annihilates the reference state")
    return v
