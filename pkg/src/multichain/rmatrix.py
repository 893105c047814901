"""Trigonometric R-matrices of the base and multiplicity-lifted models.

Weights (``e = exp(2 lam)``)::

    a_I(lam) = (q^{2(1-|I|)} - q^{2|I|} e) / (q^2 - e)
    b(lam)   = q (1 - e) / (q^2 - e)
    c(lam)   = (q^2 - 1) e / (q^2 - e)
    d(lam)   = (q^2 - 1) / (q^2 - e)

The R-matrix is stored as a plain ``N^2 x N^2`` matrix with indices
``[(out1, out2), (in1, in2)]``.  For states ``x`` in ``A_I`` and ``y`` in
``A_J`` with ``I != J`` it has ``b`` on ``|x y><x y|`` and
``(-1)^{|I||J|} t_IJ`` on ``|y x><x y|`` (``t = c`` for ``I > J``, ``d``
for ``I < J``).  The intra-set weight ``a_I`` is placed according to the
model's :class:`LiftConvention`.
"""

from __future__ import annotations

import cmath
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Callable, Iterator

import numpy as np

from .graded_space import (
    LiftConvention,
    ModelSpec,
    SpectralOperator,
    embed_two_site,
    graded_permutation,
    graded_tensor,
    identity,
)

__all__ = [
    "PoleError",
    "POLE_TOL",
    "BoltzmannWeights",
    "weight",
    "weight_derivative",
    "boltzmann_weights",
    "build_r_base",
    "build_r_lifted",
    "build_r_derivative",
    "check_ybe",
    "check_form_constraint",
    "regular_form",
    "regularity_residual",
    "r_override",
]

POLE_TOL = 1e-10
_KINDS = ("a", "b", "c", "d")

# testing hook: transforms every lifted R-matrix while active
_r_transform: Callable[[SpectralOperator], SpectralOperator] | None = None


@contextmanager
def r_override(transform: Callable[[SpectralOperator], SpectralOperator]) -> Iterator[None]:
    """Apply ``transform`` to every :func:`build_r_lifted` result inside the block.

    Meant for negative controls: a deliberately corrupted R-matrix must make
    the consistency checks fail.
    """
    global _r_transform
    previous, _r_transform = _r_transform, transform
    try:
        yield
    finally:
        _r_transform = previous


class PoleError(ValueError):
    """Weight evaluated at (or within ``POLE_TOL`` of) ``exp(2 lam) = q**2``."""


def _exp2(lam: complex, q: complex) -> complex:
    e = cmath.exp(2 * complex(lam))
    if abs(e - q * q) <= POLE_TOL:
        raise PoleError(f"spectral parameter {lam} is at the weight pole exp(2*lam) = q**2")
    return complex(e)


def _coeffs(kind: str, q: complex, grade: int) -> tuple[complex, complex]:
    # every weight is (alpha + beta * e) / (q**2 - e)
    if kind == "a":
        return q ** (2 * (1 - grade)), -(q ** (2 * grade))
    if kind == "b":
        return q, -q
    if kind == "c":
        return 0.0, q * q - 1
    if kind == "d":
        return q * q - 1, 0.0
    raise ValueError(f"unknown weight kind {kind!r}; expected one of {_KINDS}")


def _grade_for(kind: str, spec: ModelSpec, base: int | None, grade: int | None) -> int:
    if kind != "a":
        return 0
    if grade is not None:
        return int(grade)
    if base is None:
        raise ValueError("weight 'a' needs a base index (or an explicit grade)")
    return spec.base_grade(base)


def weight(
    kind: str, lam: complex, spec: ModelSpec, base: int | None = None, *, grade: int | None = None
) -> complex:
    """Evaluate one Boltzmann weight.

    Parameters
    ----------
    kind : {'a', 'b', 'c', 'd'}
    lam : complex
        Spectral parameter.
    spec : ModelSpec
        Supplies ``q`` and, for ``'a'``, the grade of ``base``.
    base : int, optional
        Base index ``I`` selecting ``a_I``.
    grade : int, optional
        Grade of ``a`` given directly instead of through ``base``.

    Raises
    ------
    PoleError
        If ``exp(2 lam)`` is within ``POLE_TOL`` of ``q**2``.
    """
    q = spec.q
    e = _exp2(lam, q)
    alpha, beta = _coeffs(kind, q, _grade_for(kind, spec, base, grade))
    return (alpha + beta * e) / (q * q - e)


def weight_derivative(
    kind: str, lam: complex, spec: ModelSpec, base: int | None = None, *, grade: int | None = None
) -> complex:
    """Derivative of :func:`weight` with respect to ``lam``."""
    q = spec.q
    e = _exp2(lam, q)
    alpha, beta = _coeffs(kind, q, _grade_for(kind, spec, base, grade))
    return 2 * e * (beta * q * q + alpha) / (q * q - e) ** 2


@dataclass(frozen=True)
class BoltzmannWeights:
    """All weights at one spectral parameter."""

    lam: complex
    a_boson: complex
    a_fermion: complex
    b: complex
    c: complex
    d: complex

    def a(self, grade: int) -> complex:
        return self.a_fermion if grade else self.a_boson

    def t(self, row_base: int, col_base: int) -> complex:
        """Exchange weight ``t_IJ``: ``c`` when ``I > J``, ``d`` when ``I < J``."""
        if row_base == col_base:
            raise ValueError("t_IJ is only defined for I != J")
        return self.c if row_base > col_base else self.d


def boltzmann_weights(lam: complex, spec: ModelSpec, derivative: bool = False) -> BoltzmannWeights:
    f = weight_derivative if derivative else weight
    return BoltzmannWeights(
        complex(lam),
        f("a", lam, spec, grade=0),
        f("a", lam, spec, grade=1),
        f("b", lam, spec),
        f("c", lam, spec),
        f("d", lam, spec),
    )


def _assemble(spec: ModelSpec, w: BoltzmannWeights, convention: LiftConvention) -> np.ndarray:
    N = spec.dim
    bases = spec.bases
    g = spec.grades
    R = np.zeros((N, N, N, N), dtype=np.complex128)  # [out1, out2, in1, in2]
    for x in range(N):
        I = int(bases[x])
        for y in range(N):
            J = int(bases[y])
            if I == J:
                if convention is LiftConvention.EXCHANGE:
                    R[y, x, x, y] = w.a(g[x])
                else:
                    R[x, y, x, y] = w.a(g[x])
            else:
                R[x, y, x, y] = w.b
                sign = -1.0 if g[x] and g[y] else 1.0
                R[y, x, x, y] = sign * w.t(I, J)
    return R.reshape(N * N, N * N)


def build_r_base(spec: ModelSpec, lam: complex) -> SpectralOperator:
    """R-matrix of the base model (every multiplicity forced to one)."""
    base = spec.base_model()
    w = boltzmann_weights(lam, base)
    K = base.n_base
    g = base.base_grades
    R = np.zeros((K, K, K, K), dtype=np.complex128)
    for I in range(K):
        R[I, I, I, I] = w.a(g[I])
        for J in range(K):
            if I != J:
                R[I, J, I, J] = w.b
                R[J, I, I, J] = (-1.0 if g[I] and g[J] else 1.0) * w.t(I, J)
    return SpectralOperator((K, K), R.reshape(K * K, K * K))


def build_r_lifted(spec: ModelSpec, lam: complex) -> SpectralOperator:
    """Multiplicity-lifted R-matrix on ``V (x) V`` with ``dim V = sum n_I``."""
    w = boltzmann_weights(lam, spec)
    R = SpectralOperator((spec.dim,) * 2, _assemble(spec, w, spec.lift_convention))
    return R if _r_transform is None else _r_transform(R)


def build_r_derivative(spec: ModelSpec, lam: complex) -> SpectralOperator:
    """Analytic ``dR/dlam`` of the lifted R-matrix."""
    w = boltzmann_weights(lam, spec, derivative=True)
    return SpectralOperator((spec.dim,) * 2, _assemble(spec, w, spec.lift_convention))


def check_ybe(
    spec: ModelSpec,
    u: complex,
    v: complex,
    w: complex,
    convention: LiftConvention | str | None = None,
) -> float:
    """Max-norm residual of ``R12(u-v) R13(u-w) R23(v-w) - R23 R13 R12``.

    ``R12 = R (x)_s 1``, ``R23 = 1 (x)_s R`` and ``R13`` is the graded
    embedding on the outer pair of sites.
    """
    if convention is not None:
        spec = spec.with_convention(convention)
    one = identity(spec)
    r_uv = build_r_lifted(spec, u - v)
    r_uw = build_r_lifted(spec, u - w)
    r_vw = build_r_lifted(spec, v - w)
    R12 = graded_tensor(r_uv, one, spec)
    R23 = graded_tensor(one, r_vw, spec)
    R13 = embed_two_site(r_uw, 0, 2, spec, 3)
    diff = R12 @ R13 @ R23 - R23 @ R13 @ R12
    return diff.max_abs()


def check_form_constraint(R: SpectralOperator, spec: ModelSpec, atol: float = 0.0) -> bool:
    """True iff every nonzero entry maps a pair of states to the same pair.

    States are compared as full ``(base, label)`` multisets, so an entry
    ``|out1 out2><in1 in2|`` is allowed only if ``{out1, out2} == {in1, in2}``.
    """
    N = spec.dim
    if R.factors != (N, N):
        raise ValueError(f"expected a two-site operator with local dimension {N}")
    t = np.abs(R.entries.reshape(N, N, N, N)) > atol
    o1, o2, i1, i2 = np.nonzero(t)
    same = ((o1 == i1) & (o2 == i2)) | ((o1 == i2) & (o2 == i1))
    return bool(np.all(same))


def regular_form(spec: ModelSpec) -> SpectralOperator:
    """Expected ``R(0)``.

    Under the exchange lift this is the graded permutation.  Under the
    diagonal lift intra-set pairs are not exchanged; they carry ``a_I(0)``
    on the diagonal instead.
    """
    P = graded_permutation(spec)
    if spec.lift_convention is LiftConvention.EXCHANGE:
        return P
    N = spec.dim
    out = P.entries.reshape(N, N, N, N).copy()
    same = spec.bases[:, None] == spec.bases[None, :]
    for x, y in zip(*np.nonzero(same)):
        out[y, x, x, y] = 0.0
    for x, y in zip(*np.nonzero(same)):
        out[x, y, x, y] = -1.0 if spec.grades[x] else 1.0
    return SpectralOperator((N, N), out.reshape(N * N, N * N))


def regularity_residual(spec: ModelSpec) -> float:
    """``max |R(0) - regular_form(spec)|``."""
    return (build_r_lifted(spec, 0.0) - regular_form(spec)).max_abs()

