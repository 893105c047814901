"""Graded vector spaces with multiplicity index sets.

Every base state ``I`` of the underlying model is replaced by a block of
``n_I`` interchangeable states.  A chain-site basis state is therefore a pair
``(I, a)`` with ``a`` in ``range(n_I)``; the flattened ordinal puts all labels
of ``I`` contiguously, bosonic blocks first.

Operators are ordinary dense complex matrices.  All Koszul signs are applied
when an operator is built, so states are plain column vectors and any dense
eigensolver can be used on the results.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import NamedTuple, Sequence

import numpy as np

__all__ = [
    "LiftConvention",
    "ModelSpec",
    "StateIndex",
    "SpectralOperator",
    "enumerate_states",
    "flatten_state",
    "unflatten_state",
    "matrix_unit",
    "identity",
    "graded_tensor",
    "graded_permutation",
    "supertrace_aux",
    "parity_vector",
    "embed_two_site",
    "apply_two_site",
]


class LiftConvention(enum.Enum):
    """Where the intra-set weight ``a_I`` sits in the lifted R-matrix.

    ``EXCHANGE`` puts it on ``e_b^a (x) e_a^b`` (intra-set exchange),
    ``DIAGONAL`` on ``e_a^a (x) e_b^b``.  The two coincide when every
    multiplicity is one.
    """

    EXCHANGE = "exchange"
    DIAGONAL = "diagonal"

    @classmethod
    def parse(cls, value: "LiftConvention | str") -> "LiftConvention":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(
                f"unknown lift convention {value!r}; expected 'exchange' or 'diagonal'"
            ) from None


class StateIndex(NamedTuple):
    """A chain-site label: base index ``I`` and multiplicity label ``a``."""

    base: int
    label: int


@dataclass(frozen=True)
class ModelSpec:
    """Grades, multiplicities and deformation parameter of a lifted model.

    Parameters
    ----------
    m, n : int
        Number of bosonic (grade 0) and fermionic (grade 1) base states.
        Base indices ``0..m-1`` are bosonic, ``m..m+n-1`` fermionic.
    multiplicities : sequence of int
        ``n_I >= 1`` for each base index.
    q : complex
        Deformation parameter, ``q = exp(-gamma)``.  Must avoid ``0`` and
        ``+-1``.
    lift_convention : LiftConvention or str
    """

    m: int
    n: int
    multiplicities: tuple[int, ...]
    q: complex = 0.5
    lift_convention: LiftConvention = LiftConvention.EXCHANGE

    def __post_init__(self):
        object.__setattr__(self, "multiplicities", tuple(int(k) for k in self.multiplicities))
        object.__setattr__(self, "q", complex(self.q))
        object.__setattr__(self, "lift_convention", LiftConvention.parse(self.lift_convention))
        if self.m < 0 or self.n < 0:
            raise ValueError("m and n must be non-negative")
        if self.m + self.n < 2:
            raise ValueError("need m + n >= 2 base states")
        if len(self.multiplicities) != self.m + self.n:
            raise ValueError(
                f"expected {self.m + self.n} multiplicities, got {len(self.multiplicities)}"
            )
        if any(k < 1 for k in self.multiplicities):
            raise ValueError("every multiplicity n_I must be >= 1")
        q = self.q
        if not (math.isfinite(q.real) and math.isfinite(q.imag)) or abs(q) < 1e-12:
            raise ValueError("q must be finite and nonzero")
        if abs(q * q - 1) < 1e-12:
            raise ValueError("q**2 != 1 is required (weights have q**2 - 1 denominators)")

    @property
    def n_base(self) -> int:
        return self.m + self.n

    @property
    def dim(self) -> int:
        """Total local dimension ``N = sum_I n_I``."""
        return sum(self.multiplicities)

    def base_grade(self, base: int) -> int:
        return 0 if base < self.m else 1

    @property
    def base_grades(self) -> tuple[int, ...]:
        return tuple(self.base_grade(i) for i in range(self.n_base))

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, acc = [], 0
        for k in self.multiplicities:
            out.append(acc)
            acc += k
        return tuple(out)

    @cached_property
    def grades(self) -> np.ndarray:
        """Grade of each flattened local basis state."""
        g = np.repeat(np.array(self.base_grades, dtype=np.int64), self.multiplicities)
        g.setflags(write=False)
        return g

    @cached_property
    def bases(self) -> np.ndarray:
        """Base index of each flattened local basis state."""
        b = np.repeat(np.arange(self.n_base), self.multiplicities)
        b.setflags(write=False)
        return b

    def with_multiplicities(self, multiplicities: Sequence[int]) -> "ModelSpec":
        return ModelSpec(self.m, self.n, tuple(multiplicities), self.q, self.lift_convention)

    def base_model(self) -> "ModelSpec":
        """The same model with every ``n_I = 1``."""
        return self.with_multiplicities((1,) * self.n_base)

    def with_convention(self, convention: "LiftConvention | str") -> "ModelSpec":
        return ModelSpec(self.m, self.n, self.multiplicities, self.q, LiftConvention.parse(convention))

    def with_q(self, q: complex) -> "ModelSpec":
        return ModelSpec(self.m, self.n, self.multiplicities, q, self.lift_convention)


@dataclass(frozen=True, eq=False)
class SpectralOperator:
    """Dense operator on a tensor product of local spaces.

    Row and column indices decompose big-endian over ``factors``: the first
    factor is the most significant digit.
    """

    factors: tuple[int, ...]
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        factors = tuple(int(f) for f in self.factors)
        entries = np.array(self.entries, dtype=np.complex128)
        side = math.prod(factors)
        if entries.shape != (side, side):
            raise ValueError(f"entries of shape {entries.shape} do not match factors {factors}")
        entries.setflags(write=False)
        object.__setattr__(self, "factors", factors)
        object.__setattr__(self, "entries", entries)

    @property
    def n_factors(self) -> int:
        return len(self.factors)

    @property
    def side(self) -> int:
        return self.entries.shape[0]

    def _check_same(self, other: "SpectralOperator"):
        if self.factors != other.factors:
            raise ValueError(f"factor mismatch: {self.factors} vs {other.factors}")

    def __matmul__(self, other):
        if isinstance(other, SpectralOperator):
            self._check_same(other)
            return SpectralOperator(self.factors, self.entries @ other.entries)
        return self.entries @ np.asarray(other)

    def __add__(self, other: "SpectralOperator") -> "SpectralOperator":
        self._check_same(other)
        return SpectralOperator(self.factors, self.entries + other.entries)

    def __sub__(self, other: "SpectralOperator") -> "SpectralOperator":
        self._check_same(other)
        return SpectralOperator(self.factors, self.entries - other.entries)

    def __mul__(self, scalar) -> "SpectralOperator":
        return SpectralOperator(self.factors, complex(scalar) * self.entries)

    __rmul__ = __mul__

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.entries))) if self.entries.size else 0.0

    def commutator(self, other: "SpectralOperator") -> "SpectralOperator":
        self._check_same(other)
        return SpectralOperator(self.factors, self.entries @ other.entries - other.entries @ self.entries)


def enumerate_states(spec: ModelSpec) -> list[StateIndex]:
    """Canonical local basis order: base index ascending, then label."""
    return [StateIndex(i, a) for i, k in enumerate(spec.multiplicities) for a in range(k)]


def flatten_state(spec: ModelSpec, state: StateIndex) -> int:
    base, label = state
    if not 0 <= base < spec.n_base or not 0 <= label < spec.multiplicities[base]:
        raise ValueError(f"{state} is not a state of this model")
    return spec.offsets[base] + label


def unflatten_state(spec: ModelSpec, ordinal: int) -> StateIndex:
    if not 0 <= ordinal < spec.dim:
        raise ValueError(f"ordinal {ordinal} out of range [0, {spec.dim})")
    base = int(spec.bases[ordinal])
    return StateIndex(base, ordinal - spec.offsets[base])


def matrix_unit(spec: ModelSpec, row: StateIndex, col: StateIndex) -> SpectralOperator:
    """One-site matrix unit ``e_row^col`` (sends basis state ``col`` to ``row``)."""
    m = np.zeros((spec.dim, spec.dim), dtype=np.complex128)
    m[flatten_state(spec, row), flatten_state(spec, col)] = 1.0
    return SpectralOperator((spec.dim,), m)


def identity(spec: ModelSpec, n_sites: int = 1) -> SpectralOperator:
    return SpectralOperator((spec.dim,) * n_sites, np.eye(spec.dim**n_sites))


def parity_vector(spec: ModelSpec, n_sites: int, sites: Sequence[int] | None = None) -> np.ndarray:
    """Fermion parity (0/1) of every product basis state, counted over ``sites``."""
    g = spec.grades
    digits = _digits(spec.dim, n_sites)
    cols = range(n_sites) if sites is None else sites
    par = np.zeros(spec.dim**n_sites, dtype=np.int64)
    for s in cols:
        par += g[digits[:, s]]
    return par % 2


def _digits(base: int, n: int) -> np.ndarray:
    """Big-endian mixed-radix digits of ``0..base**n - 1`` (shape ``(base**n, n)``)."""
    idx = np.arange(base**n)
    out = np.empty((idx.size, n), dtype=np.int64)
    for k in range(n - 1, -1, -1):
        out[:, k] = idx % base
        idx = idx // base
    return out


def _entry_parity(op: SpectralOperator, grades: np.ndarray) -> np.ndarray:
    """Grade of each matrix entry: sum over factors of grade(row) + grade(col)."""
    n = op.n_factors
    N = grades.size
    par = parity_from_digits(grades, _digits(N, n))
    return (par[:, None] + par[None, :]) % 2


def parity_from_digits(grades: np.ndarray, digits: np.ndarray) -> np.ndarray:
    return grades[digits].sum(axis=1) % 2


def graded_tensor(A: SpectralOperator, B: SpectralOperator, spec: ModelSpec) -> SpectralOperator:
    """Graded tensor product ``A (x)_s B``.

    On matrix units the rule is
    ``e_I^K (x)_s e_J^L = (-1)^{|J|(|I|+|K|)} e_I^K (x) e_J^L``; for
    multi-factor operands the grade of an ``A`` entry multiplies the total
    row grade of the ``B`` entry.
    """
    N = spec.dim
    if any(f != N for f in A.factors + B.factors):
        raise ValueError(f"graded_tensor needs local dimension {N} on every factor")
    g = spec.grades
    a_par = _entry_parity(A, g)
    b_rows = parity_from_digits(g, _digits(N, B.n_factors))
    sign_a = np.where(a_par == 1, -1.0, 1.0)
    kron = np.kron(A.entries, B.entries)
    # entry ((ra, rb), (ca, cb)) picks up (-1)^{parity(A[ra, ca]) * grade(rb)}
    sa = A.side
    sb = B.side
    signs = np.ones((sa, sb, sa, sb))
    odd_rows_b = b_rows == 1
    signs[:, odd_rows_b, :, :] *= sign_a[:, None, :, None]
    return SpectralOperator(A.factors + B.factors, kron * signs.reshape(sa * sb, sa * sb))


def graded_permutation(spec: ModelSpec) -> SpectralOperator:
    """Graded swap ``|x, y> -> (-1)^{|x||y|} |y, x>`` on ``V (x) V``."""
    N = spec.dim
    g = spec.grades
    P = np.zeros((N, N, N, N), dtype=np.complex128)  # [out1, out2, in1, in2]
    for x in range(N):
        for y in range(N):
            P[y, x, x, y] = -1.0 if g[x] and g[y] else 1.0
    return SpectralOperator((N, N), P.reshape(N * N, N * N))


def supertrace_aux(O: SpectralOperator, spec: ModelSpec) -> SpectralOperator:
    """Supertrace over factor 0: ``sum_a (-1)^{|a|} O[a-block, a-block]``."""
    N = spec.dim
    if O.n_factors < 2 or O.factors[0] != N:
        raise ValueError(f"factor 0 must have dimension {N} and at least one factor must remain")
    D = O.side // N
    blocks = O.entries.reshape(N, D, N, D)
    out = np.zeros((D, D), dtype=np.complex128)
    for a, g in enumerate(spec.grades):
        out += -blocks[a, :, a, :] if g else blocks[a, :, a, :]
    return SpectralOperator(O.factors[1:], out)


def _local_fixed(op2: np.ndarray, spec: ModelSpec, i: int, j: int) -> np.ndarray:
    """Sign fix for a two-site operator whose first factor lands on the later site."""
    if i < j:
        return op2
    N = spec.dim
    g = spec.grades
    t = op2.reshape(N, N, N, N)  # [r_i, r_j, c_i, c_j] in op2 order
    ri = g[:, None, None, None]
    rj = g[None, :, None, None]
    ci = g[None, None, :, None]
    cj = g[None, None, None, :]
    # graded reordering of the two factors, then back to plain entries
    exponent = (ri + ci) * rj + (rj + cj) * ri + (ri + ci) * (rj + cj)
    return (t * np.where(exponent % 2 == 1, -1.0, 1.0)).reshape(N * N, N * N)


def _row_signs(spec: ModelSpec, i: int, j: int, n_sites: int) -> np.ndarray:
    """Diagonal Jordan-Wigner signs ``d`` with ``embed = d * plain * d``."""
    lo, hi = min(i, j), max(i, j)
    g = spec.grades
    digits = _digits(spec.dim, n_sites)
    between = np.zeros(digits.shape[0], dtype=np.int64)
    for s in range(lo + 1, hi):
        between += g[digits[:, s]]
    after = np.zeros_like(between)
    for s in range(hi + 1, n_sites):
        after += g[digits[:, s]]
    exponent = g[digits[:, lo]] * between + (g[digits[:, i]] + g[digits[:, j]]) * after
    return np.where(exponent % 2 == 1, -1.0, 1.0)


def _plain_apply(op2: np.ndarray, i: int, j: int, N: int, n_sites: int, M: np.ndarray) -> np.ndarray:
    """``plain_embed(op2 on sites i, j) @ M`` by tensor contraction."""
    cols = M.shape[1]
    t = M.reshape((N,) * n_sites + (cols,))
    o = op2.reshape(N, N, N, N)
    res = np.tensordot(o, t, axes=([2, 3], [i, j]))  # axes: out_i, out_j, remaining sites..., cols
    rest = [s for s in range(n_sites) if s not in (i, j)]
    order = [0] * n_sites
    order[i] = 0
    order[j] = 1
    for pos, s in enumerate(rest):
        order[s] = 2 + pos
    res = np.transpose(res, order + [n_sites])
    return res.reshape(N**n_sites, cols)


def apply_two_site(
    op2: np.ndarray, i: int, j: int, spec: ModelSpec, n_sites: int, M: np.ndarray
) -> np.ndarray:
    """Compute ``embed_two_site(op2, i, j) @ M`` without forming the embedding."""
    if i == j or not (0 <= i < n_sites and 0 <= j < n_sites):
        raise ValueError(f"invalid site pair ({i}, {j}) for {n_sites} sites")
    N = spec.dim
    d = _row_signs(spec, i, j, n_sites)
    fixed = _local_fixed(np.asarray(op2, dtype=np.complex128), spec, i, j)
    out = _plain_apply(fixed, i, j, N, n_sites, d[:, None] * M)
    return d[:, None] * out


def embed_two_site(op: SpectralOperator, i: int, j: int, spec: ModelSpec, n_sites: int) -> SpectralOperator:
    """Embed a two-site operator on sites ``(i, j)`` of an ``n_sites`` chain.

    The first tensor factor of ``op`` goes to site ``i``; identities fill the
    remaining sites and the graded tensor product supplies the signs.
    """
    N = spec.dim
    if op.factors != (N, N):
        raise ValueError(f"expected a two-site operator with local dimension {N}")
    M = np.eye(N**n_sites, dtype=np.complex128)
    return SpectralOperator((N,) * n_sites, apply_two_site(op.entries, i, j, spec, n_sites, M))
