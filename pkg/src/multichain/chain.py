"""Inhomogeneous chains: Lax, monodromy and transfer operators, Hamiltonians.

Factor 0 of a monodromy is the auxiliary space; sites ``1..p0`` follow in
order.  Two-site operators are applied through :func:`apply_two_site` so the
``(N * N**p0)``-square monodromy is only formed when explicitly requested.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .graded_space import (
    LiftConvention,
    ModelSpec,
    SpectralOperator,
    apply_two_site,
    graded_permutation,
)
from .rmatrix import build_r_lifted, weight_derivative

__all__ = [
    "DEFAULT_DIM_CAP",
    "DimensionCapError",
    "ChainSpec",
    "lax",
    "monodromy",
    "transfer",
    "translation",
    "hamiltonian_density_closed",
    "hamiltonian_density_fd",
    "hamiltonian_closed",
    "hamiltonian_fd",
    "rtt_residual",
    "transfer_commutator",
    "label_permutation",
]

DEFAULT_DIM_CAP = 16384
_COLUMN_CHUNK = 2048


class DimensionCapError(ValueError):
    """Requested chain Hilbert space exceeds the configured dimension cap."""


@dataclass(frozen=True)
class ChainSpec:
    """A chain of ``p0`` sites with level-0 inhomogeneities.

    Parameters
    ----------
    model : ModelSpec
    p0 : int
        Number of sites, at least one.
    inhomogeneities : sequence of complex, optional
        ``lambda^0_x`` for ``x = 1..p0``; zeros if omitted.
    dim_cap : int
        Largest allowed ``N**p0``.
    """

    model: ModelSpec
    p0: int
    inhomogeneities: tuple[complex, ...] = field(default=())
    dim_cap: int = DEFAULT_DIM_CAP

    def __post_init__(self):
        if int(self.p0) < 1:
            raise ValueError("chain length p0 must be >= 1")
        object.__setattr__(self, "p0", int(self.p0))
        inh = tuple(complex(v) for v in self.inhomogeneities) or (0j,) * self.p0
        if len(inh) != self.p0:
            raise ValueError(f"expected {self.p0} inhomogeneities, got {len(inh)}")
        object.__setattr__(self, "inhomogeneities", inh)
        if self.dim > self.dim_cap:
            raise DimensionCapError(
                f"chain dimension {self.model.dim}**{self.p0} = {self.dim} exceeds the cap {self.dim_cap}"
            )

    @property
    def dim(self) -> int:
        return self.model.dim**self.p0

    @property
    def homogeneous(self) -> bool:
        return all(v == 0 for v in self.inhomogeneities)

    def with_model(self, model: ModelSpec) -> "ChainSpec":
        return ChainSpec(model, self.p0, self.inhomogeneities, self.dim_cap)


def lax(chain: ChainSpec, x: int, mu: complex) -> SpectralOperator:
    """Lax operator ``R(mu - lambda^0_x)`` on auxiliary (x) site ``x`` (1-based)."""
    if not 1 <= x <= chain.p0:
        raise IndexError(f"site {x} outside 1..{chain.p0}")
    return build_r_lifted(chain.model, mu - chain.inhomogeneities[x - 1])


def _lax_list(chain: ChainSpec, mu: complex) -> list[np.ndarray]:
    return [lax(chain, x, mu).entries for x in range(1, chain.p0 + 1)]


def _apply_monodromy(chain: ChainSpec, ops: Sequence[np.ndarray], M: np.ndarray) -> np.ndarray:
    """``L_{p0} ... L_1 @ M`` on the ``1 + p0`` factor space."""
    n = chain.p0 + 1
    for x, op in enumerate(ops, start=1):
        M = apply_two_site(op, 0, x, chain.model, n, M)
    return M


def monodromy(chain: ChainSpec, mu: complex) -> SpectralOperator:
    """Full monodromy ``T(mu) = L_{p0}(mu) ... L_1(mu)`` as a dense operator."""
    N = chain.model.dim
    side = N * chain.dim
    if side > DEFAULT_DIM_CAP:
        raise DimensionCapError(f"dense monodromy of side {side} is too large; use transfer()")
    M = _apply_monodromy(chain, _lax_list(chain, mu), np.eye(side, dtype=np.complex128))
    return SpectralOperator((N,) * (chain.p0 + 1), M)


def _supertrace_of_product(chain: ChainSpec, ops: Sequence[np.ndarray]) -> np.ndarray:
    # column blocks of T restricted to aux state a, then the signed diagonal block
    model = chain.model
    N, D = model.dim, chain.dim
    out = np.zeros((D, D), dtype=np.complex128)
    for a in range(N):
        sign = -1.0 if model.grades[a] else 1.0
        for start in range(0, D, _COLUMN_CHUNK):
            stop = min(D, start + _COLUMN_CHUNK)
            M = np.zeros((N * D, stop - start), dtype=np.complex128)
            M[a * D + np.arange(start, stop), np.arange(stop - start)] = 1.0
            M = _apply_monodromy(chain, ops, M)
            out[:, start:stop] += sign * M[a * D : (a + 1) * D]
    return out


def transfer(chain: ChainSpec, mu: complex) -> SpectralOperator:
    """Transfer matrix: supertrace of the monodromy over the auxiliary space.

    For purely bosonic models the supertrace is the ordinary partial trace.
    """
    return SpectralOperator((chain.model.dim,) * chain.p0, _supertrace_of_product(chain, _lax_list(chain, mu)))


def translation(chain: ChainSpec) -> SpectralOperator:
    """Graded one-step shift, the auxiliary supertrace of ``P_{0 p0} ... P_{0 1}``.

    For the exchange lift on a homogeneous chain this equals ``transfer(chain, 0)``.
    """
    P = graded_permutation(chain.model).entries
    ops = [P] * chain.p0
    return SpectralOperator((chain.model.dim,) * chain.p0, _supertrace_of_product(chain, ops))


def _density_coefficients(model: ModelSpec):
    wd = lambda kind, grade=0: weight_derivative(kind, 0.0, model, grade=grade)
    return wd("a", 1), wd("b"), wd("c"), wd("d")


def hamiltonian_density_closed(model: ModelSpec) -> SpectralOperator:
    """Two-site Hamiltonian density ``P dR/dlam`` at ``lam = 0`` in closed form.

    With ``k = 1 - q**2`` the nonzero entries are

    * ``2 q / k`` times ``(-1)^{|I||J|}`` on inter-set exchange ``|y x><x y|``;
    * ``-2 q**2 / k`` on ``|x y><x y|`` with ``I > J``, ``-2 / k`` with ``I < J``;
    * for fermionic sets, ``-2 (1 + q**2) / k`` on the intra-set units: diagonal
      units under the exchange lift, exchange units under the diagonal lift.

    Bosonic intra-set weights are constant, so they contribute nothing.
    """
    N = model.dim
    g, bases = model.grades, model.bases
    a1, bp, cp, dp = _density_coefficients(model)
    h = np.zeros((N, N, N, N), dtype=np.complex128)
    for x in range(N):
        for y in range(N):
            I, J = bases[x], bases[y]
            if I == J:
                if g[x]:
                    if model.lift_convention is LiftConvention.EXCHANGE:
                        h[x, y, x, y] = -a1
                    else:
                        h[y, x, x, y] = -a1
            else:
                h[y, x, x, y] = (-1.0 if g[x] and g[y] else 1.0) * bp
                h[x, y, x, y] = cp if I > J else dp
    return SpectralOperator((N, N), h.reshape(N * N, N * N))


def hamiltonian_density_fd(model: ModelSpec, h: float) -> SpectralOperator:
    """``P (R(h) - R(-h)) / (2 h)``."""
    P = graded_permutation(model)
    dR = (build_r_lifted(model, h) - build_r_lifted(model, -h)) * (1.0 / (2 * h))
    return P @ dR


def _chain_sum(chain: ChainSpec, density: SpectralOperator) -> SpectralOperator:
    p0, model = chain.p0, chain.model
    if not chain.homogeneous:
        raise ValueError("the Hamiltonian is defined for homogeneous chains only")
    if p0 < 2:
        raise ValueError("a closed chain Hamiltonian needs p0 >= 2")
    N = model.dim
    D = chain.dim
    H = np.zeros((D, D), dtype=np.complex128)
    I = np.eye(D, dtype=np.complex128)
    for x in range(p0 - 1):
        H += apply_two_site(density.entries, x, x + 1, model, p0, I)
    # wrap bond (p0, 1): the last bond conjugated by the graded shift
    S = translation(chain).entries
    last = apply_two_site(density.entries, p0 - 2, p0 - 1, model, p0, I)
    H += S @ last @ np.linalg.inv(S)
    return SpectralOperator((N,) * p0, H)


def hamiltonian_closed(chain: ChainSpec) -> SpectralOperator:
    """Closed-chain Hamiltonian built from :func:`hamiltonian_density_closed`."""
    return _chain_sum(chain, hamiltonian_density_closed(chain.model))


def hamiltonian_fd(chain: ChainSpec, h: float = 1e-4) -> SpectralOperator:
    """Closed-chain Hamiltonian from the finite-difference density."""
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("finite-difference step must lie in [1e-6, 1e-3]")
    return _chain_sum(chain, hamiltonian_density_fd(chain.model, h))


def rtt_residual(chain: ChainSpec, lam: complex, mu: complex) -> float:
    """Max-norm of ``R12(lam-mu) T1(lam) T2(mu) - T2(mu) T1(lam) R12(lam-mu)``.

    Factors are ordered ``(aux1, aux2, site_1, ..., site_p0)``.
    """
    model = chain.model
    n = chain.p0 + 2
    side = model.dim**n
    if side > 4096:
        raise DimensionCapError(f"RTT check on {side}-dimensional space is too large")
    lam_ops = _lax_list(chain, lam)
    mu_ops = _lax_list(chain, mu)
    R = build_r_lifted(model, lam - mu).entries
    eye = np.eye(side, dtype=np.complex128)

    def T(ops, aux, M):
        for x, op in enumerate(ops, start=2):
            M = apply_two_site(op, aux, x, model, n, M)
        return M

    lhs = apply_two_site(R, 0, 1, model, n, T(lam_ops, 0, T(mu_ops, 1, eye)))
    rhs = T(mu_ops, 1, T(lam_ops, 0, apply_two_site(R, 0, 1, model, n, eye)))
    return float(np.max(np.abs(lhs - rhs)))


def transfer_commutator(chain: ChainSpec, mu: complex, nu: complex) -> float:
    """``max |[tau(mu), tau(nu)]|``."""
    return transfer(chain, mu).commutator(transfer(chain, nu)).max_abs()


def label_permutation(model: ModelSpec, base: int, a: int, b: int, n_sites: int) -> SpectralOperator:
    """Swap labels ``a`` and ``b`` of set ``A_base`` on every site.

    Both labels carry the same grade, so no signs arise.
    """
    k = model.multiplicities[base]
    if not (0 <= a < k and 0 <= b < k):
        raise ValueError(f"labels must lie in range({k})")
    perm = np.arange(model.dim)
    i, j = model.offsets[base] + a, model.offsets[base] + b
    perm[i], perm[j] = j, i
    local = np.eye(model.dim)[:, perm]
    op = local
    for _ in range(n_sites - 1):
        op = np.kron(op, local)
    return SpectralOperator((model.dim,) * n_sites, op)
