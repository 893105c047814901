"""Exact diagonalization and comparison of Bethe ansatz eigenvalues with it."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .bethe import BetheConfig, BetheResult, eigenvalue_recursion
from .chain import ChainSpec, transfer
from .graded_space import SpectralOperator
from .rmatrix import PoleError

__all__ = [
    "DegeneracyClass",
    "AbaMatch",
    "SpectrumReport",
    "dense_spectrum",
    "degeneracy_histogram",
    "transfer_branches",
    "match_aba_to_ed",
]


def _sorted(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.complex128)
    return values[np.lexsort((values.imag, values.real))]


def dense_spectrum(O: SpectralOperator | np.ndarray) -> np.ndarray:
    """All eigenvalues, sorted by real part then imaginary part.

    Hermitian input goes through the Hermitian solver, so its eigenvalues
    come back exactly real.
    """
    M = O.entries if isinstance(O, SpectralOperator) else np.asarray(O, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("dense_spectrum needs a square matrix")
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if np.allclose(M, M.conj().T, rtol=0.0, atol=1e-13 * scale):
        vals = np.linalg.eigvalsh(M).astype(np.complex128)
    else:
        vals = np.linalg.eigvals(M)
    return _sorted(vals)


@dataclass(frozen=True)
class DegeneracyClass:
    value: complex
    count: int


def degeneracy_histogram(eigs: Sequence[complex], atol: float = 1e-9, rtol: float = 1e-9) -> list[DegeneracyClass]:
    """Greedy clustering of eigenvalues.

    Values are visited in sorted order and joined to the first existing class
    whose first member lies within ``atol + rtol * |member|``; the reported
    value is the class mean.
    """
    if atol <= 0 and rtol <= 0:
        raise ValueError("need a positive tolerance")
    vals = _sorted(np.asarray(eigs, dtype=np.complex128))
    reps: list[complex] = []
    members: list[list[complex]] = []
    for v in vals:
        for i, r in enumerate(reps):
            if abs(v - r) <= atol + rtol * abs(r):
                members[i].append(v)
                break
        else:
            reps.append(v)
            members.append([v])
    return [DegeneracyClass(complex(np.mean(m)), len(m)) for m in members]


def transfer_branches(
    chain: ChainSpec, mus: Sequence[complex], seed: int = 0, return_vectors: bool = False
) -> tuple[np.ndarray, ...]:
    """Follow every transfer-matrix eigenvalue across a grid of spectral parameters.

    The transfer matrices commute, so the eigenvectors of a random linear
    combination diagonalize all of them at once.  Each eigenvector yields one
    branch ``tau(mu_j) v = Lambda(mu_j) v``.

    Returns
    -------
    branches : ndarray, shape (dim, len(mus))
        Branch values, rows ordered by ``(re, im)`` at ``mus[0]``.
    residuals : ndarray, shape (dim,)
        Largest relative eigenvector residual of each branch over the grid.
    vectors : ndarray, shape (dim, dim)
        Unit eigenvectors as columns, only if ``return_vectors``.
    """
    taus = [transfer(chain, mu).entries for mu in mus]
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=len(taus)) + 1j * rng.normal(size=len(taus))
    combo = sum(c * t for c, t in zip(coeffs, taus))
    _, V = np.linalg.eig(combo)
    V = V / np.linalg.norm(V, axis=0)
    branches = np.empty((V.shape[1], len(taus)), dtype=np.complex128)
    residuals = np.zeros(V.shape[1])
    for j, t in enumerate(taus):
        TV = t @ V
        lam = np.einsum("ij,ij->j", V.conj(), TV)
        branches[:, j] = lam
        res = np.linalg.norm(TV - V * lam, axis=0) / np.maximum(np.abs(lam), 1e-300)
        residuals = np.maximum(residuals, res)
    order = np.lexsort((branches[:, 0].imag, branches[:, 0].real))
    if return_vectors:
        return branches[order], residuals[order], V[:, order]
    return branches[order], residuals[order]


@dataclass(frozen=True)
class AbaMatch:
    """Closest transfer branch for one Bethe solution."""

    solution_id: int
    branch_index: int
    deviation: float


@dataclass
class SpectrumReport:
    """ED eigenvalues with degeneracy classes and optional Bethe matches.

    ``eigenvalues`` and ``branch_index`` refer to the transfer matrix at the
    first grid point.
    """

    eigenvalues: np.ndarray
    degeneracy_classes: list[DegeneracyClass]
    matched_aba: list[AbaMatch] | None = None
    unmatched: list[AbaMatch] = field(default_factory=list)
    branch_residual: float = 0.0


def _relative_deviation(values: np.ndarray, branches: np.ndarray) -> np.ndarray:
    scale = np.maximum(np.abs(branches), 1e-300)
    return np.max(np.abs(branches - values[None, :]) / scale, axis=1)


def match_aba_to_ed(
    chain: ChainSpec,
    solutions: Sequence[BetheConfig | BetheResult],
    mus: Sequence[complex],
    tol: float = 1e-8,
    atol: float = 1e-9,
    rtol: float = 1e-9,
) -> SpectrumReport:
    """Pair each Bethe solution with the transfer branch closest to its ``Lambda^0``.

    The deviation is the largest relative difference over ``mus``.  Solutions
    whose best deviation is not below ``tol`` are listed in ``unmatched``
    together with that best deviation.
    """
    if len(mus) == 0:
        raise ValueError("need at least one grid point")
    branches, res = transfer_branches(chain, mus)
    report = SpectrumReport(
        eigenvalues=branches[:, 0].copy(),
        degeneracy_classes=degeneracy_histogram(branches[:, 0], atol, rtol),
        matched_aba=[],
        branch_residual=float(np.max(res)) if res.size else 0.0,
    )
    for sid, sol in enumerate(solutions):
        config = sol.config if isinstance(sol, BetheResult) else sol
        if config.chain != chain:
            raise ValueError(f"solution {sid} lives on a different chain")
        try:
            values = np.array([eigenvalue_recursion(config, 0, mu) for mu in mus])
        except (PoleError, ZeroDivisionError, OverflowError):
            report.unmatched.append(AbaMatch(sid, -1, float("inf")))
            continue
        dev = _relative_deviation(values, branches)
        best = int(np.argmin(dev))
        entry = AbaMatch(sid, best, float(dev[best]))
        (report.matched_aba if entry.deviation < tol else report.unmatched).append(entry)
    return report
