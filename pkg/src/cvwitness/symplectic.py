"""Real symplectic linear algebra for covariance matrices.

Quadratures are ordered interleaved, ``(x1, p1, ..., xN, pN)``, everywhere
except at the boundary of the passive (orthogonal-symplectic) construction,
which is naturally written in grouped ``(x1..xN, p1..pN)`` order.
Vacuum has covariance matrix equal to the identity.
"""

from __future__ import annotations

import json
from functools import lru_cache
from typing import Sequence

import numpy as np

INTERLEAVED = "interleaved"
GROUPED = "grouped"
ORDERINGS = (INTERLEAVED, GROUPED)

PHYSICAL_TOL = 1e-9
PSD_TOL = 1e-9


class NotPSDError(ValueError):
    pass


def symplectic_form(n_modes: int) -> np.ndarray:
    """Block-diagonal Omega with ``n_modes`` copies of ``[[0, 1], [-1, 0]]``."""
    if int(n_modes) != n_modes or n_modes < 1:
        raise ValueError(f"invalid number of modes: {n_modes}")
    return _omega(int(n_modes)).copy()


@lru_cache(maxsize=16)
def _omega(n: int) -> np.ndarray:
    return np.kron(np.eye(n), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def n_modes_of(M: np.ndarray) -> int:
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1] or M.shape[0] % 2:
        raise ValueError(f"expected a 2N x 2N matrix, got shape {M.shape}")
    return M.shape[0] // 2


def check_partition(partition: Sequence[int], n_modes: int) -> tuple[int, ...]:
    """Validate subsystem mode counts against the total number of modes."""
    parts = tuple(int(p) for p in partition)
    if not parts or any(p < 1 for p in parts):
        raise ValueError(f"partition entries must be positive: {partition}")
    if sum(parts) != n_modes:
        raise ValueError(f"partition {parts} does not sum to {n_modes} modes")
    return parts


def block_slices(partition: Sequence[int]) -> list[slice]:
    """Quadrature index ranges of contiguous subsystems (interleaved order)."""
    out, start = [], 0
    for p in partition:
        out.append(slice(2 * start, 2 * (start + p)))
        start += p
    return out


def is_physical(gamma, tol: float = PHYSICAL_TOL) -> bool:
    """Robertson-Schroedinger test ``gamma + i Omega >= 0`` up to ``tol``."""
    gamma = np.asarray(gamma, dtype=float)
    n = n_modes_of(gamma)
    if np.abs(gamma - gamma.T).max() > 1e-10 * max(1.0, np.abs(gamma).max()):
        raise ValueError("covariance matrix is not symmetric")
    om = symplectic_form(n)
    # real embedding of the Hermitian matrix gamma + i Omega
    emb = np.block([[gamma, -om], [om, gamma]])
    return bool(np.linalg.eigvalsh(emb)[0] >= -tol)


def symplectic_eigenvalues(M, psd_tol: float = PSD_TOL) -> np.ndarray:
    """Williamson invariants of a PSD matrix, in descending order.

    Computed from the Hermitian matrix ``R (i Omega) R`` with ``R = M^(1/2)``,
    whose eigenvalues are ``+-s_j``.  Unlike the eigenvalues of the
    non-normal ``Omega M`` this stays accurate for singular M.
    """
    M = np.asarray(M, dtype=float)
    n = n_modes_of(M)
    M = 0.5 * (M + M.T)
    lam, V = np.linalg.eigh(M)
    if n == 1 and lam[0] >= -psd_tol:
        return np.array([np.sqrt(max(lam[0], 0.0) * max(lam[1], 0.0))])
    if lam[0] < -psd_tol:
        raise NotPSDError(f"matrix is not PSD (min eigenvalue {lam[0]:.3e})")
    # roundoff-level eigenvalues are exact zeros; s_j ~ sqrt(lam_a lam_b)
    # would otherwise turn eps noise into sqrt(eps) errors
    lam = np.where(lam > lam[-1] * M.shape[0] * np.finfo(float).eps, lam, 0.0)
    R = (V * np.sqrt(lam)) @ V.T
    ev = np.linalg.eigvalsh(1j * (R @ _omega(n) @ R))
    # ev is ascending and symmetric about zero; pair s_j with -s_j
    return 0.5 * (ev[n:][::-1] - ev[:n])


def symplectic_trace(M, psd_tol: float = PSD_TOL) -> float:
    return float(np.sum(symplectic_eigenvalues(M, psd_tol)))


def is_symplectic(S, tol: float = 1e-9) -> bool:
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
        raise ValueError(f"symplectic matrices are 2N x 2N, got {S.shape}")
    om = symplectic_form(S.shape[0] // 2)
    return bool(np.linalg.norm(S @ om @ S.T - om) <= tol)


def _grouped_perm(n: int) -> np.ndarray:
    # position k of grouped order holds interleaved index perm[k]
    return np.concatenate([np.arange(0, 2 * n, 2), np.arange(1, 2 * n, 2)])


def reorder_quadratures(M, source: str, target: str) -> np.ndarray:
    """Permutation similarity between interleaved and grouped orderings."""
    for tag in (source, target):
        if tag not in ORDERINGS:
            raise ValueError(f"unknown ordering {tag!r}; expected one of {ORDERINGS}")
    M = np.asarray(M, dtype=float)
    if source == target:
        return M.copy()
    perm = _grouped_perm(n_modes_of(M))
    if source == INTERLEAVED:
        return M[np.ix_(perm, perm)]
    inv = np.argsort(perm)
    return M[np.ix_(inv, inv)]


def partial_transpose(gamma, modes: Sequence[int]) -> np.ndarray:
    """Flip the momentum signs of the given (0-based) modes."""
    gamma = np.asarray(gamma, dtype=float)
    sign = np.ones(gamma.shape[0])
    for k in modes:
        sign[2 * k + 1] = -1.0
    return gamma * np.outer(sign, sign)


# ---- JSON serialization ---------------------------------------------------

def cm_to_json(gamma, **extra) -> str:
    gamma = np.asarray(gamma, dtype=float)
    payload = {"modes": n_modes_of(gamma), "ordering": INTERLEAVED, "rows": gamma.tolist()}
    payload.update(extra)
    return json.dumps(payload)


def cm_from_dict(data: dict) -> np.ndarray:
    try:
        rows = np.asarray(data["rows"], dtype=float)
        modes = int(data["modes"])
        ordering = data.get("ordering", INTERLEAVED)
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed covariance-matrix JSON: {exc}") from exc
    if rows.shape != (2 * modes, 2 * modes):
        raise ValueError(f"rows have shape {rows.shape}, expected {2 * modes}x{2 * modes}")
    return reorder_quadratures(rows, ordering, INTERLEAVED)


def cm_from_json(text: str) -> np.ndarray:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"malformed covariance-matrix JSON: {exc}") from exc
    return cm_from_dict(data)
