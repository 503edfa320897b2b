"""Covariance-matrix entanglement witnesses built from measured variances.

A witness is ``Z = sum_j c_j P_j`` with ``Z >= 0`` and, for a partition into
subsystems of ``N_1..N_k`` modes, the linear sufficient conditions::

    Z_j + i (x_j / N_j) Omega  >= 0                  j < k
    Z_k + i ((1/2 - sum x) / N_k) Omega >= 0

on the diagonal blocks ``Z_j``.  These imply ``sum_j str Z_j >= 1/2`` and hence
``Tr[Z gamma_sep] >= 1`` for every separable covariance matrix, so a value
``c . m = Tr[Z gamma] < 1`` certifies entanglement.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import sdp
from .homodyne import MeasurementSetting, variance
from .symplectic import (
    block_slices,
    check_partition,
    n_modes_of,
    symplectic_form,
    symplectic_trace,
)

DETECTED = "Detected"
NOT_DETECTED = "NotDetected"
INFEASIBLE = "Infeasible"
NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass(frozen=True)
class MeasurementRecord:
    setting: MeasurementSetting
    m: float


@dataclass(frozen=True)
class WitnessProblem:
    records: tuple[MeasurementRecord, ...]
    partition: tuple[int, ...]

    def __post_init__(self):
        records = tuple(self.records)
        if not records:
            raise ValueError("need at least one measurement record")
        modes = records[0].setting.modes
        if any(r.setting.modes != modes for r in records):
            raise ValueError("records mix settings for different mode counts")
        object.__setattr__(self, "records", records)
        object.__setattr__(self, "partition", check_partition(self.partition, modes))

    @property
    def modes(self) -> int:
        return self.records[0].setting.modes

    @property
    def P(self) -> np.ndarray:
        return np.stack([r.setting.P for r in self.records])

    @property
    def m(self) -> np.ndarray:
        return np.array([r.m for r in self.records], dtype=float)


@dataclass(frozen=True)
class WitnessOptions:
    detect_tol: float = 1e-7
    # normalized optimum s below this means no witness exists (value >= 1/s_floor)
    s_floor: float = 1e-6
    # A solver return flagged NumericalTrouble is still used when its point is
    # verified feasible (so the witness is valid) and its gap is below this.
    loose_gap: float = 1e-5
    sdp: sdp.SdpOptions = field(default_factory=sdp.SdpOptions)


@dataclass
class WitnessResult:
    status: str
    value: float
    c: np.ndarray | None = None
    x: np.ndarray | None = None
    Z: np.ndarray | None = None
    solver: sdp.SdpSolution | None = None
    # True when the witness is verified valid but optimal only to loose_gap
    approximate: bool = False

    @property
    def detected(self) -> bool:
        return self.status == DETECTED

    @property
    def E_lb(self) -> float | None:
        """Lower bound ``log2(1/value)`` on the logarithmic negativity."""
        if 0 < self.value < 1:
            return float(-np.log2(self.value))
        return None

    def to_dict(self) -> dict:
        out = {
            "status": self.status,
            "value": None if not np.isfinite(self.value) else float(self.value),
            "c": None if self.c is None else self.c.tolist(),
            "x": None if self.x is None else self.x.tolist(),
            "E_lb": self.E_lb,
        }
        if self.Z is not None:
            out["Z"] = {"modes": n_modes_of(self.Z), "ordering": "interleaved",
                        "rows": self.Z.tolist()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class TheoremCheck:
    str_sum: float
    psd_ok: bool

    @property
    def valid(self) -> bool:
        return self.psd_ok and self.str_sum >= 0.5 - 1e-8


@dataclass(frozen=True)
class PropositionMargin:
    psd: float
    blocks: np.ndarray


def records_for(gamma, settings: Sequence[MeasurementSetting]) -> list[MeasurementRecord]:
    """Exact (noise-free) records ``m_j = Tr[P_j gamma]``."""
    return [MeasurementRecord(s, variance(gamma, s)) for s in settings]


def _omega_weights(partition, x, half=0.5):
    k = len(partition)
    x = np.asarray(x, dtype=float)
    w = np.empty(k)
    w[:k - 1] = x / np.asarray(partition[:k - 1], dtype=float)
    w[k - 1] = (half - x.sum()) / partition[-1]
    return w


def _build(Zcoefs, omegas, Z0, omega0, partition) -> list[sdp.LmiBlock]:
    """LMI blocks for Z and each embedded ``Z_j + i w_j Omega``, all affine in y.

    ``Zcoefs[i]``/``omegas[i]`` give the Z matrix and per-block Omega weights
    of variable i; ``Z0``/``omega0`` the constant term.
    """
    Zcoefs = np.asarray(Zcoefs, dtype=float)
    omegas = np.asarray(omegas, dtype=float)
    blocks = [sdp.LmiBlock(Z0, Zcoefs)]
    for j, (sl, nj) in enumerate(zip(block_slices(partition), partition)):
        om = symplectic_form(nj)
        F0 = _embed(Z0[sl, sl], omega0[j] * om)
        Fs = _embed(Zcoefs[:, sl, sl], omegas[:, j, None, None] * om)
        blocks.append(sdp.LmiBlock(F0, Fs))
    return blocks


def _embed(A, B):
    """Real form ``[[A, -B], [B, A]]`` of ``A + iB``, batched over leading axes."""
    d = A.shape[-1]
    out = np.empty(A.shape[:-2] + (2 * d, 2 * d))
    out[..., :d, :d] = A
    out[..., d:, d:] = A
    out[..., :d, d:] = -B
    out[..., d:, :d] = B
    return out


def _x_omegas(partition):
    """Omega weights contributed by each auxiliary x_j."""
    k = len(partition)
    rows = np.zeros((k - 1, k))
    for j in range(k - 1):
        rows[j, j] = 1.0 / partition[j]
        rows[j, k - 1] = -1.0 / partition[-1]
    return rows


def assemble(records, partition) -> sdp.SdpProblem:
    """Witness SDP over ``(c_1..c_J, x_1..x_{k-1})`` minimizing ``c . m``."""
    prob = records if isinstance(records, WitnessProblem) else WitnessProblem(records, partition)
    parts = prob.partition
    k = len(parts)
    d = 2 * prob.modes
    P = prob.P
    J = len(P)
    Zcoefs = np.concatenate([P, np.zeros((k - 1, d, d))])
    omegas = np.concatenate([np.zeros((J, k)), _x_omegas(parts)])
    omega0 = np.zeros(k)
    omega0[-1] = 0.5 / parts[-1]
    blocks = _build(Zcoefs, omegas, np.zeros((d, d)), omega0, parts)
    objective = np.concatenate([prob.m, np.zeros(k - 1)])
    return sdp.SdpProblem(objective, tuple(blocks))


def consistent_variances(P: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Least-squares projection of m onto ``{Tr[P_j G] : G symmetric}``.

    A no-op for exact data; for noisy data with more settings than
    independent second moments it removes the component no covariance matrix
    can explain (which would otherwise make the witness SDP unbounded).
    """
    J, d, _ = P.shape
    iu = np.triu_indices(d)
    weight = np.where(iu[0] == iu[1], 1.0, 2.0)
    T = P[:, iu[0], iu[1]] * weight
    coef, *_ = np.linalg.lstsq(T, m, rcond=None)
    return T @ coef


def _assemble_normalized(P, m, parts):
    """Homogenized problem: fix ``c . m = 1`` and maximize the weight s that
    replaces the constant 1/2; the witness value is then ``1/s``.

    ``c_j0`` is eliminated through the normalization.
    """
    k = len(parts)
    J, d, _ = P.shape
    j0 = int(np.argmax(m))
    rest = [j for j in range(J) if j != j0]
    Zc = [P[j] - (m[j] / m[j0]) * P[j0] for j in rest]
    Zcoefs = np.concatenate([np.asarray(Zc).reshape(-1, d, d), np.zeros((k, d, d))])
    s_omega = np.zeros((1, k))
    s_omega[0, -1] = 0.5 / parts[-1]
    omegas = np.concatenate([np.zeros((len(rest), k)), _x_omegas(parts), s_omega])
    blocks = _build(Zcoefs, omegas, P[j0] / m[j0], np.zeros(k), parts)
    objective = np.zeros(len(rest) + k)
    objective[-1] = -1.0
    return sdp.SdpProblem(objective, tuple(blocks)), j0, rest


def optimize(problem: WitnessProblem, options: WitnessOptions | None = None) -> WitnessResult:
    """Smallest ``c . m`` over witnesses in the span of the measured settings."""
    opts = options or WitnessOptions()
    parts = problem.partition
    k = len(parts)
    P = problem.P
    m = consistent_variances(P, problem.m)
    if np.any(m <= 0):
        return WitnessResult(NUMERICAL_TROUBLE, np.nan)
    if len(m) == 1:
        # a rank-one Z has rank <= 1 blocks, whose symplectic traces vanish
        return WitnessResult(INFEASIBLE, np.inf)
    sdp_prob, j0, rest = _assemble_normalized(P, m, parts)
    sol = sdp.solve(sdp_prob, opts.sdp)
    approximate = sol.status is sdp.Status.NUMERICAL_TROUBLE and _verified_point(sol, opts)
    if sol.status is not sdp.Status.OPTIMAL and not approximate:
        return WitnessResult(NUMERICAL_TROUBLE, np.nan, solver=sol)
    s = sol.y[-1]
    if s <= opts.s_floor:
        return WitnessResult(INFEASIBLE, np.inf, solver=sol, approximate=approximate)
    c = np.empty(len(m))
    c[rest] = sol.y[:len(rest)]
    c[j0] = (1.0 - c[rest] @ m[rest]) / m[j0]
    c /= s
    x = sol.y[len(rest):len(rest) + k - 1] / s
    c, x, Z = _repair_scale(c, x, P, parts)
    value = float(c @ m)
    status = DETECTED if value < 1.0 - opts.detect_tol else NOT_DETECTED
    return WitnessResult(status, value, c, x, Z, sol, approximate)


def _assemble_robust(P, m, parts, kappa):
    """Homogenized problem for ``min c . m + kappa * ||m * c||`` over witnesses.

    Variables are ``(c, x, s)``; the cone condition
    ``1 - c . m >= kappa * ||m * c||`` is an arrow LMI of size J + 1.
    """
    k = len(parts)
    J, d, _ = P.shape
    Zcoefs = np.concatenate([P, np.zeros((k, d, d))])
    s_omega = np.zeros((1, k))
    s_omega[0, -1] = 0.5 / parts[-1]
    omegas = np.concatenate([np.zeros((J, k)), _x_omegas(parts), s_omega])
    blocks = _build(Zcoefs, omegas, np.zeros((d, d)), np.zeros(k), parts)
    arrow = np.zeros((J + k, J + 1, J + 1))
    idx = np.arange(J)
    arrow[idx, :, :] = -(m / kappa)[:, None, None] * np.eye(J + 1)
    arrow[idx, 0, idx + 1] = m
    arrow[idx, idx + 1, 0] = m
    blocks.append(sdp.LmiBlock(np.eye(J + 1) / kappa, arrow))
    objective = np.zeros(J + k)
    objective[-1] = -1.0
    return sdp.SdpProblem(objective, tuple(blocks))


def optimize_robust(problem: WitnessProblem, kappa: float,
                    options: WitnessOptions | None = None) -> WitnessResult:
    """Witness minimizing the anticipated upper bound ``c . m + kappa ||m * c||``.

    Meant for noisy variances, where the plain optimum over-fits: estimates
    that match no physical CM make ``min c . m`` unbounded. The reported value
    is still the point value ``c . m``.
    """
    if kappa <= 0:
        raise ValueError("kappa must be positive; use optimize for exact data")
    opts = options or WitnessOptions()
    parts = problem.partition
    k = len(parts)
    P, m = problem.P, problem.m
    J = len(m)
    if np.any(m <= 0):
        return WitnessResult(NUMERICAL_TROUBLE, np.nan)
    if J == 1:
        return WitnessResult(INFEASIBLE, np.inf)
    sol = sdp.solve(_assemble_robust(P, m, parts, kappa), opts.sdp)
    if sol.status is sdp.Status.UNBOUNDED and sol.certificate[-1] > 0:
        # The certified ray is itself a valid witness (its blocks have no
        # constant term) whose anticipated upper bound is <= 0.
        y = sol.certificate / sol.certificate[-1]
        return _robust_result(y, P, m, parts, opts, sol, approximate=False)
    approximate = sol.status is sdp.Status.NUMERICAL_TROUBLE and _verified_point(sol, opts)
    if sol.status is not sdp.Status.OPTIMAL and not approximate:
        return WitnessResult(NUMERICAL_TROUBLE, np.nan, solver=sol)
    return _robust_result(sol.y, P, m, parts, opts, sol, approximate)


def _robust_result(y, P, m, parts, opts, sol, approximate) -> WitnessResult:
    J, k = len(m), len(parts)
    s = y[-1]
    if s <= opts.s_floor:
        return WitnessResult(INFEASIBLE, np.inf, solver=sol, approximate=approximate)
    c = y[:J] / s
    x = y[J:J + k - 1] / s
    c, x, Z = _repair_scale(c, x, P, parts)
    value = float(c @ m)
    status = DETECTED if value < 1.0 - opts.detect_tol else NOT_DETECTED
    return WitnessResult(status, value, c, x, Z, sol, approximate)


def _repair_scale(c, x, P, parts):
    """Scale a solver witness up so that its block symplectic traces sum to 1/2.

    Solver slack of order feas_tol in the block constraints can leave the sum
    slightly short once c is divided by a small s.  Both conditions of the
    separability bound are homogeneous in Z, so the scaled Z satisfies it.
    """
    Z = np.tensordot(c, P, axes=1)
    Z = 0.5 * (Z + Z.T)
    total = theorem_check(Z, parts).str_sum
    if 0 < total < 0.5:
        f = 0.5 / total
        c, x, Z = c * f, x * f, Z * f
    return c, x, Z


def _verified_point(sol: sdp.SdpSolution, opts: WitnessOptions) -> bool:
    return bool(
        np.all(np.isfinite(sol.y))
        and sol.violation <= opts.sdp.feas_tol
        and sol.gap <= opts.loose_gap * (1 + abs(sol.objective))
    )


def witness_for(gamma, settings, partition, options: WitnessOptions | None = None):
    """Optimize the witness from exact variances of ``gamma``."""
    return optimize(WitnessProblem(records_for(gamma, settings), partition), options)


def theorem_check(Z, partition, psd_tol: float = 1e-8) -> TheoremCheck:
    """Check ``Z >= 0`` and ``sum_j str Z_j >= 1/2`` directly."""
    Z = np.asarray(Z, dtype=float)
    parts = check_partition(partition, n_modes_of(Z))
    psd_ok = bool(np.linalg.eigvalsh(Z)[0] >= -psd_tol)
    total = 0.0
    for sl in block_slices(parts):
        Zj = Z[sl, sl]
        w, V = np.linalg.eigh(0.5 * (Zj + Zj.T))
        # negative parts are already reported through psd_ok
        total += symplectic_trace((V * np.maximum(w, 0.0)) @ V.T, psd_tol)
    return TheoremCheck(float(total), psd_ok)


def proposition_margin(Z, x, partition) -> PropositionMargin:
    """Minimum eigenvalues of ``Z`` and of every embedded block constraint."""
    Z = np.asarray(Z, dtype=float)
    parts = check_partition(partition, n_modes_of(Z))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.size != len(parts) - 1:
        raise ValueError(f"need {len(parts) - 1} auxiliary values, got {x.size}")
    weights = _omega_weights(parts, x)
    mins = []
    for sl, nj, wj in zip(block_slices(parts), parts, weights):
        emb = sdp.hermitian_embed(Z[sl, sl], wj * symplectic_form(nj))
        mins.append(np.linalg.eigvalsh(emb)[0])
    return PropositionMargin(float(np.linalg.eigvalsh(Z)[0]), np.array(mins))
