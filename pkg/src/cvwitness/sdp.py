"""Small dense SDP solver for block-diagonal linear matrix inequalities.

Problems have the form::

    minimize    b . y
    subject to  F0_k + sum_i y_i F_ik  >= 0      for every block k

and are solved with a primal-dual interior-point method on the homogeneous
self-dual embedding (HKM search direction, Mehrotra predictor-corrector).
The embedding yields either an optimal pair or an infeasibility/unboundedness
certificate, which is re-checked against the original data before it is
reported.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

SYM_TOL = 1e-12


class Status(str, enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    NUMERICAL_TROUBLE = "NumericalTrouble"


@dataclass(frozen=True)
class LmiBlock:
    """One LMI block ``F0 + sum_i y_i Fs[i] >= 0``."""

    F0: np.ndarray
    Fs: np.ndarray

    def __post_init__(self):
        F0 = np.asarray(self.F0, dtype=float)
        Fs = np.asarray(self.Fs, dtype=float)
        d = F0.shape[0]
        if F0.shape != (d, d):
            raise ValueError(f"F0 must be square, got {F0.shape}")
        if Fs.ndim == 2 and Fs.size == 0:
            Fs = Fs.reshape(0, d, d)
        if Fs.ndim != 3 or Fs.shape[1:] != (d, d):
            raise ValueError(f"Fs must have shape (n, {d}, {d}), got {Fs.shape}")
        scale = max(1.0, np.abs(F0).max(initial=0.0), np.abs(Fs).max(initial=0.0))
        if np.abs(F0 - F0.T).max(initial=0.0) > SYM_TOL * scale:
            raise ValueError("F0 is not symmetric")
        if Fs.size and np.abs(Fs - Fs.transpose(0, 2, 1)).max() > SYM_TOL * scale:
            raise ValueError("Fs contains a non-symmetric matrix")
        object.__setattr__(self, "F0", F0)
        object.__setattr__(self, "Fs", Fs)

    @property
    def size(self) -> int:
        return self.F0.shape[0]

    def matrix(self, y) -> np.ndarray:
        """Evaluate ``F0 + sum_i y_i F_i``."""
        return self.F0 + np.tensordot(np.asarray(y, dtype=float), self.Fs, axes=1)


@dataclass(frozen=True)
class SdpProblem:
    objective: np.ndarray
    blocks: tuple[LmiBlock, ...]

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.objective, dtype=float))
        blocks = tuple(self.blocks)
        if b.size == 0 or not blocks:
            raise ValueError("empty SDP: need at least one variable and one block")
        for blk in blocks:
            if blk.Fs.shape[0] != b.size:
                raise ValueError(
                    f"block has {blk.Fs.shape[0]} coefficient matrices, "
                    f"objective has {b.size} variables"
                )
        object.__setattr__(self, "objective", b)
        object.__setattr__(self, "blocks", blocks)

    @property
    def n_vars(self) -> int:
        return self.objective.size

    def to_json(self) -> str:
        """Debug dump ``{objective, blocks: [{F0, Fs}]}`` for external cross-checks."""
        return json.dumps(
            {
                "objective": self.objective.tolist(),
                "blocks": [{"F0": b.F0.tolist(), "Fs": b.Fs.tolist()} for b in self.blocks],
            }
        )

    @classmethod
    def from_json(cls, text: str) -> "SdpProblem":
        data = json.loads(text)
        n = len(data["objective"])
        blocks = []
        for b in data["blocks"]:
            F0 = np.asarray(b["F0"], dtype=float)
            Fs = np.asarray(b["Fs"], dtype=float).reshape(n, *F0.shape)
            blocks.append(LmiBlock(F0, Fs))
        return cls(np.asarray(data["objective"], dtype=float), tuple(blocks))


@dataclass(frozen=True)
class SdpOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-8
    cert_tol: float = 1e-7
    max_iter: int = 200
    step_frac: float = 0.98
    rank_tol: float = 1e-10
    # iterations without a 2x merit improvement before giving up
    stall_iter: int = 10


@dataclass
class SdpSolution:
    status: Status
    y: np.ndarray
    objective: float
    gap: float
    violation: float
    iterations: int
    dual: list[np.ndarray] = field(default_factory=list)
    certificate: object = None

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


@dataclass
class FeasibilityReport:
    min_eigs: list[float]
    tol: float

    @property
    def min_eig(self) -> float:
        return min(self.min_eigs)

    @property
    def feasible(self) -> bool:
        return self.min_eig >= -self.tol


def hermitian_embed(A, B, tol: float = 1e-10) -> np.ndarray:
    """Real symmetric image ``[[A, -B], [B, A]]`` of the Hermitian matrix ``A + iB``.

    The embedding is PSD iff ``A + iB`` is, and every eigenvalue of ``A + iB``
    appears twice in its spectrum.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape != B.shape or A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A and B must be square matrices of equal shape")
    if np.abs(A - A.T).max(initial=0.0) > tol:
        raise ValueError("A must be symmetric")
    if np.abs(B + B.T).max(initial=0.0) > tol:
        raise ValueError("B must be antisymmetric")
    return np.block([[A, -B], [B, A]])


def feasibility_check(problem: SdpProblem, y, tol: float = 1e-8) -> FeasibilityReport:
    """Per-block minimum eigenvalue of ``F0 + sum y_i F_i``, computed from scratch."""
    y = np.asarray(y, dtype=float)
    if y.shape != (problem.n_vars,):
        raise ValueError(f"y must have shape ({problem.n_vars},)")
    mins = [float(np.linalg.eigvalsh(b.matrix(y))[0]) for b in problem.blocks]
    return FeasibilityReport(mins, tol)


def certify_infeasible(problem: SdpProblem, dual: list[np.ndarray], tol: float = 1e-7) -> bool:
    """Check a Farkas ray: ``W >= 0``, ``Tr[F_i W] = 0`` for all i, ``Tr[F0 W] < 0``."""
    t0 = sum(float(np.vdot(b.F0, W)) for b, W in zip(problem.blocks, dual))
    if not t0 < 0:
        return False
    W = [w / -t0 for w in dual]
    if any(np.linalg.eigvalsh(w)[0] < -tol for w in W):
        return False
    for i in range(problem.n_vars):
        num = sum(float(np.vdot(b.Fs[i], w)) for b, w in zip(problem.blocks, W))
        den = np.sqrt(sum(float(np.vdot(b.Fs[i], b.Fs[i])) for b in problem.blocks))
        if abs(num) > tol * max(den, 1.0):
            return False
    return True


def certify_unbounded(problem: SdpProblem, ray, tol: float = 1e-7) -> bool:
    """Check an improving ray: ``b . d < 0`` and ``sum d_i F_i >= 0``."""
    ray = np.asarray(ray, dtype=float)
    bd = float(problem.objective @ ray)
    if not bd < 0:
        return False
    ray = ray / -bd
    for b in problem.blocks:
        if np.linalg.eigvalsh(np.tensordot(ray, b.Fs, axes=1))[0] < -tol:
            return False
    return True


class _Groups:
    """Blocks of equal size stacked for batched linear algebra.

    Each group holds an array ``F`` of shape ``(nb, n + 1, d, d)`` whose last
    coefficient slot is F0.
    """

    def __init__(self, F0s, Fss):
        by_size: dict[int, list[int]] = {}
        for k, F0 in enumerate(F0s):
            by_size.setdefault(F0.shape[0], []).append(k)
        self.order = [k for d in sorted(by_size) for k in by_size[d]]
        self.F = []
        for d in sorted(by_size):
            ks = by_size[d]
            self.F.append(np.stack([np.concatenate([Fss[k], F0s[k][None]], axis=0) for k in ks]))
        self.dims = [F.shape[2] for F in self.F]
        self.dim_total = sum(F.shape[0] * F.shape[2] for F in self.F)
        # (n + 1, total) flattening for A(X) and F(y)
        self.flat = np.concatenate(
            [F.transpose(1, 0, 2, 3).reshape(F.shape[1], -1) for F in self.F], axis=1
        )
        self.shapes = [(F.shape[0], F.shape[2], F.shape[2]) for F in self.F]
        self.F0 = [F[:, -1] for F in self.F]
        # coefficient matrices as (n, nb, d, d) for the Schur complement
        self.Fv = [np.ascontiguousarray(F[:, :-1].transpose(1, 0, 2, 3)) for F in self.F]
        ends = np.cumsum([int(np.prod(sh)) for sh in self.shapes])
        self.spans = [slice(int(a), int(e)) for a, e in zip(np.r_[0, ends[:-1]], ends)]

    def identity(self):
        return [np.broadcast_to(np.eye(sh[1]), sh).copy() for sh in self.shapes]

    def apply(self, X):
        """Vector ``Tr[F_i X]`` for i = 0..n (F0 last)."""
        if len(X) == 1:
            return self.flat @ X[0].ravel()
        return self.flat @ np.concatenate([x.ravel() for x in X])

    def combine(self, v):
        """Blocks ``sum_i v_i F_i`` (v has n + 1 entries, F0 last)."""
        flat = v @ self.flat
        return [flat[sp].reshape(sh) for sp, sh in zip(self.spans, self.shapes)]

    def ungroup(self, X):
        out = [None] * len(self.order)
        flat = [blk for group in X for blk in group]
        for pos, k in enumerate(self.order):
            out[k] = flat[pos]
        return out


def _inner(X, S):
    return sum(float(np.vdot(x, s)) for x, s in zip(X, S))


def _sym(A):
    return 0.5 * (A + A.swapaxes(-1, -2))


def _inv_factor(A):
    """Batched R with ``R^T A R = I``, or None if some matrix is not PD."""
    try:
        return np.linalg.inv(np.linalg.cholesky(A)).swapaxes(-1, -2)
    except np.linalg.LinAlgError:
        return None


def _max_step(R, D):
    """Largest alpha with ``A + alpha D`` PSD for every A given by R (inf if none)."""
    amax = np.inf
    for r, d in zip(R, D):
        lam = np.linalg.eigvalsh(r.swapaxes(-1, -2) @ d @ r).min()
        if lam < 0:
            amax = min(amax, -1.0 / lam)
    return amax


def _scalar_step(v, dv):
    return -v / dv if dv < 0 else np.inf


def solve(problem: SdpProblem, options: SdpOptions | None = None) -> SdpSolution:
    """Minimize ``objective . y`` subject to every block being PSD."""
    opts = options or SdpOptions()
    n = problem.n_vars
    b = problem.objective

    # Orthonormal reparametrization y = T w of the coefficient map; removes
    # redundant directions and normalizes the F matrices.
    A = np.concatenate([blk.Fs.reshape(n, -1) for blk in problem.blocks], axis=1).T
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > opts.rank_tol * max(sv[0] if sv.size else 0.0, 1e-300)))
    T = Vt[:rank].T / sv[:rank]
    b_red = T.T @ b
    b_null = b - Vt[:rank].T @ (Vt[:rank] @ b)
    null_unbounded = np.linalg.norm(b_null) > 1e-9 * max(np.linalg.norm(b), 1.0)

    F0s = [blk.F0 for blk in problem.blocks]
    Fss = []
    offset = 0
    for blk in problem.blocks:
        d = blk.size
        Fss.append(U[offset:offset + d * d, :rank].T.reshape(rank, d, d))
        offset += d * d

    if rank == 0:
        report = feasibility_check(problem, np.zeros(n), opts.feas_tol)
        if report.feasible:
            status = Status.UNBOUNDED if null_unbounded else Status.OPTIMAL
            return SdpSolution(status, np.zeros(n), 0.0, 0.0, max(0.0, -report.min_eig), 0)
        dual = [np.eye(F.shape[0]) * (np.linalg.eigvalsh(F)[0] < 0) for F in F0s]
        return SdpSolution(Status.INFEASIBLE, np.zeros(n), np.nan, np.nan, np.nan, 0, dual)

    res = _hsde(F0s, Fss, b_red, opts)
    G = res["groups"]
    dual = G.ungroup(res["X"])
    tau = res["tau"]

    if res["status"] is Status.OPTIMAL:
        y = T @ (res["w"] / tau)
        report = feasibility_check(problem, y, opts.feas_tol)
        sol = SdpSolution(
            Status.OPTIMAL,
            y,
            float(b @ y),
            res["gap"],
            max(0.0, -report.min_eig),
            res["iterations"],
            [W / tau for W in dual],
        )
        if null_unbounded:
            sol.status = Status.UNBOUNDED
            sol.certificate = b_null
        return sol
    if res["status"] is Status.INFEASIBLE and certify_infeasible(problem, dual, opts.cert_tol):
        return SdpSolution(Status.INFEASIBLE, np.full(n, np.nan), np.nan, np.nan, np.nan,
                           res["iterations"], dual, certificate=dual)
    if res["status"] is Status.UNBOUNDED:
        ray = T @ res["w"]
        if certify_unbounded(problem, ray, opts.cert_tol):
            return SdpSolution(Status.UNBOUNDED, ray, -np.inf, np.nan, np.nan,
                               res["iterations"], certificate=ray)
    # best iterate found; callers may still verify it with feasibility_check
    y = T @ (res["w"] / tau) if tau > 0 else np.full(n, np.nan)
    violation = np.nan
    if np.all(np.isfinite(y)):
        violation = max(0.0, -feasibility_check(problem, y, opts.feas_tol).min_eig)
    return SdpSolution(Status.NUMERICAL_TROUBLE, y, float(b @ y), res["gap"], violation,
                       res["iterations"], dual)


def _hsde(F0s, Fss, b, opts):
    G = _Groups(F0s, Fss)
    n = b.size
    D = G.dim_total
    X = G.identity()
    S = G.identity()
    w = np.zeros(n)
    tau = kappa = 1.0
    F0norm = np.sqrt(sum(float(np.vdot(F, F)) for F in F0s))
    bnorm = np.linalg.norm(b)

    status = Status.NUMERICAL_TROUBLE
    gap = np.nan
    it = 0
    best = None
    best_merit = np.inf
    since_best = 0
    for it in range(1, opts.max_iter + 1):
        AX = G.apply(X)
        Fw = G.combine(np.concatenate((w, [tau])))
        Rp = b * tau - AX[:n]
        Rd = [f - s for f, s in zip(Fw, S)]
        pobj_t = float(b @ w)
        dobj_t = -AX[n]
        Rg = -pobj_t - AX[n] - kappa
        xs = _inner(X, S)
        mu = (xs + tau * kappa) / (D + 1)

        pres = np.linalg.norm(Rp) / tau / (1.0 + bnorm)
        dres = np.sqrt(_inner(Rd, Rd)) / tau / (1.0 + F0norm)
        pobj = pobj_t / tau
        dobj = dobj_t / tau
        gap = abs(pobj - dobj)
        if pres <= opts.feas_tol and dres <= opts.feas_tol and gap <= opts.gap_tol * (1 + abs(pobj)):
            status = Status.OPTIMAL
            break
        # Near the optimum rounding can make the iterates drift; remember the
        # best point and give up once nothing improves for a while.
        merit = max(pres / opts.feas_tol, dres / opts.feas_tol,
                    gap / (opts.gap_tol * (1 + abs(pobj))))
        if merit < 0.5 * best_merit:
            best_merit, since_best = merit, 0
            best = (w.copy(), [x.copy() for x in X], tau, gap)
        else:
            since_best += 1
            if since_best >= opts.stall_iter:
                break
        # infeasibility: Tr[F0 X] < 0 with A(X) ~ 0
        if AX[n] < 0 and np.linalg.norm(AX[:n]) <= opts.cert_tol * -AX[n] * 1e-1:
            status = Status.INFEASIBLE
            break
        # unboundedness: b.w < 0 with F(w) ~ PSD
        if pobj_t < 0:
            # F(w) - S = Rd - tau F0
            err = np.sqrt(sum(float(np.vdot(r - tau * f0, r - tau * f0))
                              for r, f0 in zip(Rd, G.F0)))
            if err <= opts.cert_tol * -pobj_t * 1e-1:
                status = Status.UNBOUNDED
                break

        # inverse Cholesky factors of X and S, stacked per group
        R = [_inv_factor(np.concatenate([x, s_])) for x, s_ in zip(X, S)]
        if any(r is None for r in R):
            break
        Sinv = [r[len(x):] @ r[len(x):].swapaxes(-1, -2) for r, x in zip(R, X)]
        # F0 is eliminated through F0 = (S + Rd - F(w)) / tau, i.e. the
        # system is solved for dv = dw - w dtau / tau; forming Tr[F_i X F0 S^-1]
        # directly cancels catastrophically near the optimum.
        St = [s + r for s, r in zip(S, Rd)]
        M = np.zeros((n, n))
        for Fv, x, si in zip(G.Fv, X, Sinv):
            FX = (Fv @ x).reshape(n, -1)
            SiF = (si @ Fv).reshape(n, -1)
            M += FX @ SiF.T
        XStSi = [x @ st @ si for x, st, si in zip(X, St, Sinv)]
        g = G.apply(XStSi)[:n] / tau
        h = _inner(St, XStSi) / tau**2
        L = np.empty((n + 1, n + 1))
        L[:n, :n] = M
        L[:n, n] = g + b
        L[n, :n] = b - g
        L[n, n] = -h - kappa / tau
        try:
            lu = sla.lu_factor(L, check_finite=False)
        except (ValueError, sla.LinAlgError):
            break
        if not np.all(np.isfinite(lu[0])) or np.min(np.abs(np.diag(lu[0]))) == 0:
            break
        XRdSi = [x @ r @ si for x, r, si in zip(X, Rd, Sinv)]

        def direction(eta, K, tk):
            KK = [k - eta * q for k, q in zip(K, XRdSi)]
            r1 = G.apply(KK)[:n] - eta * Rp
            r2 = eta * Rg - _inner(St, KK) / tau - tk / tau + eta * float(w @ Rp) / tau
            sol = sla.lu_solve(lu, np.concatenate((r1, [r2])), check_finite=False)
            dtau = sol[n]
            dw = sol[:n] + w * (dtau / tau)
            dS = [c + eta * r for c, r in zip(G.combine(np.concatenate((dw, [dtau]))), Rd)]
            dX = [_sym(k - x @ ds @ si) for k, x, ds, si in zip(K, X, dS, Sinv)]
            dkappa = (tk - kappa * dtau) / tau
            return dw, dX, dS, dtau, dkappa

        def step_to_boundary(dX, dS, dtau, dkappa):
            D_ = [np.concatenate([dx, ds]) for dx, ds in zip(dX, dS)]
            return min(_max_step(R, D_),
                       _scalar_step(tau, dtau), _scalar_step(kappa, dkappa))

        # predictor
        Ka = [-x for x in X]
        dwa, dXa, dSa, dta, dka = direction(1.0, Ka, -tau * kappa)
        aa = min(1.0, step_to_boundary(dXa, dSa, dta, dka))
        mu_a = (_inner([x + aa * dx for x, dx in zip(X, dXa)],
                       [s + aa * ds for s, ds in zip(S, dSa)])
                + (tau + aa * dta) * (kappa + aa * dka)) / (D + 1)
        sigma = min(1.0, max(0.0, mu_a / mu)) ** 3

        # corrector
        Kc = [sigma * mu * si - x - dxa @ dsa @ si
              for si, x, dxa, dsa in zip(Sinv, X, dXa, dSa)]
        tk = sigma * mu - tau * kappa - dta * dka
        dw, dX, dS, dtau, dkappa = direction(1.0 - sigma, Kc, tk)
        alpha = min(1.0, opts.step_frac * step_to_boundary(dX, dS, dtau, dkappa))
        if not np.isfinite(alpha) or alpha < 1e-12:
            break

        w = w + alpha * dw
        X = [_sym(x + alpha * dx) for x, dx in zip(X, dX)]
        S = [_sym(s + alpha * ds) for s, ds in zip(S, dS)]
        tau += alpha * dtau
        kappa += alpha * dkappa

        # keep the iterate scale bounded; the embedding is homogeneous
        scale = tau + kappa
        if scale > 1e6 or scale < 1e-6:
            w /= scale
            X = [x / scale for x in X]
            S = [s / scale for s in S]
            tau /= scale
            kappa /= scale
    if status is Status.NUMERICAL_TROUBLE and best is not None:
        w, X, tau, gap = best
    return {"status": status, "w": w, "X": X, "tau": tau, "gap": gap,
            "iterations": it, "groups": G}
