"""Benchmark covariance matrices and two-mode entanglement diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .symplectic import GROUPED, INTERLEAVED, n_modes_of, reorder_quadratures

DISCRIMINANT_TOL = 1e-10


@dataclass(frozen=True)
class RandomStateConfig:
    """Thermal seed with symplectic eigenvalues in ``[nu_lo, nu_hi]``, dressed by
    a random symplectic ``K [squeezers] L`` with squeezing in ``[0, r_max]``."""

    modes: int = 2
    nu_lo: float = 1.0
    nu_hi: float = 5.0
    r_max: float = 2.0
    seed: int | None = None

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError("modes must be >= 1")
        if self.nu_lo < 1.0 or self.nu_hi < self.nu_lo:
            raise ValueError(f"need 1 <= nu_lo <= nu_hi, got [{self.nu_lo}, {self.nu_hi}]")
        if self.r_max < 0:
            raise ValueError("r_max must be nonnegative")


@dataclass(frozen=True)
class RandomState:
    gamma: np.ndarray
    nu: np.ndarray
    r: np.ndarray


@dataclass(frozen=True)
class NegativityReport:
    f: float
    E: float


def squeezed_vacuum(r: float) -> np.ndarray:
    """Two-mode squeezed vacuum covariance matrix."""
    c, s = np.cosh(2 * r), np.sinh(2 * r)
    return np.array(
        [
            [c, 0, s, 0],
            [0, c, 0, -s],
            [s, 0, c, 0],
            [0, -s, 0, c],
        ],
        dtype=float,
    )


def thermal(nu) -> np.ndarray:
    return np.diag(np.repeat(np.asarray(nu, dtype=float), 2))


def single_mode_squeezer(r: float) -> np.ndarray:
    return np.diag([np.exp(-r), np.exp(r)])


def haar_unitary(n: int, rng) -> np.ndarray:
    """Haar-random U(n) element: QR of a complex Ginibre matrix, R-phases fixed."""
    rng = np.random.default_rng(rng)
    Z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def passive_symplectic(U: np.ndarray) -> np.ndarray:
    """Orthogonal symplectic matrix of the unitary ``U = X - iY`` (interleaved order)."""
    U = np.asarray(U, dtype=complex)
    X, Y = U.real, -U.imag
    S = np.block([[X, Y], [-Y, X]])
    return reorder_quadratures(S, GROUPED, INTERLEAVED)


def haar_orthosymplectic(n: int, rng=None) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return passive_symplectic(haar_unitary(n, rng))


def draw_random_state(config: RandomStateConfig, rng=None) -> RandomState:
    rng = np.random.default_rng(config.seed if rng is None else rng)
    n = config.modes
    nu = rng.uniform(config.nu_lo, config.nu_hi, n)
    r = rng.uniform(0.0, config.r_max, n)
    K = haar_orthosymplectic(n, rng)
    L = haar_orthosymplectic(n, rng)
    sq = np.zeros((2 * n, 2 * n))
    for i, ri in enumerate(r):
        sq[2 * i:2 * i + 2, 2 * i:2 * i + 2] = single_mode_squeezer(ri)
    S = K @ sq @ L
    gamma = S @ thermal(nu) @ S.T
    return RandomState(0.5 * (gamma + gamma.T), nu, r)


def random_covariance(config: RandomStateConfig, rng=None) -> np.ndarray:
    return draw_random_state(config, rng).gamma


def random_product_covariance(n_modes: int, rng, nu_hi: float = 5.0, r_max: float = 2.0):
    """Direct sum of independent random one-mode covariance matrices."""
    rng = np.random.default_rng(rng)
    cfg = RandomStateConfig(modes=1, nu_hi=nu_hi, r_max=r_max)
    gamma = np.zeros((2 * n_modes, 2 * n_modes))
    for k in range(n_modes):
        gamma[2 * k:2 * k + 2, 2 * k:2 * k + 2] = random_covariance(cfg, rng)
    return gamma


def bound_entangled_4mode() -> np.ndarray:
    """Four-mode CM that is PPT across {1,2}|{3,4} yet entangled."""
    return np.array(
        [
            [2, 0, 0, 0, 1, 0, 0, 0],
            [0, 1, 0, 0, 0, 0, 0, -1],
            [0, 0, 2, 0, 0, 0, -1, 0],
            [0, 0, 0, 1, 0, -1, 0, 0],
            [1, 0, 0, 0, 2, 0, 0, 0],
            [0, 0, 0, -1, 0, 4, 0, 0],
            [0, 0, -1, 0, 0, 0, 2, 0],
            [0, -1, 0, 0, 0, 0, 0, 4],
        ],
        dtype=float,
    )


def log_negativity(gamma) -> NegativityReport:
    """Logarithmic negativity (bits) of a two-mode covariance matrix."""
    gamma = np.asarray(gamma, dtype=float)
    if n_modes_of(gamma) != 2:
        raise ValueError("log_negativity needs a two-mode covariance matrix")
    g1, g2, eps = gamma[:2, :2], gamma[2:, 2:], gamma[:2, 2:]
    delta = 0.5 * (np.linalg.det(g1) + np.linalg.det(g2)) - np.linalg.det(eps)
    disc = delta**2 - np.linalg.det(gamma)
    if disc < -DISCRIMINANT_TOL * max(1.0, delta**2):
        raise ArithmeticError(f"negative discriminant {disc:.3e}; is gamma physical?")
    f = delta - np.sqrt(max(disc, 0.0))
    if f <= 0:
        raise ArithmeticError(f"nonpositive f = {f:.3e}; is gamma physical?")
    return NegativityReport(float(f), float(max(0.0, -0.5 * np.log2(f))))


def squeezing_db(r: float) -> float:
    return float(10 * np.log10(np.exp(2 * r)))
