"""Finite-statistics layer for Gaussian homodyne data.

For Gaussian quadratures the Bessel-corrected sample variance satisfies
``(n - 1) P / m ~ chi^2_{n-1}``, so its standard error is ``m sqrt(2/(n-1))``.
Propagated through a witness with fixed coefficients c this gives
``dZ = sqrt(2/(n-1)) * sqrt(sum c_i^2 m_i^2)`` for equal repetition counts.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .homodyne import MeasurementSetting, variance
from .witness import (
    INFEASIBLE,
    MeasurementRecord,
    WitnessOptions,
    WitnessProblem,
    optimize_robust,
)


@dataclass(frozen=True)
class HomodyneSample:
    setting: MeasurementSetting
    outcomes: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "outcomes", np.asarray(self.outcomes, dtype=float))

    @property
    def n(self) -> int:
        return self.outcomes.size

    def halves(self) -> tuple["HomodyneSample", "HomodyneSample"]:
        k = self.n // 2
        return (HomodyneSample(self.setting, self.outcomes[:k]),
                HomodyneSample(self.setting, self.outcomes[k:]))


@dataclass(frozen=True)
class VarianceEstimate:
    mean: float
    variance: float
    n: int
    stderr: float


@dataclass
class WitnessEstimate:
    value: float
    error: float
    ksigma: float = 3.0
    c: np.ndarray | None = None
    status: str = ""
    variances: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def upper(self) -> float:
        """Upper end of the ``ksigma`` confidence interval."""
        return self.value + self.ksigma * self.error


def sample_variance(outcomes, true_variance: float | None = None) -> VarianceEstimate:
    """Mean and Bessel-corrected variance.

    The standard error uses the estimate itself (plug-in) unless the true
    variance is supplied.
    """
    x = np.asarray(outcomes, dtype=float).ravel()
    n = x.size
    if n < 2:
        raise ValueError("need at least two outcomes for a sample variance")
    var = float(np.var(x, ddof=1))
    scale = var if true_variance is None else float(true_variance)
    return VarianceEstimate(float(x.mean()), var, n, scale * math.sqrt(2.0 / (n - 1)))


def simulate_homodyne(gamma, setting: MeasurementSetting, n: int, rng) -> HomodyneSample:
    """n zero-mean Gaussian quadrature readings with variance ``Tr[P gamma]``."""
    if n < 1:
        raise ValueError("n must be positive")
    sd = math.sqrt(variance(gamma, setting))
    return HomodyneSample(setting, rng.normal(0.0, sd, n))


def witness_error(c, m, n: int, ksigma: float = 3.0) -> WitnessEstimate:
    """Error of ``sum c_i P_i`` when every setting is repeated n times."""
    if n < 2:
        raise ValueError("need n >= 2 repetitions")
    c = np.asarray(c, dtype=float)
    m = np.asarray(m, dtype=float)
    err = math.sqrt(2.0 / (n - 1)) * math.sqrt(float(np.sum(c**2 * m**2)))
    return WitnessEstimate(float(c @ m), err, ksigma, c)


def upper_confidence(w: float, c, m, n, ksigma: float = 3.0):
    """``w + ksigma * dZ(n)`` for scalar or array n."""
    s = math.sqrt(float(np.sum(np.asarray(c, float) ** 2 * np.asarray(m, float) ** 2)))
    n = np.asarray(n, dtype=float)
    return w + ksigma * np.sqrt(2.0 / (n - 1)) * s


def repetitions_for_confidence(w: float, c, m, ksigma: float = 3.0) -> int:
    """Smallest n with ``w + ksigma * dZ(n) < 1``."""
    if not w < 1:
        raise ValueError(f"witness value {w} >= 1 cannot certify entanglement at any n")
    s2 = float(np.sum(np.asarray(c, float) ** 2 * np.asarray(m, float) ** 2))
    n = max(2, int(math.floor(2 * ksigma**2 * s2 / (1 - w) ** 2)) + 2)

    def passes(k):
        return k >= 2 and upper_confidence(w, c, m, k, ksigma) < 1

    # settle rounding at the threshold so that n passes and n - 1 does not
    while passes(n - 1):
        n -= 1
    while not passes(n):
        n += 1
    return n


def confidence_csv(n_values, upper) -> str:
    buf = io.StringIO()
    buf.write("n,upper_confidence\n")
    for n, u in zip(n_values, upper):
        buf.write(f"{int(n)},{u:.12g}\n")
    return buf.getvalue()


def evaluate_split(samples: Sequence[HomodyneSample], settings: Sequence[MeasurementSetting],
                   partition, ksigma: float = 3.0,
                   options: WitnessOptions | None = None) -> WitnessEstimate:
    """Coefficients from the first half of the data, value from the second.

    Using independent halves keeps the coefficients statistically independent
    of the variances they multiply. The coefficients minimize the upper bound
    the second half is expected to produce, which stops them from fitting
    first-half noise.
    """
    firsts, seconds = zip(*(s.halves() for s in samples))
    fit = [sample_variance(h.outcomes).variance for h in firsts]
    n2 = min(h.n for h in seconds)
    kappa = ksigma * math.sqrt(2.0 / (n2 - 1))
    problem = WitnessProblem([MeasurementRecord(s, v) for s, v in zip(settings, fit)], partition)
    res = optimize_robust(problem, kappa, options)
    P = np.array([sample_variance(h.outcomes).variance for h in seconds])
    if res.c is None:
        return WitnessEstimate(np.inf, np.inf, ksigma, None, res.status or INFEASIBLE, P)
    # plug-in variances for the error come from the first half too; taking
    # them from the second half correlates dZ with Z and undercovers
    dP = np.array([sample_variance(h.outcomes, v).stderr for h, v in zip(seconds, fit)])
    value = float(res.c @ P)
    err = float(np.sqrt(np.sum(res.c**2 * dP**2)))
    return WitnessEstimate(value, err, ksigma, res.c, res.status, P)


def split_evaluate(gamma, settings: Sequence[MeasurementSetting], n_total: int, rng,
                   partition, ksigma: float = 3.0) -> WitnessEstimate:
    """Simulate ``n_total`` readings per setting and evaluate on split halves."""
    if n_total < 4:
        raise ValueError("need at least 4 readings per setting to split")
    samples = [simulate_homodyne(gamma, s, n_total, rng) for s in settings]
    return evaluate_split(samples, settings, partition, ksigma)
