"""Sequential random-measurement detection and its Monte-Carlo statistics.

A trial draws uniformly random homodyne settings one by one, re-optimizes the
witness after each, and stops at the first setting count for which the
witness value drops below one (or at the setting budget).
"""

from __future__ import annotations

import io
import json
import subprocess
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .homodyne import MeasurementSetting, sample_setting, tomographic_count, variance
from .states import (
    RandomStateConfig,
    bound_entangled_4mode,
    draw_random_state,
    log_negativity,
    squeezed_vacuum,
)
from .symplectic import check_partition, n_modes_of
from .witness import (
    NUMERICAL_TROUBLE,
    MeasurementRecord,
    WitnessOptions,
    WitnessProblem,
    optimize,
)

SEQUENTIAL = "sequential"
BISECT = "bisect"
E_BIN_WIDTH = 0.25


def trial_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for one trial, derived from the master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def default_partition(n_modes: int) -> tuple[int, ...]:
    half = n_modes // 2
    return (half, n_modes - half) if n_modes > 1 else (1,)


@dataclass(frozen=True)
class DetectionConfig:
    partition: tuple[int, ...] | None = None
    max_settings: int | None = None  # default 2 * tomographic count
    detect_tol: float = 1e-7
    noise: int | None = None  # repetitions per setting; None = exact variances
    ksigma: float = 3.0  # confidence multiplier used with noise
    seed: int = 0
    # With exact data the witness value never increases when a setting is
    # added, so the first detecting count can be found by bisection over the
    # pre-drawn setting sequence.  Noisy data always runs sequentially.
    search: str = BISECT

    def __post_init__(self):
        if self.max_settings is not None and self.max_settings < 2:
            raise ValueError("max_settings must be >= 2")
        if self.noise is not None and self.noise < 4:
            raise ValueError("noise needs at least 4 repetitions per setting")
        if self.search not in (SEQUENTIAL, BISECT):
            raise ValueError(f"unknown search mode {self.search!r}")

    def resolve(self, n_modes: int) -> tuple[tuple[int, ...], int]:
        parts = check_partition(self.partition or default_partition(n_modes), n_modes)
        cap = self.max_settings or 2 * tomographic_count(n_modes)
        return parts, cap


@dataclass
class DetectionRecord:
    detected: bool
    settings_used: int
    value: float
    E: float | None
    trial: tuple[int, ...] = ()
    settings: tuple[MeasurementSetting, ...] = ()
    variances: tuple[float, ...] = ()
    troubles: int = 0

    def to_dict(self, with_settings: bool = False) -> dict:
        out = {
            "detected": self.detected,
            "settings_used": self.settings_used,
            "value": None if not np.isfinite(self.value) else float(self.value),
            "E": self.E,
            "trial": list(self.trial),
            "troubles": self.troubles,
        }
        if with_settings:
            out["settings"] = [s.to_dict() for s in self.settings]
            out["variances"] = list(self.variances)
        return out


def _entanglement(gamma) -> float | None:
    return log_negativity(gamma).E if n_modes_of(gamma) == 2 else None


def detect(gamma, config: DetectionConfig | None = None, rng=None,
           trial: tuple[int, ...] = ()) -> DetectionRecord:
    """Run the random-measurement protocol on one state."""
    config = config or DetectionConfig()
    gamma = np.asarray(gamma, dtype=float)
    n = n_modes_of(gamma)
    parts, cap = config.resolve(n)
    rng = np.random.default_rng(config.seed if rng is None else rng)
    opts = WitnessOptions(detect_tol=config.detect_tol)
    if config.noise is not None:
        return _detect_noisy(gamma, parts, cap, config, rng, trial)

    settings = [sample_setting(n, rng) for _ in range(cap)]
    records = [MeasurementRecord(s, variance(gamma, s)) for s in settings]
    results: dict[int, object] = {}

    def probe(j: int) -> bool:
        if j not in results:
            results[j] = optimize(WitnessProblem(records[:j], parts), opts)
        return results[j].detected

    if config.search == SEQUENTIAL:
        hit = next((j for j in range(1, cap + 1) if probe(j)), None)
    else:
        hit = _first_hit(probe, min(tomographic_count(n), cap), cap)
    used = hit if hit is not None else cap
    res = results[used] if used in results else results[max(results)]
    troubles = sum(r.status == NUMERICAL_TROUBLE for r in results.values())
    return DetectionRecord(
        detected=hit is not None,
        settings_used=used,
        value=float(res.value),
        E=_entanglement(gamma),
        trial=tuple(trial),
        settings=tuple(settings[:used]),
        variances=tuple(r.m for r in records[:used]),
        troubles=troubles,
    )


def _first_hit(probe, first: int, cap: int) -> int | None:
    """Smallest j in [2, cap] with probe(j) true, assuming monotonicity."""
    if probe(first):
        lo, hi = 1, first
    elif first < cap and probe(cap):
        lo, hi = first, cap
    else:
        return None
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if probe(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _detect_noisy(gamma, parts, cap, config, rng, trial) -> DetectionRecord:
    from .stats import evaluate_split, simulate_homodyne

    n = n_modes_of(gamma)
    settings, samples = [], []
    est = None
    troubles = 0
    for j in range(1, cap + 1):
        s = sample_setting(n, rng)
        settings.append(s)
        samples.append(simulate_homodyne(gamma, s, config.noise, rng))
        est = evaluate_split(samples, settings, parts, config.ksigma)
        troubles += est.status == NUMERICAL_TROUBLE
        if est.upper < 1.0 - config.detect_tol:
            return DetectionRecord(True, j, est.value, _entanglement(gamma), tuple(trial),
                                   tuple(settings), tuple(est.variances), troubles)
    value = est.value if est is not None else np.inf
    return DetectionRecord(False, cap, value, _entanglement(gamma), tuple(trial),
                           tuple(settings), tuple(est.variances), troubles)


# ---- Monte-Carlo families ---------------------------------------------------

SQUEEZED = "squeezed"
RANDOM = "random"
BOUND4 = "bound4"


@dataclass(frozen=True)
class Family:
    """State family for Monte-Carlo runs.

    ``squeezed`` runs ``trials`` per squeezing value in ``r_values``; ``random``
    draws entangled CMs from ``random_config``; ``bound4`` repeats the fixed
    four-mode bound-entangled state.
    """

    kind: str
    r_values: tuple[float, ...] = (0.2, 1.0, 1.8)
    random_config: RandomStateConfig = field(default_factory=RandomStateConfig)

    def __post_init__(self):
        if self.kind not in (SQUEEZED, RANDOM, BOUND4):
            raise ValueError(f"unknown family {self.kind!r}")
        object.__setattr__(self, "r_values", tuple(float(r) for r in self.r_values))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r_values": list(self.r_values),
                "random_config": asdict(self.random_config)}


def draw_entangled(config: RandomStateConfig, rng, max_draws: int = 10_000) -> np.ndarray:
    """Random two-mode CM with positive log negativity (separable draws rejected)."""
    for _ in range(max_draws):
        gamma = draw_random_state(config, rng).gamma
        if log_negativity(gamma).E > 0:
            return gamma
    raise RuntimeError("no entangled state found; check the random-state configuration")


@dataclass
class HistogramTable:
    """Detected-trial counts binned by entanglement and by settings used.

    Row i of ``counts`` is the entanglement bin ``e_bins[i]`` (NaN for states
    without a two-mode log negativity); column s - 1 counts trials first
    detected with s settings.
    """

    kind: str
    e_bins: np.ndarray
    max_settings: int
    counts: np.ndarray
    undetected: np.ndarray
    records: list[DetectionRecord] = field(default_factory=list, repr=False)

    def fractions(self) -> np.ndarray:
        """Counts normalized per entanglement bin (rows sum to 1 when nonempty)."""
        tot = self.counts.sum(axis=1, keepdims=True)
        return self.counts / np.maximum(tot, 1)

    def settings_used(self) -> np.ndarray:
        return np.array([r.settings_used for r in self.records if r.detected], dtype=int)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("E_bin,settings,fraction\n")
        frac = self.fractions()
        for i, e in enumerate(self.e_bins):
            for s in np.flatnonzero(self.counts[i]):
                buf.write(f"{e:.6g},{s + 1},{frac[i, s]:.12g}\n")
        return buf.getvalue()

    def summary(self) -> dict:
        used = self.settings_used()
        return {
            "trials": len(self.records),
            "detected": int(used.size),
            "mean_settings": float(used.mean()) if used.size else None,
            "undetected": self.undetected.tolist(),
            "troubles": int(sum(r.troubles for r in self.records)),
        }


def entanglement_bin(kind: str, E: float | None) -> float:
    if E is None:
        return float("nan")
    if kind == SQUEEZED:
        return round(E, 12)
    return E_BIN_WIDTH * np.floor(E / E_BIN_WIDTH)


def _row_of(e_bins, label) -> int:
    if np.isnan(label):
        return int(np.flatnonzero(np.isnan(e_bins))[0])
    return int(np.flatnonzero(e_bins == label)[0])


def build_table(kind: str, records: Sequence[DetectionRecord], max_settings: int) -> HistogramTable:
    labels = np.array([entanglement_bin(kind, r.E) for r in records])
    e_bins = np.unique(labels[~np.isnan(labels)])
    if np.isnan(labels).any():
        e_bins = np.append(e_bins, np.nan)
    counts = np.zeros((e_bins.size, max_settings), dtype=int)
    undetected = np.zeros(e_bins.size, dtype=int)
    for rec, lab in zip(records, labels):
        row = _row_of(e_bins, lab)
        if rec.detected:
            counts[row, rec.settings_used - 1] += 1
        else:
            undetected[row] += 1
    return HistogramTable(kind, e_bins, max_settings, counts, undetected, list(records))


def _run_trial(family: Family, config: DetectionConfig, key: tuple[int, ...]) -> DetectionRecord:
    rng = trial_rng(config.seed, *key)
    if family.kind == SQUEEZED:
        gamma = squeezed_vacuum(family.r_values[key[0]])
    elif family.kind == RANDOM:
        gamma = draw_entangled(family.random_config, rng)
    else:
        gamma = bound_entangled_4mode()
    return detect(gamma, config, rng, trial=key)


def montecarlo(family: Family, trials: int, config: DetectionConfig | None = None,
               progress=None, workers: int = 1) -> HistogramTable:
    """Run detection trials and bin them by entanglement and settings used.

    For the squeezed family ``trials`` is per squeezing value.  Trial k of
    group g uses the stream derived from ``(seed, g, k)`` so the table does
    not depend on execution order or on ``workers``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    config = config or DetectionConfig()
    groups = len(family.r_values) if family.kind == SQUEEZED else 1
    n_modes = 4 if family.kind == BOUND4 else (
        2 if family.kind == SQUEEZED else family.random_config.modes)
    if family.kind == RANDOM and n_modes != 2:
        raise ValueError("the random family is binned by log negativity and needs 2 modes")
    _, cap = config.resolve(n_modes)

    keys = [(g, k) for g in range(groups) for k in range(trials)]
    run = partial(_run_trial, family, config)
    records = []
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = pool.map(run, keys, chunksize=max(1, len(keys) // (8 * workers)))
            for rec in results:
                records.append(rec)
                if progress is not None:
                    progress(len(records))
    else:
        for key in keys:
            records.append(run(key))
            if progress is not None:
                progress(len(records))

    return build_table(family.kind, records, cap)


def median_settings_vs_entanglement(table: HistogramTable) -> list[tuple[float, float]]:
    """Median settings used per entanglement bin (empty bins omitted)."""
    out = []
    for i, e in enumerate(table.e_bins):
        row = table.counts[i]
        if row.sum() == 0:
            continue
        used = np.repeat(np.arange(1, table.max_settings + 1), row)
        out.append((float(e), float(np.median(used))))
    return out


@lru_cache(maxsize=1)
def build_version() -> str:
    """Package version, plus ``git describe`` output when run from a checkout."""
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"], cwd=Path(__file__).parent,
            capture_output=True, text=True, timeout=5, check=True,
        ).stdout.strip()
    except (OSError, subprocess.SubprocessError):
        desc = ""
    return f"{__version__}+{desc}" if desc else __version__


def manifest(command: str, config: dict, seed: int, started: float | None = None) -> dict:
    """Run manifest: enough to replay the command."""
    out = {"command": command, "config": config, "seed": seed, "version": build_version()}
    if started is not None:
        out["wall_clock_s"] = round(time.time() - started, 3)
    return out


def table_manifest(family: Family, trials: int, config: DetectionConfig,
                   table: HistogramTable) -> dict:
    cfg = {"family": family.to_dict(), "trials": trials, "detection": asdict(config)}
    return {**manifest("montecarlo", cfg, config.seed), "summary": table.summary()}


def records_to_json(records: Sequence[DetectionRecord]) -> str:
    return json.dumps([r.to_dict() for r in records])
