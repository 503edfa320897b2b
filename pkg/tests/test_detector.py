import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import seeds
from cvwitness.detector import (
    BISECT,
    BOUND4,
    RANDOM,
    SEQUENTIAL,
    SQUEEZED,
    DetectionConfig,
    Family,
    build_table,
    default_partition,
    detect,
    draw_entangled,
    entanglement_bin,
    median_settings_vs_entanglement,
    montecarlo,
    records_to_json,
    table_manifest,
    trial_rng,
)
from cvwitness.states import RandomStateConfig, log_negativity, random_product_covariance, squeezed_vacuum
from cvwitness.witness import MeasurementRecord, WitnessProblem, optimize


def test_config_defaults_and_validation():
    assert DetectionConfig().resolve(2) == ((1, 1), 20)
    assert DetectionConfig().resolve(4) == ((2, 2), 72)
    assert DetectionConfig(max_settings=5, partition=(1, 2)).resolve(3) == ((1, 2), 5)
    assert default_partition(5) == (2, 3)
    with pytest.raises(ValueError):
        DetectionConfig(max_settings=1)
    with pytest.raises(ValueError):
        DetectionConfig(noise=2)
    with pytest.raises(ValueError):
        DetectionConfig(search="random")


def test_vacuum_is_never_detected():
    rec = detect(np.eye(4), DetectionConfig(seed=1))
    assert not rec.detected
    assert rec.settings_used == 20


def test_squeezed_vacuum_detected_with_at_least_two_settings():
    for k in range(20):
        rec = detect(squeezed_vacuum(0.5), DetectionConfig(), trial_rng(3, k))
        assert rec.detected and 2 <= rec.settings_used <= 20 and rec.value < 1


@given(seeds)
@settings(max_examples=30)
def test_bisection_matches_sequential_search(seed):
    rng = np.random.default_rng(seed)
    gamma = draw_entangled(RandomStateConfig(), rng)
    a = detect(gamma, DetectionConfig(search=BISECT), trial_rng(seed))
    b = detect(gamma, DetectionConfig(search=SEQUENTIAL), trial_rng(seed))
    assert (a.detected, a.settings_used) == (b.detected, b.settings_used)


@given(seeds)
@settings(max_examples=40)
def test_never_detects_product_states(seed):
    gamma = random_product_covariance(2, np.random.default_rng(seed))
    assert not detect(gamma, DetectionConfig(max_settings=12), trial_rng(seed)).detected


@given(seeds)
@settings(max_examples=20)
def test_record_reproduces_value(seed):
    gamma = draw_entangled(RandomStateConfig(), np.random.default_rng(seed))
    rec = detect(gamma, DetectionConfig(), trial_rng(seed, 1))
    if not rec.detected:
        return
    recs = [MeasurementRecord(s, m) for s, m in zip(rec.settings, rec.variances)]
    assert optimize(WitnessProblem(recs, (1, 1))).value == pytest.approx(rec.value, abs=1e-7)
    assert rec.value < 1 and rec.settings_used >= 2
    assert rec.E == pytest.approx(log_negativity(gamma).E)


def test_noisy_detection_runs_sequentially():
    rec = detect(squeezed_vacuum(1.0), DetectionConfig(noise=2000, seed=2))
    assert rec.detected
    assert len(rec.variances) == rec.settings_used
    vac = detect(np.eye(4), DetectionConfig(noise=400, seed=2, max_settings=12))
    assert not vac.detected


def test_draw_entangled_rejects_separable():
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert log_negativity(draw_entangled(RandomStateConfig(), rng)).E > 0


def test_entanglement_bins():
    assert entanglement_bin(RANDOM, 0.61) == 0.5
    assert entanglement_bin(RANDOM, 0.25) == 0.25
    assert entanglement_bin(SQUEEZED, 1.23456789) == pytest.approx(1.23456789)
    assert np.isnan(entanglement_bin(BOUND4, None))


def test_montecarlo_is_reproducible_and_normalized():
    fam = Family(SQUEEZED, r_values=(0.2, 1.8))
    a = montecarlo(fam, 30, DetectionConfig(seed=5))
    b = montecarlo(fam, 30, DetectionConfig(seed=5))
    assert a.to_csv() == b.to_csv()
    frac = a.fractions()
    assert frac.shape[0] == 2
    assert np.allclose(frac.sum(axis=1), 1.0, atol=1e-9)
    assert a.to_csv().splitlines()[0] == "E_bin,settings,fraction"
    assert len(a.records) == 60


def test_montecarlo_independent_of_workers():
    fam = Family(SQUEEZED, r_values=(1.0,))
    serial = montecarlo(fam, 12, DetectionConfig(seed=8))
    parallel = montecarlo(fam, 12, DetectionConfig(seed=8), workers=2)
    assert serial.to_csv() == parallel.to_csv()


def test_single_state_family_has_one_column():
    table = montecarlo(Family(BOUND4), 3, DetectionConfig(seed=1))
    assert table.e_bins.size == 1 and np.isnan(table.e_bins[0])
    assert table.fractions().sum() == pytest.approx(1.0)
    curve = median_settings_vs_entanglement(table)
    assert len(curve) == 1


def test_table_and_manifest_serialization():
    fam = Family(RANDOM)
    cfg = DetectionConfig(seed=4)
    table = montecarlo(fam, 10, cfg)
    meta = table_manifest(fam, 10, cfg, table)
    assert meta["seed"] == 4 and meta["command"] == "montecarlo"
    assert meta["summary"]["trials"] == 10
    json.dumps(meta)
    data = json.loads(records_to_json(table.records))
    assert len(data) == 10 and {"detected", "settings_used", "value", "E"} <= set(data[0])
    rebuilt = build_table(RANDOM, table.records, table.max_settings)
    assert rebuilt.to_csv() == table.to_csv()


def test_random_family_requires_two_modes():
    with pytest.raises(ValueError):
        montecarlo(Family(RANDOM, random_config=RandomStateConfig(modes=3)), 1)
    with pytest.raises(ValueError):
        Family("coherent")
