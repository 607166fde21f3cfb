import math

import numpy as np
import pytest

from tsdforecast import GeneratorConfig, apply_mask, continuous_mask, generate_scenario, no_mask, random_mask
from tsdforecast.masking import sample_mask
from tsdforecast.scenario import scenario_to_dict


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def test_random_mask_counts_20_percent():
    m = random_mask(20, 4, 0.2, seed=0)
    assert (~m.focal).sum() == 4          # round(0.2 * 19)
    assert m.focal[19]                    # the current step stays observed
    for row in m.neighbors:
        assert (~row).sum() == 4
        assert row[19]


def test_random_mask_rate_zero_identity():
    m = random_mask(20, 3, 0.0, seed=5)
    assert m.focal.all() and m.neighbors.all()


def test_random_mask_deterministic_and_heavy():
    a = random_mask(20, 2, 0.8, seed=42)
    b = random_mask(20, 2, 0.8, seed=42)
    assert (a.focal == b.focal).all() and (a.neighbors == b.neighbors).all()
    assert (~a.focal).sum() == 15         # round(0.8 * 19)


def test_random_mask_count_exactness_sweep():
    rates = [i / 10 for i in range(10)]
    for t_obs in range(1, 51):
        for rate in rates:
            m = random_mask(t_obs, 0, rate, seed=7)
            assert (~m.focal).sum() == round_half_up(rate * (t_obs - 1)), (t_obs, rate)
            assert m.focal[t_obs - 1]


def test_random_mask_rejects_rate_one():
    with pytest.raises(ValueError):
        random_mask(20, 2, 1.0, seed=0)


def test_neighbors_masked_independently():
    m = random_mask(30, 8, 0.5, seed=1)
    rows = {tuple(row.tolist()) for row in m.neighbors}
    assert len(rows) > 1


def test_continuous_mask_definition():
    m = continuous_mask(20, 2, 5)
    assert (~m.focal[:15]).all() and m.focal[15:].all()
    for row in m.neighbors:
        assert (row == m.focal).all()

    assert continuous_mask(20, 0, 20).focal.all()
    only_anchor = continuous_mask(20, 0, 1)
    assert only_anchor.focal.sum() == 1 and only_anchor.focal[19]


def test_continuous_mask_rejects_zero():
    with pytest.raises(ValueError):
        continuous_mask(20, 2, 0)
    with pytest.raises(ValueError):
        continuous_mask(20, 2, 21)


@pytest.fixture
def scenario():
    return generate_scenario(GeneratorConfig(t_obs=6, t_pred=4, num_neighbors=2, seed=8), 0)


def test_apply_mask_identity(scenario):
    m = no_mask(6, 2)
    assert scenario_to_dict(apply_mask(scenario, m)) == scenario_to_dict(scenario)


def test_apply_mask_zeroes_and_invalidates(scenario):
    m = no_mask(6, 2)
    m.focal[0] = False
    out = apply_mask(scenario, m)
    assert not out.focal_past[0].valid
    assert (out.focal_past[0].x, out.focal_past[0].y) == (0.0, 0.0)
    # untouched elsewhere
    assert out.focal_past[1].x == scenario.focal_past[1].x
    assert scenario.focal_past[0].valid  # input not mutated


def test_apply_mask_continuous_counts(scenario):
    out = apply_mask(scenario, continuous_mask(6, 2, 1))
    assert sum(not st.valid for st in out.focal_past) == 5


def test_apply_mask_idempotent(scenario):
    m = random_mask(6, 2, 0.5, seed=3)
    once = apply_mask(scenario, m)
    twice = apply_mask(once, m)
    assert scenario_to_dict(once) == scenario_to_dict(twice)


def test_apply_mask_preserves_future_and_map(scenario):
    m = continuous_mask(6, 2, 1)
    out = apply_mask(scenario, m)
    assert scenario_to_dict(out)["focal_future"] == scenario_to_dict(scenario)["focal_future"]
    assert scenario_to_dict(out)["map_polylines"] == scenario_to_dict(scenario)["map_polylines"]


def test_apply_mask_dimension_mismatch(scenario):
    with pytest.raises(ValueError):
        apply_mask(scenario, no_mask(5, 2))
    with pytest.raises(ValueError):
        apply_mask(scenario, no_mask(6, 3))


def test_sample_mask_schedules():
    assert sample_mask({"pattern": "none"}, 10, 2, seed=0).focal.all()
    m = sample_mask({"pattern": "random", "rate": 0.4}, 10, 2, seed=1)
    assert (~m.focal).sum() == round_half_up(0.4 * 9)
    m = sample_mask({"pattern": "continuous", "observed_len": 3}, 10, 2, seed=1)
    assert m.focal.sum() == 3
    # mixed draws are deterministic in the seed and anchor-preserving
    for seed in range(20):
        m = sample_mask({"pattern": "mixed"}, 20, 2, seed=seed)
        m2 = sample_mask({"pattern": "mixed"}, 20, 2, seed=seed)
        assert (m.focal == m2.focal).all()
        assert m.focal[19]
    with pytest.raises(ValueError):
        sample_mask({"pattern": "bogus"}, 10, 2, seed=0)
