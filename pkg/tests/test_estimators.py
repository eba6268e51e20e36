import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from lppsim.errors import ParameterError, StatisticsError
from lppsim.estimators import (EXPERIMENT_KINDS, ExperimentConfig, ExponentFit, derive_seed,
                               fit_exponent, fit_table, mid_height_deviation, run_experiment,
                               wilson_interval)
from lppsim.environment import GridSpec, zero_environment


def wilson_by_hand(s, m, z=1.959963984540054):
    p = s / m
    centre = p + z * z / (2 * m)
    half = z * math.sqrt(p * (1 - p) / m + z * z / (4 * m * m))
    return (centre - half) / (1 + z * z / m), (centre + half) / (1 + z * z / m)


@given(st.integers(1, 5000), st.data())
def test_wilson_interval_matches_closed_form(m, data):
    s = data.draw(st.integers(0, m))
    lo, hi = wilson_interval(s, m)
    want = wilson_by_hand(s, m)
    assert lo == pytest.approx(want[0], abs=1e-9) and hi == pytest.approx(want[1], abs=1e-9)


def test_wilson_needs_trials():
    with pytest.raises(StatisticsError):
        wilson_interval(0, 0)


def test_derived_seeds_are_stable_and_distinct():
    seeds = [derive_seed(42, r) for r in range(200)]
    assert seeds == [derive_seed(42, r) for r in range(200)]
    assert len(set(seeds)) == 200
    assert derive_seed(41, 0) != derive_seed(42, 0)
    with pytest.raises(ParameterError):
        derive_seed(-1, 0)


def test_fit_recovers_exact_power_law():
    fit = fit_exponent([(n, n ** 3) for n in (2, 4, 8, 16)])
    assert fit.slope == pytest.approx(3.0, abs=1e-12)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_of_constant_has_zero_slope():
    fit = fit_exponent([(1, 5.0), (2, 5.0), (4, 5.0)])
    assert fit.slope == 0.0 and fit.slope_stderr == 0.0


def test_fit_with_noise_is_close():
    rng = np.random.default_rng(3)
    eps = np.geomspace(0.01, 1.0, 12)
    vals = eps ** 1.5 * (1 + 0.05 * rng.uniform(-1, 1, eps.size))
    assert abs(fit_exponent(list(zip(eps, vals))).slope - 1.5) < 0.1


def test_fit_errors_and_json():
    with pytest.raises(ParameterError):
        fit_exponent([(1, 1.0)])
    with pytest.raises(ParameterError):
        fit_exponent([(1, 1.0), (2, -1.0)])
    with pytest.raises(ParameterError):
        fit_exponent([(2, 1.0), (2, 3.0)])
    with pytest.raises(StatisticsError):
        ExponentFit(1.0, 0.0, 0.0, 1.0, 1)
    data = json.loads(fit_exponent([(1, 1.0), (2, 2.0)]).to_json())
    assert data["version"] == "lppsim-exponent-fit 1" and data["slope"] == pytest.approx(1.0)


def test_config_validation():
    with pytest.raises(ParameterError):
        ExperimentConfig("nonsense")
    with pytest.raises(ParameterError):
        ExperimentConfig("weight_difference")
    with pytest.raises(ParameterError):
        ExperimentConfig("transversal_fluctuation", n=(1,))
    with pytest.raises(StatisticsError):
        ExperimentConfig("regularity_audit", replicate_count=29)
    with pytest.raises(ParameterError):
        ExperimentConfig.from_dict({"kind": "weight_sd", "colour": "red"})
    cfg = ExperimentConfig.from_dict({"kind": "weight_sd", "n": [10, 20]})
    assert cfg.n == (10, 20)
    assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg


def test_scaled_grid_policy():
    cfg = ExperimentConfig("weight_sd", grid_policy="scaled", delta=0.25, delta_ref_n=100)
    assert cfg.grid_delta(800) == pytest.approx(0.25 * 4.0)
    assert ExperimentConfig("weight_sd").grid_delta(800) == 0.25


def test_zero_environment_geodesics_hug_the_corners():
    # every staircase is a geodesic, so the tie rules pick the extreme corners
    env = zero_environment(0, 16, GridSpec.covering(-20, 40, 0.25, pad=1))
    assert mid_height_deviation(env, 16, "leftmost") == (-8.0, 0.0)
    assert mid_height_deviation(env, 16, "rightmost") == (8.0, 0.0)


SMALL = {
    "transversal_fluctuation": {},
    "weight_sd": {},
    "weight_difference": {"eps": (0.1, 0.4)},
    "disjoint_rarity": {"eps": (0.2, 0.4), "method": "extremal"},
    "near_poly_rarity": {"eta": (0.5, 1.0)},
    "dev_reg_tail": {"r": (0.5, 1.0), "a": 0.5},
    "regularity_audit": {"replicate_count": 30, "z_samples": (-0.2, 0.0, 0.2), "k": 2},
}


@pytest.mark.parametrize("kind", EXPERIMENT_KINDS)
def test_every_kind_runs_and_is_deterministic(kind):
    base = dict(kind=kind, master_seed=9, replicate_count=6, n=(16, 32), delta=0.5)
    base.update(SMALL[kind])
    cfg = ExperimentConfig(**base)
    a, b = run_experiment(cfg).to_csv(), run_experiment(cfg).to_csv()
    assert a == b
    assert a.startswith("# lppsim-estimate-table 1\n")
    rows = run_experiment(cfg).rows
    assert rows and all(r.status == "ok" for r in rows)
    assert all(r.delta == 0.5 for r in rows)


def test_threads_do_not_change_results():
    cfg = ExperimentConfig("weight_sd", master_seed=3, replicate_count=8, n=(16,), delta=0.5)
    par = ExperimentConfig("weight_sd", master_seed=3, replicate_count=8, n=(16,), delta=0.5, threads=2)
    assert run_experiment(cfg).to_csv() == run_experiment(par).to_csv()


def test_unreachable_sweep_point_is_rejected_not_fatal():
    cfg = ExperimentConfig("dev_reg_tail", replicate_count=3, n=(16, 10), r=(1.0,), a=0.25, delta=0.5)
    rows = run_experiment(cfg).rows
    assert rows[0].status == "ok"
    assert rows[1].status.startswith("rejected")


def test_frequency_rows_are_monotone_and_bracketed():
    cfg = ExperimentConfig("near_poly_rarity", replicate_count=20, n=(16,), eta=(0.1, 0.5, 2.0), delta=0.5)
    rows = run_experiment(cfg).rows
    est = [r.estimate for r in rows]
    assert est == sorted(est)
    assert all(r.ci_lo <= r.estimate <= r.ci_hi for r in rows)


def test_fit_table_uses_swept_parameter():
    cfg = ExperimentConfig("weight_difference", replicate_count=10, n=(32,), eps=(0.05, 0.2, 0.8), delta=0.25)
    fit = fit_table(run_experiment(cfg), "mean_sup_difference")
    assert fit.points_used == 3 and 0.2 < fit.slope < 0.9
