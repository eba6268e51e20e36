import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lppsim.environment import GridSpec, generate_environment, zero_environment
from lppsim.errors import InfeasibleError, ParameterError
from lppsim.events import (BACKWARD, FAV_SUR_CON, FORWARD, IntervalSet, EventSpec, bouquet_reg,
                           bouquet_statistic, disjoint_certificate, environment_for_spec,
                           evaluate_batch, evaluate_event, events_to_csv, fav_sur_con,
                           fav_sur_con_components, fluc, interval_indices, loc_wgt_reg,
                           max_disjoint, near_poly, near_poly_gap, normalized_deviations,
                           poly_dev_reg, poly_wgt_reg, watermelon_component_bounds, weight_table)
from lppsim.lpp import last_passage, multi_geodesic, staircase_energy
from lppsim.scaled import CompatibleTriple

N = 27
TR = CompatibleTriple(N, 0.0, 1.0)
seeds = st.integers(0, 2 ** 32)


def env_for(seed, lo=-1.5, hi=1.5, n=N, t1=0.0, t2=1.0, delta=0.5):
    c = 2 * n ** (2 / 3)
    grid = GridSpec.covering(n * t1 + c * lo, n * t2 + c * hi, delta, pad=2)
    return generate_environment(seed, round(n * t1), round(n * t2), grid)


def test_interval_sets():
    assert IntervalSet.real_line().contains(1e300)
    assert not IntervalSet.empty().contains(0.0)
    out = IntervalSet.outside(2.0)
    assert out.contains(-2.5) and out.contains(math.inf) and not out.contains(2.0)
    assert IntervalSet.real_line().contains(-math.inf)
    assert IntervalSet.outside(2.0, closed=True).contains(2.0)


@settings(max_examples=25)
@given(seeds)
def test_fluc_trivial_sets(seed):
    env = env_for(seed)
    assert fluc(env, TR, 0.0, 0.0, 1 / 3, IntervalSet.real_line())
    assert not fluc(env, TR, 0.0, 0.0, 1 / 3, IntervalSet.empty())


@settings(max_examples=25)
@given(seeds, st.floats(0.05, 3.0), st.sampled_from([1, 3]))
def test_deviation_regularity_is_complement_of_outer_fluctuation(seed, r, grid_points):
    env = env_for(seed)
    I, J = (-0.2, 0.2), (-0.1, 0.3)
    reg = poly_dev_reg(env, TR, I, J, 1 / 3, r, grid_points)
    assert reg == (not fluc(env, TR, I, J, 1 / 3, IntervalSet.outside(r), grid_points))


@settings(max_examples=25)
@given(seeds)
def test_deviation_regularity_monotone_in_r(seed):
    env = env_for(seed)
    xs = np.abs(normalized_deviations(env, TR, 0.0, 0.2, [1 / 3]))
    worst = float(xs.max())
    assert poly_dev_reg(env, TR, 0.0, 0.2, 1 / 3, worst)
    assert not poly_dev_reg(env, TR, 0.0, 0.2, 1 / 3, worst * 0.999 - 1e-12) or worst == 0
    assert poly_dev_reg(env, TR, 0.0, 0.2, 1 / 3, worst + 1.0)


@settings(max_examples=25)
@given(seeds, st.floats(0.0, 2.0), st.floats(0.0, 2.0))
def test_near_poly_monotone_in_eta(seed, e1, e2):
    env = env_for(seed)
    lo, hi = sorted((e1, e2))
    if near_poly(env, TR, 2, 0.0, 0.0, lo):
        assert near_poly(env, TR, 2, 0.0, 0.0, hi)
    gap = near_poly_gap(env, TR, 2, 0.0, 0.0)
    assert gap >= -1e-9
    assert near_poly(env, TR, 2, 0.0, 0.0, gap + 1e-9)


def test_zero_environment_closed_forms():
    env = zero_environment(0, N, GridSpec.covering(-40, 70, 0.5, pad=2))
    assert near_poly_gap(env, TR, 2, 0.0, 0.0) == pytest.approx(0.0, abs=1e-12)
    assert max_disjoint(env, TR, 0.0, 0.0, 2) == 2
    # with no noise the weight is the pure centering term
    xs, ys, w = weight_table(env, TR, (-0.5, 0.5), (-0.5, 0.5))
    disp = 2 * N ** (2 / 3) * (ys[None, :] - xs[:, None]) + N
    want = -(N + disp) / (math.sqrt(2) * N ** (1 / 3))
    assert np.allclose(w[np.isfinite(w)], want[np.isfinite(w)])


@settings(max_examples=20)
@given(seeds, st.sampled_from([1e-12, 1e-9, 1e-6, 1e-3]), st.sampled_from([1e-9, 1e-3, 1e-1]))
def test_certificate_count_monotone_in_tolerance(seed, tol1, tol2):
    env = env_for(seed)
    lo, hi = sorted((tol1, tol2))
    I = J = (-0.3, 0.3)
    assert max_disjoint(env, TR, I, J, 2, 3, lo) <= max_disjoint(env, TR, I, J, 2, 3, hi)


@settings(max_examples=20)
@given(seeds)
def test_certificates_are_sound(seed):
    env = env_for(seed)
    cert = disjoint_certificate(env, TR, (-0.3, 0.3), (-0.3, 0.3), 2, endpoint_grid=4)
    if cert is None:
        return
    us, vs = cert
    ms = multi_geodesic(env, us, vs, TR.i, TR.j)
    for p, s in zip(ms.paths, zip(us, vs)):
        single = last_passage(env, (s[0], TR.i), (s[1], TR.j))
        assert staircase_energy(env, p) == pytest.approx(single, abs=1e-9 * (1 + abs(single)))


@settings(max_examples=30)
@given(seeds, st.sampled_from([0.1, 0.3, 0.6]))
def test_extremal_count_matches_certificate_search(seed, eps):
    env = env_for(seed)
    I = J = (-eps, eps)
    assert max_disjoint(env, TR, I, J, 2, 5, method="extremal") == max_disjoint(env, TR, I, J, 2, 5)


def test_max_disjoint_parameter_errors():
    env = env_for(0)
    with pytest.raises(ParameterError):
        max_disjoint(env, TR, (0, 0.1), (0, 0.1), 0)
    with pytest.raises(ParameterError):
        max_disjoint(env, TR, (0, 0.1), (0, 0.1), 3, method="extremal")
    with pytest.raises(ParameterError):
        max_disjoint(env, TR, (0, 0.1), (0, 0.1), 2, method="guess")
    with pytest.raises(ParameterError):
        interval_indices(env, N, (0.3, 0.1), 0.0)


@settings(max_examples=20)
@given(seeds)
def test_watermelon_components_within_bounds(seed):
    env = env_for(seed)
    comps, lower, upper = watermelon_component_bounds(env, TR, 2, 0.0, 0.1)
    assert np.all(comps <= upper + 1e-9)
    assert np.all(comps >= lower - 1e-9)


@settings(max_examples=20)
@given(seeds, st.floats(0.1, 10.0))
def test_weight_events_monotone_in_r(seed, r):
    env = env_for(seed)
    if poly_wgt_reg(env, TR, (-0.2, 0.2), (-0.2, 0.2), r):
        assert poly_wgt_reg(env, TR, (-0.2, 0.2), (-0.2, 0.2), 2 * r)
    if loc_wgt_reg(env, N, (0.0, 0.25), (0.0, 0.25), 0.25, r):
        assert loc_wgt_reg(env, N, (0.0, 0.25), (0.0, 0.25), 0.25, 2 * r)


def test_loc_wgt_reg_checks_interval_length():
    with pytest.raises(ParameterError):
        loc_wgt_reg(env_for(0), N, (0.0, 0.2), (0.0, 0.25), 0.25, 1.0)


def test_weight_table_marks_pathless_pairs():
    env = env_for(0, lo=-3, hi=3)
    xs, ys, w = weight_table(env, TR, (-0.1, 2.5), (-2.5, 0.1))
    assert np.isnan(w).any() and np.isfinite(w).any()
    with pytest.raises(InfeasibleError):
        weight_table(env, TR, (2.0, 2.5), (-2.5, -2.0))


@settings(max_examples=20)
@given(seeds, st.sampled_from([FORWARD, BACKWARD]))
def test_bouquet_statistic_decides_event(seed, direction):
    env = env_for(seed)
    anchor = 0.0
    stat = bouquet_statistic(env, TR, 2, direction, anchor, (0.0, 0.3) if direction == FORWARD else (-0.3, 0.0))
    tup = (0.0, 0.3) if direction == FORWARD else (-0.3, 0.0)
    assert bouquet_reg(env, TR, 2, direction, anchor, tup, abs(stat) + 1e-9)
    assert not bouquet_reg(env, TR, 2, direction, anchor, tup, abs(stat) / 2 - 1e-9)


def test_bouquet_direction_checked():
    with pytest.raises(ParameterError):
        bouquet_statistic(env_for(0), TR, 1, "sideways", 0.0, 0.0)


def test_fav_sur_con_is_conjunction_of_components():
    n, eps = 64, 0.25
    for seed in range(3):
        spec = EventSpec(FAV_SUR_CON, n, x=0.0, y=0.0, k=2, eps=eps, r=2.0, endpoint_grid=3)
        env = environment_for_spec(spec, seed, 0.5)
        comps = fav_sur_con_components(env, n, 2, 0.0, 0.0, eps, 2.0, 3)
        assert len(comps) == 6
        assert fav_sur_con(env, n, 2, 0.0, 0.0, eps, 2.0, 3) == all(comps.values())


def test_fav_sur_con_needs_mesh_lifetime():
    env = env_for(0)
    with pytest.raises(ParameterError):
        fav_sur_con(env, 10, 2, 0.0, 0.0, 0.3, 1.0)


def test_event_spec_validation():
    with pytest.raises(ParameterError):
        EventSpec("Wobble", N)
    with pytest.raises(ParameterError):
        EventSpec("NearPoly", N, k=2, x=0.0, y=0.0)
    with pytest.raises(ParameterError):
        EventSpec("NearPoly", N, k=2, x=0.0, y=0.0, eta=1.0, r=2.0)
    with pytest.raises(ParameterError):
        EventSpec("LocWgtReg", N, t1=0.0, t2=2.0, I=(0, 1), J=(0, 1), eps=1.0, r=1.0)
    with pytest.raises(ParameterError):
        EventSpec("NearPoly", N, t2=0.5, k=2, x=0.0, y=0.0, eta=1.0)
    EventSpec("PolyDevReg", N, I=(0, 0.1), y=0.0, a=0.5, r=1.0)


def test_batch_csv_is_deterministic():
    specs = [EventSpec("MaxDisjtPoly", N, I=(-0.2, 0.2), J=(-0.2, 0.2), k=2, endpoint_grid=3),
             EventSpec("Fluc", N, x=0.0, y=0.0, a=1 / 3, K=((-math.inf, -1.0, False, True),)),
             EventSpec("ForBouqReg", N, k=2, x=0.0, tuple_=(0.0, 0.2), r=5.0)]
    a = events_to_csv(evaluate_batch(specs, [1, 2], 0.5))
    b = events_to_csv(evaluate_batch(specs, [1, 2], 0.5))
    assert a == b
    lines = a.splitlines()
    assert lines[0] == "# lppsim-events-csv 1"
    assert len(lines) == 2 + 6
    assert "(-inf,-1.0]" in a


def test_evaluate_event_reports_count():
    spec = EventSpec("MaxDisjtPoly", N, I=(-0.3, 0.3), J=(-0.3, 0.3), k=2, endpoint_grid=3)
    env = environment_for_spec(spec, 5, 0.5)
    value, ind = evaluate_event(env, spec)
    assert value in (1, 2) and ind == (value >= 2)
