import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import hand_points
from rstree.forest import build_dsf, build_rst
from rstree.paths import (PathTrace, directed_path, domination_check, edge_measure_estimate,
                          estimate_path_constants, hop_ratio_series, markov_times_geometric, max_deviation,
                          palm_with_point, radial_path, simulate_directed_path, xi_sequence, xi_step)
from rstree.pointprocess import PointSet, SamplerConfig, sample_palm_poisson


def palm(radius, seed, rid=0):
    return sample_palm_poisson(SamplerConfig(window_radius=radius, seed=seed), rid)


# ------------------------------------------------------------------ traces


def test_origin_trace_is_empty():
    t = radial_path(build_rst(palm(5.0, 1)), 0)
    assert t.hop_count == 0 and len(t.lengths) == 0


def test_collinear_hops():
    f = build_rst(hand_points((3, 0), (1, 0), (2, 0)))
    assert radial_path(f, 1).hop_count == 3


def test_generation_recursion():
    f = build_rst(palm(8.0, 2))
    h = np.array([radial_path(f, v).hop_count for v in range(len(f))])
    child, parent = f.edges()
    assert np.all(h[child] == 1 + h[parent])
    assert np.array_equal(h, f.generations())


def test_directed_zero_hops():
    f = build_dsf(palm(8.0, 3))
    t = directed_path(f, 5, 0)
    assert t.hop_count == 0 and np.array_equal(t.coords[0], f.points.points[5])


def test_directed_x_decreasing():
    ps = palm(15.0, 4).with_point((10.0, 0.0))
    t = directed_path(build_dsf(ps), len(ps) - 1, 10_000)
    assert t.hop_count > 5
    assert np.all(np.diff(t.coords[:, 0]) < 0)
    assert np.all(t.progress > 0)


def test_max_deviation_straight_chain():
    f = build_rst(hand_points((3, 0), (1, 0), (2, 0)))
    assert max_deviation(radial_path(f, 1)) == 0.0


def test_max_deviation_single_edge():
    a, b = -1.3, 0.4
    assert max_deviation(PathTrace([(0.0, 0.0), (a, b)], "dsf")) == pytest.approx(abs(b))
    assert max_deviation(PathTrace([(0.0, 0.0), (a, -b)], "dsf")) == pytest.approx(abs(b))


def test_single_point_hop_ratio():
    x = 0.05
    t = radial_path(build_rst(hand_points((x, 0.0))), 1)
    assert t.hop_count == 1
    assert t.hop_count / x == pytest.approx(1 / x)


def test_path_csv():
    t = PathTrace([(2.0, 0.0), (1.0, 0.0), (0.0, 0.0)], "rst")
    assert t.to_csv().splitlines() == ["hop,x,y,edge_len,progress", "0,2,0,0,0", "1,1,0,1,1", "2,0,0,1,1"]


def test_bad_kind():
    with pytest.raises(ValueError):
        PathTrace([(0.0, 0.0)], "nope")
    with pytest.raises(ValueError):
        radial_path(build_dsf(palm(3.0, 1)), 1)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), x=st.floats(1.0, 15.0))
def test_radial_trace_invariants(seed, x):
    ps = palm_with_point(x, seed, 0)
    t = radial_path(build_rst(ps), len(ps) - 1)
    total = np.zeros(2)
    for e in t.edges:
        total = total + e
    assert np.allclose(t.coords[0] - t.coords[-1], total, atol=1e-12)
    assert np.all(t.progress > 0)
    assert tuple(t.coords[-1]) == (0.0, 0.0)
    assert math.fsum(t.progress) == pytest.approx(x, abs=1e-12)


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 2**31))
def test_directed_trace_invariants(seed):
    t = simulate_directed_path(300, seed)
    assert np.all(t.progress > 0)
    assert np.allclose(t.coords[0] - t.coords[-1], t.edges.sum(axis=0), atol=1e-9)


# --------------------------------------------------------- Markovian times


def test_xi_step_example():
    assert xi_step(1.0, 0.4, 0.9) == pytest.approx(0.6)


def test_xi_step_clamps():
    assert xi_step(0.3, 0.5, 0.4) == 0.0


def test_markov_times_hand_path():
    # edges along -e_x with small lateral moves: every disc stays behind the next point
    t = PathTrace([(0, 0), (-1, 0.1), (-2, 0), (-3, 0.1), (-4, 0)], "dsf")
    xs = xi_sequence(t)
    assert xs.markov_times == markov_times_geometric(t)
    assert np.all(xs.xi >= 0)


def test_markov_times_match_geometric_oracle():
    for rid in range(100):
        t = simulate_directed_path(200, 17, rid)
        assert xi_sequence(t).markov_times == markov_times_geometric(t)


# ------------------------------------------------------- path constants


@pytest.fixture(scope="module")
def constants():
    return estimate_path_constants(20_000, 31, alphas=(1.0, 2.0))


def test_path_constants(constants):
    assert abs(constants.p - 0.504) < 0.01
    assert abs(constants.p_y - 0.46) < 0.02
    assert abs(constants.l_alpha[1.0] - 0.75) < 0.02
    assert set(constants.ci_halfwidth) == {"p", "p_y", "l_1.0", "l_2.0"}


def test_edge_measure_consistency(constants):
    prog = edge_measure_estimate("progress", 20_000, 32)
    assert abs(prog.mean - constants.p) < prog.halfwidth + constants.ci_halfwidth["p"]
    assert edge_measure_estimate("one", 2_000, 32).mean == 1.0


def test_edge_measure_length_exceeds_spatial_mean():
    ln = edge_measure_estimate("length", 20_000, 33)
    assert abs(ln.mean - 0.75) < 0.02
    assert ln.mean - ln.halfwidth > 1 / math.sqrt(2)


def test_edge_measure_rejects_unknown():
    with pytest.raises(ValueError):
        edge_measure_estimate("nope", 2000)
    with pytest.raises(ValueError):
        estimate_path_constants(10)


def test_edge_tail_bound():
    n = 20_000
    ln = simulate_directed_path(n, 34).lengths
    for u in (0.5, 1.0, 1.5, 2.0):
        p = float(np.mean(ln >= u))
        se = math.sqrt(max(p * (1 - p), 1 / n) / n)
        assert p <= math.exp(-math.pi * u * u / 12) + 3 * se


def test_walk_is_reproducible():
    a = simulate_directed_path(600, 5, 2)
    b = simulate_directed_path(600, 5, 2)
    assert a.coords.tobytes() == b.coords.tobytes()


# --------------------------------------------------------------- hop ratio


@pytest.mark.slow
def test_hop_ratio_and_frame_progress(constants):
    h = hop_ratio_series([40.0], 1000, seed=11)[0]
    p = constants.p
    assert abs(h.ratio.mean - 1 / p) < 0.05 / p
    assert abs(h.frame_progress.mean - p) < 0.05 * p


# --------------------------------------------------------------- domination


def test_domination_nothing_above_axis():
    ps = hand_points((3.0, -0.5), (1.5, -0.2), (4.0, -1.0))
    assert domination_check(ps, 5.0)


def test_domination_hand_built_case():
    # radial path X -> S -> Z -> O, directed path X -> Y -> S -> O
    ps = hand_points((4.95, 0.8), (4.0, 0.2), (3.0, -0.5))
    full = ps.with_point((5.0, 0.0))
    assert radial_path(build_rst(full), 4).vertices.tolist() == [4, 2, 3, 0]
    assert domination_check(ps, 5.0)


def test_domination_random_samples():
    for rid in range(30):
        ps = sample_palm_poisson(SamplerConfig(window_radius=40.0, seed=41), rid)
        assert domination_check(ps, 20.0)


def test_domination_needs_origin():
    with pytest.raises(ValueError):
        domination_check(PointSet([(1.0, 1.0)]), 2.0)
