import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from rstree.forest import build_rst
from rstree.pointprocess import (ConfigError, Disk, DuplicatePointError, PointSet, PoissonField, Rect,
                                 SamplerConfig, enforce_nonequidistance, sample, sample_binomial_disk,
                                 sample_palm_poisson, sample_radial_chain)
from rstree.rng import derive_seed, stream


def test_palm_count_mean_large_window():
    counts = [len(sample_palm_poisson(SamplerConfig(window_radius=50.0, seed=3), r)) - 1 for r in range(200)]
    mean = math.pi * 2500
    se = math.sqrt(mean / 200)
    assert abs(np.mean(counts) - mean) < 5 * se


def test_palm_count_mean_and_variance_at_intensity_4():
    counts = np.array([len(sample_palm_poisson(SamplerConfig(intensity=4.0, window_radius=10.0, seed=5), r)) - 1
                       for r in range(1000)])
    lam = 4 * math.pi * 100
    assert abs(counts.mean() - lam) < 5 * math.sqrt(lam / 1000)
    # sd of the sample variance of a Poisson count ~ lam * sqrt(2 / n)
    assert abs(counts.var(ddof=1) - lam) < 5 * lam * math.sqrt(2 / 999)


def test_palm_sample_is_deterministic():
    cfg = SamplerConfig(window_radius=8.0, seed=42)
    a, b = sample_palm_poisson(cfg, 7), sample_palm_poisson(cfg, 7)
    assert a.points.tobytes() == b.points.tobytes()
    assert a.to_csv() == b.to_csv()
    assert sample_palm_poisson(cfg, 8).points.shape != a.points.shape or \
        not np.array_equal(sample_palm_poisson(cfg, 8).points, a.points)


def test_palm_origin_first_and_points_inside():
    ps = sample_palm_poisson(SamplerConfig(window_radius=6.0, seed=1))
    assert ps.has_origin and tuple(ps.points[0]) == (0.0, 0.0)
    assert np.all(ps.radii <= 6.0)


def test_binomial_empty_gives_origin_only():
    ps = sample_binomial_disk(SamplerConfig(kind="binomial_disk", count=0, window_radius=1.0))
    assert len(ps) == 1 and ps.has_origin


def test_binomial_exact_count():
    ps = sample_binomial_disk(SamplerConfig(kind="binomial_disk", count=25_000, window_radius=1.0, seed=2))
    assert len(ps) == 25_001


def test_binomial_mean_radius():
    ps = sample_binomial_disk(SamplerConfig(kind="binomial_disk", count=200_000, window_radius=1.0, seed=9))
    r = ps.radii[1:]
    # E|X| = 2/3, sd of |X| = sqrt(1/2 - 4/9)
    assert abs(r.mean() - 2 / 3) < 5 * math.sqrt(1 / 18 / len(r))


def test_radial_chain_first_radius_mean():
    sq = np.array([np.sum(sample_radial_chain(1, 1.0, 4, r).points[1] ** 2) for r in range(20_000)])
    assert abs(sq.mean() - 1 / math.pi) < 5 * (1 / math.pi) / math.sqrt(len(sq))


def test_radial_chain_radii_increasing():
    for rid in range(200):
        ps = sample_radial_chain(3, 1.0, 8, rid)
        assert np.all(np.diff(ps.radii) > 0)


def test_radial_chain_gamma_ks():
    sq = np.array([np.sum(sample_radial_chain(5, 1.0, 6, r).points[-1] ** 2) for r in range(100_000)])
    assert stats.kstest(sq, stats.gamma(a=5, scale=1 / math.pi).cdf).statistic < 0.01


def test_radial_chain_matches_palm_nearest_points():
    n = 5
    chain = [np.sqrt(np.sum(sample_radial_chain(n, 1.0, 12, r).points[-1] ** 2)) for r in range(10_000)]
    palm = []
    cfg = SamplerConfig(window_radius=4.0, seed=13)
    for r in range(10_000):
        rad = np.sort(sample_palm_poisson(cfg, r).radii[1:])
        palm.append(rad[n - 1])
    assert stats.ks_2samp(chain, palm).statistic < 0.02


def test_angles_uniform():
    ps = sample_binomial_disk(SamplerConfig(kind="binomial_disk", count=100_000, seed=21))
    ang = np.arctan2(ps.y[1:], ps.x[1:])
    counts, _ = np.histogram(ang, bins=36, range=(-math.pi, math.pi))
    assert stats.chisquare(counts).pvalue > 1e-3


def test_enforce_identity_on_distinct_points():
    ps = sample_palm_poisson(SamplerConfig(window_radius=4.0, seed=2))
    out = enforce_nonequidistance(ps)
    assert np.array_equal(out.points, ps.points) and out.tiebreak


def test_equidistant_candidates_lower_index_wins():
    ps = PointSet([(0, 0), (1, 1), (-1, 1), (0, 3)], has_origin=True)
    for _ in range(3):
        assert build_rst(ps).ancestor[3] == 1
    swapped = PointSet([(0, 0), (-1, 1), (1, 1), (0, 3)], has_origin=True)
    assert build_rst(swapped).ancestor[3] == 1


def test_duplicate_point_rejected():
    ps = PointSet([(0, 0), (1, 1), (0.5, 0.2), (1, 1)], has_origin=True)
    with pytest.raises(DuplicatePointError):
        enforce_nonequidistance(ps)


@pytest.mark.parametrize("kwargs", [
    {"intensity": -1.0}, {"intensity": 0.0}, {"window_radius": 0.0}, {"guard_margin": 1.0},
    {"kind": "nope"}, {"kind": "binomial_disk"}, {"kind": "radial_chain", "count": 0},
])
def test_sampler_config_rejects(kwargs):
    with pytest.raises(ConfigError):
        SamplerConfig(**kwargs)


def test_guard_radius():
    assert SamplerConfig(window_radius=50.0).guard_radius == pytest.approx(40.0)


def test_pointset_validation():
    with pytest.raises(ValueError):
        PointSet([(1, 0)], has_origin=True)
    with pytest.raises(ValueError):
        PointSet([(0, 0), (3, 0)], has_origin=True, window=Disk(2.0))


def test_csv_round_trip(tmp_path):
    ps = sample_palm_poisson(SamplerConfig(window_radius=3.0, seed=4))
    path = tmp_path / "p.csv"
    ps.to_csv(path)
    back = PointSet.from_csv(path, window=ps.window)
    assert back.has_origin and back.points.tobytes() == ps.points.tobytes()
    assert path.read_text().splitlines()[0] == "id,x,y,is_origin"


def test_sample_dispatch():
    cfg = SamplerConfig(kind="radial_chain", count=4, seed=1)
    assert len(sample(cfg)) == 5


def test_windows():
    d = Disk(2.0)
    assert d.contains(np.array([[2.0, 0.0]]))[0]
    assert not d.ball_inside(np.array([[1.5, 0.0]]), np.array([0.6]))[0]
    rect = Rect(-1, 1, -2, 2)
    assert rect.area == pytest.approx(8.0)
    assert rect.ball_inside(np.array([[0.0, 0.0]]), np.array([1.0]))[0]
    assert not rect.ball_inside(np.array([[0.5, 0.0]]), np.array([0.6]))[0]


def test_poisson_field_cells_are_reproducible():
    f = PoissonField(seed=3)
    a = f.cell(2, -5).copy()
    f.forget(lambda i, j: False)
    assert np.array_equal(f.cell(2, -5), a)
    assert np.array_equal(PoissonField(seed=3).cell(2, -5), a)


def test_streams_independent_of_order():
    a = stream(1, 2, "x").random(3)
    stream(1, 3, "x").random(3)
    assert np.array_equal(stream(1, 2, "x").random(3), a)
    assert derive_seed(1, "a") != derive_seed(1, "b")


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31), rid=st.integers(0, 1000), radius=st.floats(0.5, 6.0))
def test_sample_invariants(seed, rid, radius):
    ps = sample_palm_poisson(SamplerConfig(window_radius=radius, seed=seed), rid)
    assert tuple(ps.points[0]) == (0.0, 0.0)
    assert ps.window.contains(ps.points).all()
    assert len(np.unique(ps.points, axis=0)) == len(ps)
