"""The ten acceptance criteria, each run as its registered check with the
default suite seed.  Tolerances are asserted here directly rather than read
back from the reports, so the check code cannot loosen them."""
import math

import pytest

from rstree import analytic as an
from rstree.validation import DEFAULT_SEED, SUITES, run_validation_suite

pytestmark = pytest.mark.slow

_CACHE: dict = {}


def reports(name):
    if name not in _CACHE:
        rs = run_validation_suite({name: SUITES["acceptance"][name]}, seed=DEFAULT_SEED)
        _CACHE[name] = {r.check: r for r in rs}
    return _CACHE[name]


def p_hat():
    return reports("path_constants")["path_p"].estimate


def test_criterion_01_edge_length_law(record_criterion):
    rs = reports("edge_length_law")
    ks = {x: rs[f"edge_length_law[x={x:g}]"] for x in (0.5, 1.0, 5.0)}
    ok = all(r.ks_distance < 0.01 and r.n == 100_000 for r in ks.values())
    ok = ok and not any(k.endswith("uncertified") for k in rs)
    record_criterion(1, "edge-length law", ok, " ".join(f"KS[{x:g}]={r.ks_distance:.4f}" for x, r in ks.items()))
    assert ok


def test_criterion_02_degree_at_origin(record_criterion):
    rs = reports("mean_degree_origin")
    m, mx = rs["mean_degree_origin"], rs["max_degree_origin"]
    se = m.ci_halfwidth / 1.96
    ok = m.n == 100_000 and abs(m.estimate - math.pi / an.LENS_MIN) <= 3 * se and mx.estimate == 0
    record_criterion(2, "degree at origin", ok,
                     f"mean={m.estimate:.4f} ref={math.pi / an.LENS_MIN:.4f} 3se={3 * se:.4f} ({mx.note})")
    assert ok


def test_criterion_03_asymptotic_constants(record_criterion):
    rs = reports("asymptotic_constants")
    L, P, D = rs["asymptotic_length"], rs["asymptotic_progress"], rs["asymptotic_degree"]
    ok = (abs(L.estimate - 1 / math.sqrt(2)) <= 1e-2 and abs(P.estimate - math.sqrt(2) / math.pi) <= 1e-2
          and abs(D.estimate - 2.0) <= 5e-2 and "asymptotic_constants.uncertified" not in rs)
    record_criterion(3, "asymptotic constants", ok,
                     f"EL={L.estimate:.4f} EP={P.estimate:.4f} ED={D.estimate:.4f}")
    assert ok


def test_criterion_04_path_constants(record_criterion):
    rs = reports("path_constants")
    p, py, l1 = rs["path_p"], rs["path_p_y"], rs["path_l1"]
    ok = (p.n == 20_000 and abs(p.estimate - 0.504) <= 0.01 and abs(py.estimate - 0.46) <= 0.02
          and abs(l1.estimate - 0.75) <= 0.02)
    record_criterion(4, "path constants", ok, f"p={p.estimate:.4f} p_y={py.estimate:.4f} l1={l1.estimate:.4f}")
    assert ok


def test_criterion_05_hop_ratio(record_criterion):
    r = reports("hop_ratio")["hop_ratio"]
    target = 1 / p_hat()
    ok = r.n == 1000 and abs(r.estimate - target) <= 0.05 * target
    record_criterion(5, "hop ratio", ok, f"H/|X|={r.estimate:.4f} 1/p_hat={target:.4f}")
    assert ok


def test_criterion_06_shape_theorem(record_criterion):
    rs = reports("shape_theorem")
    g, s = rs["shape_statistic"], rs["shape_sandwich"]
    ref = math.pi * p_hat() ** 2
    ok = g.n == 200 and abs(g.estimate - ref) <= 0.1 * ref and s.estimate >= 0.95
    record_criterion(6, "shape theorem", ok,
                     f"G/k^2={g.estimate:.4f} pi p_hat^2={ref:.4f} sandwich={s.estimate:.3f}")
    assert ok


def test_criterion_07_spatial_averages(record_criterion):
    rs = reports("spatial_averages")
    a1, a2 = rs["spatial_average_1"], rs["spatial_average_2"]
    r1 = math.pi / math.sqrt(2)
    ok = abs(a1.estimate - r1) <= 0.02 * r1 and abs(a2.estimate - 2.0) <= 0.03 * 2.0
    record_criterion(7, "spatial averages", ok, f"L1={a1.estimate:.4f} (ref {r1:.4f}) L2={a2.estimate:.4f}")
    assert ok


def test_criterion_08_structural_oracles(record_criterion):
    rs = reports("structural_oracles")
    sizes = {"grid_vs_bruteforce": 100, "void_condition": 100, "markov_times": 1000, "domination": 1000,
             "voronoi_acyclicity": 10_000}
    ok = all(rs[k].estimate == 0 and rs[k].n == n for k, n in sizes.items())
    record_criterion(8, "structural oracles", ok,
                     " ".join(f"{k}={int(rs[k].estimate)}" for k in sizes) + f" ({rs['domination'].note})")
    assert ok


def test_criterion_09_deviation_scaling(record_criterion):
    r = reports("deviation_scaling")["deviation_slope"]
    ok = 0.4 <= r.estimate <= 0.6
    record_criterion(9, "deviation scaling", ok, f"slope={r.estimate:.3f} ({r.note})")
    assert ok


def test_criterion_10_analytic_self_checks(record_criterion):
    rs = reports("analytic_self_checks")
    d, nrm, v, g = (rs["lens_derivative"], rs["joint_density_normalisation"], rs["voronoi_mean_length"],
                    rs["radial_chain_gamma"])
    v_se = v.ci_halfwidth / 1.96
    ok = (d.estimate < 1e-6 and d.n == 100 and nrm.estimate <= 1e-8 and v.n == 10_000
          and abs(v.estimate - v.reference) <= 3 * v_se and g.ks_distance < 0.01 and g.n == 100_000)
    record_criterion(10, "analytic self-checks", ok,
                     f"dM={d.estimate:.2e} norm={nrm.estimate:.1e} voronoi={v.estimate:.4f}/{v.reference:.4f} "
                     f"gammaKS={g.ks_distance:.4f}")
    assert ok
