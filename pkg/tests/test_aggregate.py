"""Kernel collections, u_alpha calibration, and the aggregated test."""

import json
import math

import numpy as np
import pytest

from poisson_twosample.aggregate import (
    KernelCollection,
    _family_exceedance,
    collection_from_id,
    estimate_u_alpha,
    example1_nested,
    example2_threshold,
    example4_bandwidths,
    member_observed,
    member_replicates,
    run_multi_test,
    singleton,
)
from poisson_twosample import backends
from poisson_twosample.intensity import make_f1
from poisson_twosample.kernels import ApproxKernel, HaarNested, HaarSingle, gram
from poisson_twosample.point_process import MarkedPool, pool, simulate
from poisson_twosample.single_test import run_single_test, statistic
from poisson_twosample.streams import rademacher_matrix, stream


def _h0_pool(seed, n=50.0):
    f1 = make_f1()
    rng = stream(seed, 0)
    return pool(simulate(f1, n, rng), simulate(f1, n, rng))


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def test_example1_nested_structure():
    coll = example1_nested(7)
    assert len(coll) == 8
    assert all(isinstance(m, HaarNested) for m in coll.members)
    assert [m.level for m in coll.members] == list(range(8))
    # w_J = 2(ln(J+1) + ln(pi/sqrt(6)))
    for j, w in enumerate(coll.weights):
        assert w == pytest.approx(2 * (math.log(j + 1) + math.log(math.pi / math.sqrt(6))))
    assert coll.weights[0] == pytest.approx(0.497700, abs=1e-6)
    # sum of e^{-w} is the truncated Basel sum (6/pi^2) sum (J+1)^-2 < 1
    expected = 6 / math.pi**2 * sum(1 / (j + 1) ** 2 for j in range(8))
    assert np.exp(-coll.weights).sum() == pytest.approx(expected, abs=1e-12)
    assert coll.weights_summable


def test_example2_threshold_structure():
    coll = example2_threshold(6)
    assert len(coll) == 64
    assert coll.members[0] == HaarSingle(0)
    assert coll.weights[0] == pytest.approx(math.log(2.0))
    # spot-check w_(3,2) = ln 8 + 2(ln 4 + ln(pi/sqrt 3))
    idx = coll.members.index(HaarSingle((3, 2)))
    assert coll.weights[idx] == pytest.approx(
        math.log(8.0) + 2 * (math.log(4.0) + math.log(math.pi / math.sqrt(3)))
    )
    # sum e^{-w} = 1/2 + (3/pi^2) sum_{j<6} (j+1)^-2 <= 1
    expected = 0.5 + 3 / math.pi**2 * sum(1 / (j + 1) ** 2 for j in range(6))
    assert np.exp(-coll.weights).sum() == pytest.approx(expected, abs=1e-12)
    assert coll.weights_summable


def test_example4_presets():
    g_coll = example4_bandwidths("gaussian")
    e_coll = example4_bandwidths("epanechnikov")
    for coll, base in ((g_coll, "gaussian"), (e_coll, "epanechnikov")):
        assert len(coll) == 6
        assert [m.bandwidth for m in coll.members] == [1 / 24, 1 / 16, 1 / 12, 1 / 8, 1 / 4, 1 / 2]
        assert all(m.base == base for m in coll.members)
        assert np.allclose(coll.weights, 1 / 6)
        # 6 e^{-1/6} > 1: the summability condition fails and is only flagged
        assert np.exp(-coll.weights).sum() == pytest.approx(6 * math.exp(-1 / 6))
        assert not coll.weights_summable
    assert g_coll.name == "G" and e_coll.name == "E"


def test_collection_ids():
    assert collection_from_id("Ne").name == "Ne"
    assert len(collection_from_id("Ne:Jbar=3")) == 4
    assert len(collection_from_id("Th:Jtilde=2")) == 4
    assert collection_from_id("G").members[0] == ApproxKernel("gaussian", 1 / 24)
    assert len(collection_from_id("single:gauss:h=0.25")) == 1
    with pytest.raises(ValueError):
        collection_from_id("bogus")


def test_collection_validation():
    with pytest.raises(ValueError):
        KernelCollection(name="x", members=(), weights=np.array([]))
    with pytest.raises(ValueError):
        KernelCollection(name="x", members=(HaarNested(1),), weights=np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        KernelCollection(name="x", members=(HaarNested(1),), weights=np.array([-0.5]))
    with pytest.raises(ValueError):
        example4_bandwidths("gaussian", bandwidths=(0.5, -0.1))


# ---------------------------------------------------------------------------
# member replicate paths
# ---------------------------------------------------------------------------


def test_haar_member_replicates_match_dense_grams():
    rng = np.random.default_rng(0)
    points = np.concatenate([rng.random(60), [0.0, 1.0]])
    signs = rademacher_matrix(stream(1, 1), 40, len(points))
    nested = collection_from_id("Ne:Jbar=7")
    fast = member_replicates(nested, points, signs)
    dense = np.vstack([backends.chaos_batch(gram(m, points), signs) for m in nested.members])
    assert np.array_equal(fast, dense)  # integer-valued kernels: exact

    thresh = collection_from_id("Th:Jtilde=6")
    fast = member_replicates(thresh, points, signs)
    dense = np.vstack([backends.chaos_batch(gram(m, points), signs) for m in thresh.members])
    # sqrt(2^j) rounding in the dense route for odd j; the cell route is exact
    assert np.allclose(fast, dense, rtol=1e-12, atol=1e-9)


def test_member_observed_matches_single_statistic():
    pooled = _h0_pool(2)
    coll = singleton(ApproxKernel("gaussian", 0.25))
    observed = member_observed(coll, pooled.points, pooled.marks)
    direct = statistic(gram(coll.members[0], pooled.points), pooled.marks)
    assert observed[0] == direct  # bitwise: same ordered-pair kernel


def test_mixed_collection_replicates():
    pooled = _h0_pool(3)
    coll = KernelCollection(
        name="mixed",
        members=(HaarNested(2), ApproxKernel("gaussian", 0.25), HaarSingle((1, 0))),
        weights=np.array([0.5, 0.5, 0.5]),
    )
    signs = rademacher_matrix(stream(4, 0), 16, len(pooled))
    fast = member_replicates(coll, pooled.points, signs)
    for i, member in enumerate(coll.members):
        dense = backends.chaos_batch(gram(member, pooled.points), signs)
        assert np.allclose(fast[i], dense, rtol=1e-12)


# ---------------------------------------------------------------------------
# u_alpha estimation
# ---------------------------------------------------------------------------


def test_u_alpha_singleton_approaches_alpha():
    pooled = _h0_pool(5)
    matrix = gram(ApproxKernel("gaussian", 0.25), pooled.points)
    u = estimate_u_alpha([matrix], [0.0], 0.05, 20_000, 2.0**-10, stream(6, 0))
    assert u >= 0.05
    assert u == pytest.approx(0.05, abs=0.012)


def test_u_alpha_two_identical_members():
    pooled = _h0_pool(7)
    matrix = gram(ApproxKernel("gaussian", 0.25), pooled.points)
    w = math.log(2.0)  # sum e^{-w} = 1: still summable
    u = estimate_u_alpha([matrix, matrix], [w, w], 0.05, 20_000, 2.0**-10, stream(8, 0))
    # perfectly dependent members: family-wise probability is u e^{-w}
    assert u == pytest.approx(min(1.0, 0.05 * math.e**w), abs=0.025)
    # large weights push the cap to 1
    u_capped = estimate_u_alpha([matrix, matrix], [4.0, 4.0], 0.05, 20_000, 2.0**-10, stream(8, 1))
    assert u_capped == 1.0


def test_u_alpha_at_least_alpha_for_summable_collections():
    for seed, cid in enumerate(["Ne:Jbar=5", "Th:Jtilde=4", "single:haar:J=3"]):
        coll = collection_from_id(cid)
        pooled = _h0_pool(100 + seed)
        report = run_multi_test(coll, pooled, 0.05, 2000, stream(9, seed))
        assert report.u_alpha >= 0.05, cid


def test_u_alpha_validation():
    matrix = np.ones((4, 4))
    with pytest.raises(ValueError):
        estimate_u_alpha([matrix], [0.0], 0.05, 3, 2.0**-8, stream(0))  # b < 4
    with pytest.raises(ValueError):
        estimate_u_alpha([matrix], [0.0], 0.05, 11, 2.0**-8, stream(0))  # odd b
    with pytest.raises(ValueError):
        estimate_u_alpha([matrix], [0.0], 1.5, 8, 2.0**-8, stream(0))
    with pytest.raises(ValueError):
        estimate_u_alpha([matrix], [0.0], 0.05, 8, 0.0, stream(0))
    with pytest.raises(ValueError):
        estimate_u_alpha([matrix], [0.0, 1.0], 0.05, 8, 2.0**-8, stream(0))


def test_family_exceedance_monotone_in_u():
    pooled = _h0_pool(11)
    coll = collection_from_id("G")
    signs = rademacher_matrix(stream(12, 0), 2000, len(pooled))
    stats_matrix = member_replicates(coll, pooled.points, signs)
    sorted_half = np.sort(stats_matrix[:, :1000], axis=1)
    other = stats_matrix[:, 1000:]
    grid = np.linspace(0.01, 1.0, 60)
    values = [_family_exceedance(sorted_half, other, coll.weights, u) for u in grid]
    assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


def test_bisection_equals_exhaustive_scan():
    for seed, cid in enumerate(["Ne:Jbar=4", "G", "Th:Jtilde=3"]):
        coll = collection_from_id(cid)
        pooled = _h0_pool(200 + seed)
        grams = [gram(m, pooled.points) for m in coll.members]
        u_bisect = estimate_u_alpha(
            grams, coll.weights, 0.05, 2000, 2.0**-8, stream(13, seed), method="bisect"
        )
        u_scan = estimate_u_alpha(
            grams, coll.weights, 0.05, 2000, 2.0**-8, stream(13, seed), method="scan"
        )
        assert u_bisect == u_scan, cid


def test_exceedance_at_u_alpha_within_alpha():
    # by construction the estimated family-wise probability at the returned
    # u_alpha stays at or below alpha
    for seed, cid in enumerate(["Ne:Jbar=5", "G"]):
        coll = collection_from_id(cid)
        pooled = _h0_pool(300 + seed)
        signs = rademacher_matrix(stream(14, seed), 4000, len(pooled))
        stats_matrix = member_replicates(coll, pooled.points, signs)
        sorted_half = np.sort(stats_matrix[:, :2000], axis=1)
        other = stats_matrix[:, 2000:]
        report = run_multi_test(coll, pooled, 0.05, 4000, stream(14, seed))
        p = _family_exceedance(sorted_half, other, coll.weights, report.u_alpha)
        assert p <= 0.05


# ---------------------------------------------------------------------------
# the aggregated test
# ---------------------------------------------------------------------------


def test_multi_test_empty_pool_accepts():
    pooled = MarkedPool(points=np.zeros(0), marks=np.zeros(0, dtype=np.int8))
    report = run_multi_test(collection_from_id("Ne:Jbar=3"), pooled, 0.05, 64, stream(15))
    assert not report.reject
    assert all(m.statistic == 0.0 for m in report.per_member)


def test_singleton_multi_equals_single_test():
    # same sign stream, b aligned to the batch chunk: decisions and the
    # shared numeric pieces agree bitwise
    spec = ApproxKernel("gaussian", 0.25)
    coll = singleton(spec, weight=0.0)
    b = 8192
    for seed in range(10):
        pooled = _h0_pool(400 + seed)
        multi = run_multi_test(coll, pooled, 0.05, b, stream(16, seed))
        single = run_single_test(spec, pooled, multi.u_alpha, b // 2, stream(16, seed))
        assert single.statistic == multi.per_member[0].statistic
        assert single.quantile == multi.per_member[0].quantile
        assert single.reject == multi.reject


def test_multi_report_json():
    pooled = _h0_pool(17)
    report = run_multi_test(collection_from_id("Ne:Jbar=2"), pooled, 0.05, 128, stream(18))
    payload = json.loads(report.to_json())
    assert payload["collection"] == "Ne:Jbar=2"
    assert len(payload["per_member"]) == 3
    assert payload["reject"] == any(m["exceeded"] for m in payload["per_member"])
    assert 0.0 < payload["u_alpha"] <= 1.0
