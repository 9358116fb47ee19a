import math

import pytest

import rdcache


def h2(p):
    return 0.0 if p in (0.0, 1.0) else -p * math.log2(p) - (1 - p) * math.log2(1 - p)


def test_library_roundtrip():
    lib = rdcache.SourceLibrary([2, 2], [0.4, 0.1, 0.2, 0.3])
    assert lib.num_sources == 2
    assert lib.marginal(0) == pytest.approx([0.5, 0.5])
    assert lib.distortion(1) == [[0.0, 1.0], [1.0, 0.0]]


def test_invalid_library_raises():
    with pytest.raises(rdcache.RdcacheError):
        rdcache.SourceLibrary([2, 2], [0.5, 0.5, 0.5, -0.5])


def test_binary_rd():
    assert rdcache.rd_function([0.5, 0.5], D=0.1) == pytest.approx(1 - h2(0.1), abs=1e-8)


def test_dsbs_rdc_matches_closed_form():
    rho = 0.1
    lib = rdcache.dsbs_library(rho)
    C = 1.0
    lower, upper = rdcache.dsbs_rdc_bounds(rho, C)
    assert lower == pytest.approx(upper, abs=1e-9)
    point = rdcache.rdc_value(lib, [0.0, 0.0], C, restarts=4)
    assert point["rate"] == pytest.approx((1 + h2(rho) - C) / 2, abs=2e-3)
    assert point["cache_used"] <= C + 1e-6


def test_curve_and_bounds():
    lib = rdcache.dsbs_library(0.2)
    rows = rdcache.rdc_curve(lib, [0.05, 0.05], [0.0, 0.5, 1.0], restarts=4)
    rates = [r["rate"] for r in rows]
    assert rates == sorted(rates, reverse=True)
    for r in rows:
        assert r["super_genie"] <= r["rate"] + 1e-9
    b = rdcache.bounds(lib, [0.05, 0.05], 0.5)
    assert b["super_genie"] >= max(b["genie"], b["superuser"]) - 1e-12


def test_common_information():
    lib = rdcache.SourceLibrary([2, 2], [0.5, 0.0, 0.0, 0.5])
    assert rdcache.gacs_korner(lib) == pytest.approx(1.0)
    assert rdcache.wyner_ci_dsbs(0.0) == pytest.approx(1.0)


def test_gaussian():
    rate, region, exact = rdcache.gaussian_rdc(0.8, 0.1, 2.0)
    assert region == "S2" and exact
    assert rate == pytest.approx(0.29248, abs=1e-5)


def test_f_separable_identity_and_dict_transform():
    lib = rdcache.dsbs_library(0.2)
    ident = rdcache.DistortionTransform.identity()
    a = rdcache.f_separable_rdc(lib, [ident, ident], [0.05, 0.05], 0.3)
    b = rdcache.rdc_value(lib, [0.05, 0.05], 0.3)
    assert a["rate"] == b["rate"]
    sq = {"kind": "power", "params": 2}
    c = rdcache.f_separable_rdc(lib, [sq, sq], [0.1, 0.1], 0.3)
    d = rdcache.rdc_value(lib, [0.1 * 0.1, 0.1 * 0.1], 0.3)
    assert c["rate"] == pytest.approx(d["rate"], abs=1e-12)


def test_two_user():
    lower, upper = rdcache.two_user_dsbs_bounds(0.1, 0.03, 0.1)
    assert lower == pytest.approx(1.17461, abs=1e-4)
    assert upper == pytest.approx(1.17461, abs=1e-4)
    lib = rdcache.SourceLibrary([2, 2], [0.4, 0.1, 0.2, 0.3])
    lo, up = rdcache.two_user_bounds(lib, [0, 1], [0, 1], [0.0, 0.0], C=0.3, aux_size=2)
    assert lo <= up + 1e-9
    assert up - lo < 0.02
