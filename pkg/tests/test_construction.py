"""Construction family tests.

Closed-form origin rates are checked against the independent chain-rule jet
oracle (rate_from_jets), exactly wherever the arithmetic is exact. Frozen
calibration values were computed with that oracle ahead of time.
"""

import math
from fractions import Fraction

import pytest

from pmeconcavity.construction import (
    ConstructionParams,
    Family,
    SteepnessSearchError,
    build_family,
    build_scaled_family,
    build_unit_family,
    c_quartic_constant,
    family_for_alpha,
    origin_rate,
    origin_rate_raw_scaled,
    origin_rate_shifted,
    solve_steepness,
)
from pmeconcavity.exact import SqrtExt
from pmeconcavity.jets import jet_from_poly
from pmeconcavity.poly import Poly
from pmeconcavity.rates import (
    log_rate_bracket_from_jets,
    rate_from_jets,
    relative_gap,
)


def params_for(alpha, m, n, steepness):
    return ConstructionParams(
        alpha=alpha, m=m, n=n, family=family_for_alpha(alpha), steepness=steepness)


def origin(n):
    return (Fraction(0),) * n


# -- family selection and validation -----------------------------------------


def test_family_for_alpha_ranges():
    assert family_for_alpha(Fraction(0)) == Family.UNIT
    assert family_for_alpha(Fraction(1, 4)) == Family.UNIT
    assert family_for_alpha(Fraction(49, 100)) == Family.UNIT
    assert family_for_alpha(Fraction(1)) == Family.UNIT
    assert family_for_alpha(Fraction(51, 100)) == Family.SCALED
    assert family_for_alpha(Fraction(3, 4)) == Family.SCALED
    assert family_for_alpha(Fraction(9, 10)) == Family.SCALED


def test_half_alpha_excluded_everywhere():
    with pytest.raises(ValueError):
        family_for_alpha(Fraction(1, 2))
    with pytest.raises(ValueError):
        family_for_alpha(0.5)
    with pytest.raises(ValueError):
        params_for(Fraction(1, 2), Fraction(2), 2, Fraction(1))
    with pytest.raises(ValueError):
        family_for_alpha(Fraction(-1, 10))
    with pytest.raises(ValueError):
        family_for_alpha(Fraction(11, 10))


def test_params_validation():
    with pytest.raises(ValueError):
        ConstructionParams(alpha=Fraction(1, 4), m=Fraction(2), n=2,
                           family=Family.SCALED, steepness=Fraction(1))
    with pytest.raises(ValueError):
        params_for(Fraction(1, 4), Fraction(1), 2, Fraction(1))
    with pytest.raises(ValueError):
        params_for(Fraction(1, 4), Fraction(2), 1, Fraction(1))
    with pytest.raises(ValueError):
        params_for(Fraction(1, 4), Fraction(2), 2, Fraction(0))
    with pytest.raises(ValueError):
        build_unit_family(Fraction(3, 4), 2, Fraction(1))
    with pytest.raises(ValueError):
        build_scaled_family(Fraction(1, 4), 2, Fraction(1))


# -- polynomial structure ----------------------------------------------------


def test_unit_family_terms_and_symmetry():
    p = build_unit_family(Fraction(1, 4), 3, Fraction(2))
    assert p.terms[(0, 0, 0)] == 1
    assert p.terms[(1, 0, 0)] == 2
    assert p.terms[(4, 0, 0)] == -1
    assert p.terms[(1, 2, 0)] == 1 and p.terms[(1, 0, 2)] == 1
    assert p.terms[(0, 2, 0)] == -1 and p.terms[(0, 0, 2)] == -1
    assert p.terms[(2, 2, 0)] == -2 and p.terms[(2, 0, 2)] == -2
    assert len(p.terms) == 9
    # invariant under permuting the tail axes
    assert p.permute_vars([0, 2, 1]) == p


def test_scaled_family_terms_and_symmetry():
    alpha, b = Fraction(3, 4), Fraction(2)
    p = build_scaled_family(alpha, 3, b)
    s2 = Fraction(3, 2) - alpha
    assert p.terms[(0, 0, 0)] == 1
    # slope alpha s / (b (1 - alpha)) = (3/4) s / (2 * 1/4) = (3/2) s
    assert p.terms[(1, 0, 0)] == SqrtExt(0, Fraction(3, 2), s2)
    assert p.terms[(4, 0, 0)] == Fraction(-1, 48)
    assert p.terms[(0, 2, 0)] == -4
    assert p.terms[(1, 2, 0)] == SqrtExt(0, Fraction(2), s2)
    assert p.terms[(2, 2, 0)] == -1
    assert p.permute_vars([0, 2, 1]) == p
    assert p.extension_square() == s2


def test_origin_hessian_structure():
    # single zero eigenvalue in the x1 direction, strict negatives elsewhere
    for params in [params_for(Fraction(1, 4), Fraction(2), 3, Fraction(2)),
                   params_for(Fraction(3, 4), Fraction(2), 3, Fraction(2))]:
        jet = jet_from_poly(build_family(params), origin(3), 4)
        n = params.n
        for i in range(n):
            for j in range(n):
                idx = [0] * n
                idx[i] += 1
                idx[j] += 1
                h = jet.partial(tuple(idx))
                if i != j or i == 0:
                    assert h == 0
                else:
                    expected = -2 if params.family == Family.UNIT \
                        else -2 * params.steepness ** 2
                    assert h == expected


# -- frozen calibration values (computed with the chain-rule oracle) ---------


def test_unit_quarter_alpha_frozen_breakdown():
    params = params_for(Fraction(1, 4), Fraction(2), 2, Fraction(1))
    breakdown = origin_rate(params)
    assert breakdown.terms["lap11"] == -32
    assert breakdown.terms["slope_lap1"] == 16
    assert breakdown.terms["slope2_lap"] == -24
    assert breakdown.terms["slope2_grad2"] == 42
    assert breakdown.total == 2
    jet = jet_from_poly(build_family(params), origin(2), 4)
    assert rate_from_jets(jet, params.alpha, params.m) == Fraction(2)


def test_unit_zero_rate_calibrations():
    # steepness values tuned so the four displayed terms cancel exactly
    for alpha, m, n, a in [(Fraction(0), Fraction(2), 2, Fraction(2)),
                           (Fraction(1), Fraction(2), 2, Fraction(8)),
                           (Fraction(1), Fraction(2), 3, Fraction(5))]:
        params = params_for(alpha, m, n, a)
        assert origin_rate(params).total == 0
        jet = jet_from_poly(build_family(params), origin(n), 4)
        if alpha == 0:
            assert log_rate_bracket_from_jets(jet, m) == 0
            assert rate_from_jets(jet, alpha, m) == 0.0
        else:
            assert rate_from_jets(jet, alpha, m) == 0


def test_scaled_frozen_value_and_quartic_constant():
    assert c_quartic_constant(Fraction(3, 4), Fraction(2)) == Fraction(135, 8)
    params = params_for(Fraction(3, 4), Fraction(2), 3, Fraction(2))
    breakdown = origin_rate(params)
    assert breakdown.c_quartic == Fraction(135, 8)
    assert breakdown.terms["curvature"] == Fraction(-1, 2)
    assert breakdown.terms["quartic"] == Fraction(-135, 128)
    assert breakdown.terms["excess"] == 4
    assert breakdown.total == Fraction(313, 128)
    jet = jet_from_poly(build_family(params), origin(3), 4)
    assert rate_from_jets(jet, params.alpha, params.m) == Fraction(313, 128)


def test_scaled_raw_five_terms_match_three_term_display():
    params = params_for(Fraction(3, 4), Fraction(2), 3, Fraction(2))
    raw = origin_rate_raw_scaled(params)
    assert raw.terms["lap11_quartic"] == Fraction(-1, 2)
    assert raw.terms["lap11_cross"] == -8
    assert raw.terms["slope_lap1"] == 24
    assert raw.terms["slope2_lap"] == -12
    assert raw.terms["slope2_grad2"] == Fraction(-135, 128)
    assert raw.total == origin_rate(params).total
    assert raw.total == origin_rate_shifted(params, Fraction(1)).total
    # positivity of the quartic constant across the scaled range
    for alpha in [Fraction(51, 100), Fraction(3, 5), Fraction(3, 4), Fraction(99, 100)]:
        for m in [Fraction(3, 2), Fraction(2), Fraction(3)]:
            assert c_quartic_constant(alpha, m) > 0


# -- closed forms against the chain-rule oracle across the sweep -------------


@pytest.mark.parametrize("alpha", [Fraction(0), Fraction(1, 10), Fraction(1, 4),
                                   Fraction(2, 5), Fraction(3, 5), Fraction(3, 4),
                                   Fraction(9, 10), Fraction(1)])
@pytest.mark.parametrize("m", [Fraction(3, 2), Fraction(2), Fraction(3)])
def test_origin_rate_matches_oracle(alpha, m):
    for n in (2, 3):
        params = params_for(alpha, m, n, Fraction(2))
        total = origin_rate(params).total
        jet = jet_from_poly(build_family(params), origin(n), 4)
        if alpha == 0:
            assert total == log_rate_bracket_from_jets(jet, m)
            got = rate_from_jets(jet, alpha, m)
            assert relative_gap(got, math.exp(1.0) * float(total)) < 1e-12
        else:
            assert rate_from_jets(jet, alpha, m) == total


def test_shifted_base_closed_form_matches_jet_oracle():
    c0 = Fraction(5, 4)
    shift = Poly.constant(2, c0 - 1)
    # integer q cases stay exact after the shift
    for alpha, m in [(Fraction(1), Fraction(2)), (Fraction(1, 4), Fraction(3, 2))]:
        params = params_for(alpha, m, 2, Fraction(3))
        jet = jet_from_poly(build_family(params) + shift, origin(2), 4)
        want = rate_from_jets(jet, alpha, m)
        got = origin_rate_shifted(params, c0).total
        assert got == want
    # fractional q drops to float on the base powers
    for alpha, m in [(Fraction(3, 10), Fraction(2)), (Fraction(3, 4), Fraction(2))]:
        params = params_for(alpha, m, 3, Fraction(2))
        jet = jet_from_poly(build_family(params) + Poly.constant(3, c0 - 1), origin(3), 4)
        want = rate_from_jets(jet, alpha, m)
        got = origin_rate_shifted(params, c0).total
        assert relative_gap(got, want) < 1e-9


def test_alpha_zero_rate_ignores_base_shift():
    params = params_for(Fraction(0), Fraction(2), 3, Fraction(3))
    base = origin_rate_shifted(params, Fraction(1))
    shifted = origin_rate_shifted(params, Fraction(7, 2))
    assert base.total == shifted.total
    jet = jet_from_poly(build_family(params) + Poly.constant(3, Fraction(5, 2)), origin(3), 4)
    assert log_rate_bracket_from_jets(jet, params.m) == base.total


# -- steepness search --------------------------------------------------------


def test_solve_steepness_headline_grid_point():
    # alpha=1, m=2, n=3: total = 8a - 40, first positive grid point is k = 81
    a = solve_steepness(Fraction(1), Fraction(2), 3, margin=Fraction(1, 1000))
    assert a == Fraction(1, 10) * Fraction(21, 20) ** 81
    assert abs(float(a) - 5.204) < 1e-2


def test_solve_steepness_semantics():
    cases = [(Fraction(1), Fraction(2), 3, Fraction(1, 2)),
             (Fraction(1, 4), Fraction(2), 2, Fraction(1, 2)),
             (Fraction(0), Fraction(3), 4, Fraction(1, 2)),
             (Fraction(3, 4), Fraction(2), 3, Fraction(1, 2)),
             (Fraction(9, 10), Fraction(3, 2), 2, Fraction(1, 4))]
    for alpha, m, n, margin in cases:
        a = solve_steepness(alpha, m, n, margin=margin)
        params = params_for(alpha, m, n, a)
        rate = origin_rate(params).total
        if params.family == Family.UNIT:
            lead = (m - 1) * (24 + 8 * (n - 1))
        else:
            lead = 2 * (m - 1) / a ** 2
        assert rate >= margin * lead
        doubled = origin_rate(params_for(alpha, m, n, 2 * a)).total
        assert doubled > 0
        # grid minimality: the previous grid value fails the joint criterion
        prev = a / Fraction(21, 20)
        if prev >= Fraction(1, 10):
            pp = params_for(alpha, m, n, prev)
            prate = origin_rate(pp).total
            if params.family == Family.UNIT:
                plead = lead
            else:
                plead = 2 * (m - 1) / prev ** 2
            pdoubled = origin_rate(params_for(alpha, m, n, 2 * prev)).total
            assert prate < margin * plead or not pdoubled > 0


def test_solve_steepness_with_shifted_base():
    c0 = Fraction(3)
    a = solve_steepness(Fraction(1), Fraction(2), 3, margin=Fraction(1, 2), base_value=c0)
    params = params_for(Fraction(1), Fraction(2), 3, a)
    rate = origin_rate_shifted(params, c0).total
    lead = (params.m - 1) * (24 + 8 * (params.n - 1)) * c0
    assert rate >= Fraction(1, 2) * lead
    # alpha = 1 rate scales linearly in the base, so steepness scales with c0
    plain = solve_steepness(Fraction(1), Fraction(2), 3, margin=Fraction(1, 2))
    assert a > plain


def test_solve_steepness_margin_validation():
    with pytest.raises(ValueError):
        solve_steepness(Fraction(1), Fraction(2), 3, margin=Fraction(0))
    with pytest.raises(ValueError):
        solve_steepness(Fraction(1), Fraction(2), 3, margin=Fraction(1))


# -- float fallback path -----------------------------------------------------


def test_float_alpha_paths_track_exact_values():
    exact = params_for(Fraction(3, 4), Fraction(2), 3, Fraction(2))
    p_float = build_scaled_family(0.75, 3, 2.0)
    p_exact = build_family(exact)
    for idx, c in p_exact.terms.items():
        assert abs(float(c) - float(p_float.terms[idx])) < 1e-12
    loose = ConstructionParams(alpha=0.75, m=2.0, n=3, family=Family.SCALED,
                               steepness=2.0)
    assert relative_gap(origin_rate(loose).total, Fraction(313, 128)) < 1e-12
