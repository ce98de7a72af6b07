"""Tests for worst-case formulas, certificates, lower bounds, and the ratio table."""

import csv
import io
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from monoquad import (ControlVariate, InvariantError, SimpleMC, Staircase,
                      StrataSpec, Stratified, Trapezoid, UnitStep,
                      adversarial_pair, bound_reports_to_csv, evaluate,
                      exact_estimator_variance, exact_trapezoid_error,
                      lower_bound_lp, optimal_strata, point_sampler,
                      ratio_table, trapezoid_worst_case, var_fx_minus_x,
                      variance_lower_bound, worst_case_certificate,
                      worst_case_var_cv, worst_case_var_mc,
                      worst_case_var_stratified,
                      worst_case_var_stratified_restricted)
from monoquad.analysis import BOUND_REPORT_COLUMNS, sig12

from cases import STRATA_SPECS
from oracles import iid_miss_probability


# ---------------------------------------------------------------------------
# closed-form worst cases
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n, expected", [(1, 0.25), (4, 1 / 16), (10, 0.025)])
def test_plain_mc_worst_case(n, expected):
    assert worst_case_var_mc(n) == pytest.approx(expected, rel=1e-15)


@pytest.mark.parametrize("n, expected", [(1, 1 / 12), (2, 1 / 24), (10, 1 / 120)])
def test_control_variate_worst_case(n, expected):
    assert worst_case_var_cv(n) == pytest.approx(expected, rel=1e-15)


def test_worst_case_rejects_bad_n():
    for fn in (worst_case_var_mc, worst_case_var_cv, variance_lower_bound):
        with pytest.raises(InvariantError):
            fn(0)


def test_stratified_worst_case_for_the_optimal_design():
    cert = worst_case_var_stratified(optimal_strata(4))
    assert cert.value == pytest.approx(1 / 64, rel=1e-12)
    assert cert.witness == UnitStep(0.125)
    assert cert.metric == "variance"


def test_stratified_worst_case_picks_the_heaviest_stratum():
    cert = worst_case_var_stratified(StrataSpec((0.0, 0.25, 1.0), (1, 1)))
    assert cert.value == pytest.approx(9 / 64, rel=1e-15)
    assert cert.witness == UnitStep(0.625)


def test_stratified_worst_case_accounts_for_allocation():
    # w^2/n: first stratum 1/4 vs second 1/12, so the first wins.
    cert = worst_case_var_stratified(StrataSpec((0.0, 0.5, 1.0), (1, 3)))
    assert cert.value == pytest.approx(1 / 16, rel=1e-15)
    assert cert.witness == UnitStep(0.25)


def test_stratified_worst_case_breaks_ties_towards_the_first_stratum():
    # Both strata have exactly representable weight 1/2 and the same
    # allocation, so the maximum is an exact tie and the first stratum wins.
    cert = worst_case_var_stratified(StrataSpec((0.0, 0.5, 1.0), (2, 2)))
    assert cert.witness == UnitStep(0.25)
    assert cert.value == pytest.approx(1 / 32, rel=1e-15)


@pytest.mark.parametrize("strata", STRATA_SPECS, ids=str)
def test_stratified_certificates_are_attained_by_their_witness(strata):
    cert = worst_case_var_stratified(strata)
    attained = exact_estimator_variance(Stratified(strata), cert.witness)
    assert attained == pytest.approx(cert.value, rel=1e-12)


def test_certificates_for_every_estimator_kind():
    cert = worst_case_certificate(SimpleMC(6))
    assert cert.value == pytest.approx(1 / 24, rel=1e-15)
    assert exact_estimator_variance(SimpleMC(6), cert.witness) == pytest.approx(
        cert.value, rel=1e-12
    )
    cert = worst_case_certificate(Stratified(optimal_strata(2)))
    assert cert.value == pytest.approx(1 / 16, rel=1e-12)
    cert = worst_case_certificate(Trapezoid(3))
    assert cert.metric == "absolute_error"
    assert cert.value == pytest.approx(1 / 8, rel=1e-15)
    assert exact_trapezoid_error(3, cert.witness) == pytest.approx(cert.value, rel=1e-15)


def test_control_variate_certificate_is_attained_at_any_unit_step():
    cert = worst_case_certificate(ControlVariate(5))
    assert var_fx_minus_x(cert.witness) / 5 == pytest.approx(cert.value, rel=1e-12)


# ---------------------------------------------------------------------------
# restricted (bounded-increase) worst case
# ---------------------------------------------------------------------------

def test_restricted_worst_case_with_full_budget_on_the_heaviest_stratum():
    strata = StrataSpec((0.0, 0.25, 1.0), (1, 1))
    full = worst_case_var_stratified(strata).value
    deltas = (0.0, 1.0)  # all increase in the stratum that attains the max
    assert worst_case_var_stratified_restricted(strata, deltas) == pytest.approx(
        full, rel=1e-15
    )


def test_restricted_worst_case_vanishes_for_constant_functions():
    assert worst_case_var_stratified_restricted(optimal_strata(3), (0.0,) * 3) == 0.0


def test_restricted_worst_case_for_evenly_spread_increase():
    # Four equal strata, increase 1/4 in each: (1/4) * 4 * (1/16)(1/16) = 1/256.
    got = worst_case_var_stratified_restricted(optimal_strata(4), (0.25,) * 4)
    assert got == pytest.approx(1 / 256, rel=1e-12)


def test_restricted_worst_case_is_attained_by_midpoint_jumps():
    # Two equal strata, increase 1/2 in each; the staircase that jumps by
    # 1/2 at each stratum midpoint attains the bound exactly.
    strata = optimal_strata(2)
    bound = worst_case_var_stratified_restricted(strata, (0.5, 0.5))
    assert bound == pytest.approx(1 / 32, rel=1e-12)
    witness = Staircase((0.0, 0.5, 0.5, 1.0))
    attained = exact_estimator_variance(Stratified(strata), witness)
    assert attained == pytest.approx(bound, rel=1e-12)


def test_restricted_worst_case_validation():
    strata = optimal_strata(2)
    with pytest.raises(InvariantError):
        worst_case_var_stratified_restricted(strata, (0.5,))
    with pytest.raises(InvariantError):
        worst_case_var_stratified_restricted(strata, (-0.1, 0.5))
    with pytest.raises(InvariantError):
        worst_case_var_stratified_restricted(strata, (0.7, 0.7))


@given(
    d1=st.floats(min_value=0.0, max_value=0.5),
    d2=st.floats(min_value=0.0, max_value=0.5),
)
@settings(max_examples=50, deadline=None)
def test_property_restricted_never_exceeds_unrestricted(d1, d2):
    strata = StrataSpec((0.0, 0.375, 1.0), (2, 1))
    restricted = worst_case_var_stratified_restricted(strata, (d1, d2))
    assert restricted <= worst_case_var_stratified(strata).value + 1e-15


# ---------------------------------------------------------------------------
# optimal design and design comparisons
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 64])
def test_optimal_design_worst_case_is_inverse_quadratic(n):
    cert = worst_case_var_stratified(optimal_strata(n))
    assert cert.value == pytest.approx(1.0 / (4 * n * n), rel=1e-12)


def test_refining_a_stratum_never_hurts_the_worst_case():
    def refine(strata: StrataSpec, k: int) -> StrataSpec:
        # Split stratum k into allocation[k] equal substrata, one point each.
        nk = strata.allocation[k]
        lo, hi = strata.boundaries[k], strata.boundaries[k + 1]
        cuts = tuple(lo + (hi - lo) * j / nk for j in range(1, nk))
        bounds = strata.boundaries[: k + 1] + cuts + strata.boundaries[k + 1 :]
        alloc = strata.allocation[:k] + (1,) * nk + strata.allocation[k + 1 :]
        return StrataSpec(bounds, alloc)

    for strata in STRATA_SPECS:
        base = worst_case_var_stratified(strata).value
        for k in range(strata.K):
            refined = worst_case_var_stratified(refine(strata, k)).value
            assert refined <= base + 1e-15


def test_control_variate_versus_optimal_design_crossover():
    # Equal-allocation stratification beats the control variate exactly from
    # n = 4 on; at n = 3 the two worst cases coincide at 1/36.
    for n in (1, 2):
        assert worst_case_var_stratified(optimal_strata(n)).value > worst_case_var_cv(n)
    assert worst_case_var_stratified(optimal_strata(3)).value == pytest.approx(
        worst_case_var_cv(3), rel=1e-14
    )
    for n in range(4, 50):
        assert worst_case_var_stratified(optimal_strata(n)).value < worst_case_var_cv(n)


def test_control_variate_always_beats_plain_mc():
    for n in range(1, 100):
        assert worst_case_var_cv(n) < worst_case_var_mc(n)


# ---------------------------------------------------------------------------
# trapezoid rule worst case
# ---------------------------------------------------------------------------

def test_trapezoid_worst_case_values():
    assert trapezoid_worst_case(1) == (0.25, 0.0625)
    err, sq = trapezoid_worst_case(3)
    assert err == pytest.approx(0.125, rel=1e-15)
    assert sq == pytest.approx(1 / 64, rel=1e-15)


def test_trapezoid_worst_case_is_attained_and_decreasing():
    prev = math.inf
    for n in range(1, 30):
        err, sq = trapezoid_worst_case(n)
        assert sq == pytest.approx(err * err, rel=1e-15)
        assert err < prev
        prev = err
        # The all-zero function attains it: the rule still adds the f(1)=1
        # endpoint term while the true integral is 0.
        assert exact_trapezoid_error(n, Staircase((0.0,))) == pytest.approx(
            err, rel=1e-15
        )


# ---------------------------------------------------------------------------
# universal lower bounds
# ---------------------------------------------------------------------------

def test_lp_lower_bound_values():
    assert lower_bound_lp(1, 1) == pytest.approx(0.125, rel=1e-15)
    assert lower_bound_lp(1, 2) == pytest.approx(0.5**2.5, rel=1e-15)
    assert lower_bound_lp(4, 2) == pytest.approx(0.5**2.5 / 4, rel=1e-15)
    assert lower_bound_lp(2, math.inf) == pytest.approx(1 / 8, rel=1e-15)


def test_lp_lower_bound_monotonicity():
    for p in (1.0, 1.5, 2.0, 3.0, math.inf):
        values = [lower_bound_lp(n, p) for n in range(1, 30)]
        assert all(a > b for a, b in zip(values, values[1:]))
    for n in (1, 3, 10):
        by_p = [lower_bound_lp(n, p) for p in (1.0, 1.5, 2.0, 4.0, 16.0, math.inf)]
        assert all(a < b for a, b in zip(by_p, by_p[1:]))


def test_lp_lower_bound_rejects_bad_p():
    with pytest.raises(InvariantError):
        lower_bound_lp(3, 0.5)


def test_variance_lower_bound_is_the_squared_p2_bound():
    assert variance_lower_bound(1) == pytest.approx(1 / 32, rel=1e-15)
    assert variance_lower_bound(2) == pytest.approx(1 / 128, rel=1e-15)
    for n in range(1, 20):
        assert variance_lower_bound(n) == pytest.approx(
            lower_bound_lp(n, 2) ** 2, rel=1e-14
        )


def test_lower_bound_sits_below_every_unbiased_worst_case():
    for n in range(1, 65):
        lb = variance_lower_bound(n)
        assert lb <= worst_case_var_cv(n)
        assert lb <= worst_case_var_mc(n)
        assert lb <= worst_case_var_stratified(optimal_strata(n)).value + 1e-18


# ---------------------------------------------------------------------------
# adversarial pairs
# ---------------------------------------------------------------------------

def test_adversarial_pair_structure():
    pair = adversarial_pair(3, point_sampler(SimpleMC(3)), replications=512)
    m = 6
    assert pair.f1.m == m and pair.f2.m == m
    assert 1 <= pair.cell_index <= m
    lo, hi = pair.interval
    assert hi - lo == pytest.approx(1 / m, rel=1e-12)
    # The two functions agree except on the selected cell, where f1 = 1, f2 = 0.
    xs = np.linspace(0.001, 1.0, 997)
    y1, y2 = evaluate(pair.f1, xs), evaluate(pair.f2, xs)
    assert np.all(y1 >= y2)
    inside = (xs > lo) & (xs <= hi)
    assert np.all(y1[inside] == 1.0) and np.all(y2[inside] == 0.0)
    assert np.all(y1[~inside] == y2[~inside])
    assert pair.integral_gap == pytest.approx(1 / m, rel=1e-12)
    assert pair.replications == 512


def test_adversarial_pair_miss_probability_single_draw():
    pair = adversarial_pair(1, point_sampler(SimpleMC(1)), replications=4096, seed=3)
    se = math.sqrt(0.25 / 4096)
    assert abs(pair.miss_probability - 0.5) <= 4 * se


def test_adversarial_pair_matches_the_exact_binomial_for_iid_sampling():
    n, reps = 2, 8192
    pair = adversarial_pair(n, point_sampler(SimpleMC(n)), replications=reps, seed=1)
    p = float(iid_miss_probability(n))
    assert p == 9 / 16
    se = math.sqrt(p * (1 - p) / reps)
    assert abs(pair.miss_probability - p) <= 4 * se


def test_adversarial_pair_for_the_optimal_design_misses_half_the_time():
    # Each stratum of width 1/n covers two cells of width 1/(2n); its single
    # point lands in each half with probability exactly 1/2.
    n, reps = 4, 8192
    spec = Stratified(optimal_strata(n))
    pair = adversarial_pair(n, point_sampler(spec), replications=reps, seed=5)
    se = math.sqrt(0.25 / reps)
    assert abs(pair.miss_probability - 0.5) <= 4 * se


def test_adversarial_pair_rejects_out_of_range_samplers():
    with pytest.raises(InvariantError):
        adversarial_pair(2, lambda gen: gen.random(2) + 1.0, replications=8)
    with pytest.raises(InvariantError):
        adversarial_pair(2, point_sampler(SimpleMC(2)), replications=0)


def test_deterministic_node_samplers_always_miss_some_cell():
    # The trapezoid nodes are fixed, so some cell is missed every time.
    pair = adversarial_pair(2, point_sampler(Trapezoid(2)), replications=16)
    assert pair.miss_probability == 1.0


# ---------------------------------------------------------------------------
# ratio table and CSV rendering
# ---------------------------------------------------------------------------

def test_ratio_table_first_rows():
    rows = ratio_table(3)
    assert [r.n for r in rows] == [1, 2, 3]
    r1, r2, r3 = rows
    assert r1.mc_wc == pytest.approx(1 / 4, rel=1e-12)
    assert r1.cv_wc == pytest.approx(1 / 12, rel=1e-12)
    assert r1.lhs_wc == pytest.approx(1 / 4, rel=1e-12)
    assert r1.best_unbiased == pytest.approx(1 / 12, rel=1e-12)
    assert r1.var_lb == pytest.approx(1 / 32, rel=1e-12)
    assert r1.lp_lb_p2 == pytest.approx(0.5**2.5, rel=1e-12)
    assert r1.trap_sq_err == pytest.approx(1 / 16, rel=1e-12)
    assert r1.ratio_unbiased == pytest.approx(8 / 3, rel=1e-12)
    assert r2.ratio_unbiased == pytest.approx(16 / 3, rel=1e-12)
    assert r3.ratio_unbiased == pytest.approx(8.0, rel=1e-12)
    assert r3.best_unbiased == pytest.approx(1 / 36, rel=1e-12)
    assert r3.ratio_trap == pytest.approx(16 / 9, rel=1e-12)


def test_ratio_table_matches_exact_rational_arithmetic():
    for row in ratio_table(40):
        n = row.n
        best = min(Fraction(1, 12 * n), Fraction(1, 4 * n * n))
        assert row.best_unbiased == pytest.approx(float(best), rel=1e-12)
        assert row.ratio_unbiased == pytest.approx(
            float(best / Fraction(1, 32 * n * n)), rel=1e-12
        )
        trap_sq = Fraction(1, 4 * (n + 1) * (n + 1))
        assert row.trap_sq_err == pytest.approx(float(trap_sq), rel=1e-12)
        assert row.ratio_trap == pytest.approx(float(best / trap_sq), rel=1e-12)


def test_ratio_of_best_unbiased_to_the_lower_bound_saturates_at_eight():
    rows = ratio_table(200)
    for row in rows:
        if row.n >= 3:
            assert row.ratio_unbiased == pytest.approx(8.0, rel=1e-12)
        else:
            assert row.ratio_unbiased < 8.0


def test_trapezoid_advantage_peaks_at_three_nodes():
    rows = ratio_table(200)
    ratios = [row.ratio_trap for row in rows]
    assert int(np.argmax(ratios)) == 2  # n = 3
    assert max(ratios) == pytest.approx(16 / 9, rel=1e-12)
    # Beyond the peak the advantage decays monotonically towards 1.
    assert all(a > b for a, b in zip(ratios[2:], ratios[3:]))
    assert ratios[-1] > 1.0


def test_bound_report_csv_layout():
    text = bound_reports_to_csv(ratio_table(2))
    lines = text.splitlines()
    assert lines[0] == ",".join(BOUND_REPORT_COLUMNS)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert len(rows) == 2
    assert rows[0]["n"] == "1"
    assert rows[0]["lp_lb_p2"] == "0.176776695297"
    assert rows[0]["ratio_unbiased"] == "2.66666666667"
    assert float(rows[1]["ratio_unbiased"]) == pytest.approx(16 / 3, rel=1e-11)


def test_sig12_formatting():
    assert sig12(0.5) == "0.5"
    assert sig12(1 / 3) == "0.333333333333"
    assert sig12(8 / 3) == "2.66666666667"
    assert sig12(1e-30) == "1e-30"
