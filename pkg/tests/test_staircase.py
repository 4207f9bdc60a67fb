import random
from fractions import Fraction
from unittest.mock import patch

import mpmath
import pytest

from sos_staircase.core.scalar import precision
from sos_staircase.exceptions import BracketFailure, DomainError, NumericalBreakdown
from sos_staircase.models import (
    Enclosure,
    Evidence,
    FeasibilityResult,
    FeasibilityStatus,
    LoStatus,
    SolverParams,
    StaircasePoint,
)
from sos_staircase.services.staircase import (
    bound_curves,
    closed_form_eps2,
    closed_form_eps3_upper,
    epsilon_threshold,
    eps2_discriminant,
    eps3_certificate,
    eps3_sextic,
    exactness_feasible,
    farkas_determinant,
    farkas_witness,
    fit_slope,
    point_from_json,
    point_to_json,
    staircase_point,
    sweep,
    theoretical_bounds,
)

EXACTNESS = "sos_staircase.services.staircase.exactness_feasible"


def _threshold_oracle(threshold: str, undecided_band: tuple[str, str] | None = None):
    """Заглушка проверки точности: Feasible при ε ≥ threshold."""
    def fake(eps, d, params):
        value = mpmath.mpf(eps)
        if undecided_band and mpmath.mpf(undecided_band[0]) < value < mpmath.mpf(undecided_band[1]):
            status = FeasibilityStatus.UNDECIDED
        elif value >= mpmath.mpf(threshold):
            status = FeasibilityStatus.FEASIBLE
        else:
            status = FeasibilityStatus.INFEASIBLE
        return FeasibilityResult(status=status, precision=params.precision)
    return fake


# --- 1. ГРАНИЦЫ ---

def test_theoretical_bounds_first_index():
    with precision(128):
        lower, upper = theoretical_bounds(1)
        assert upper == Fraction(1, 4)
        assert abs(lower - mpmath.mpf("4.2114e-3")) < mpmath.mpf("1e-6")


def test_theoretical_bounds_second_index():
    with precision(128):
        lower, upper = theoretical_bounds(2)
        assert upper == Fraction(1, 16)
        assert abs(lower - mpmath.mpf("1.7886e-5")) < mpmath.mpf("1e-8")
    with pytest.raises(DomainError):
        theoretical_bounds(-1)


def test_bound_curves_are_logs_of_bounds():
    with precision(128):
        ((d, ln_upper, ln_lower),) = bound_curves([2])
        assert d == 2
        assert abs(ln_upper - mpmath.log(4)) < mpmath.mpf(10) ** -30
        assert ln_lower > ln_upper


# --- 2. ЗАМКНУТЫЕ ФОРМУЛЫ ---

def test_closed_form_eps2():
    with precision(256):
        eps2 = closed_form_eps2()
        assert mpmath.mpf("0.1339740") < eps2 < mpmath.mpf("0.1339750")
        assert abs(eps2_discriminant(eps2)) < mpmath.mpf(10) ** -70


def test_closed_form_eps3_is_sextic_root():
    with precision(256):
        eps3 = closed_form_eps3_upper()
        assert mpmath.mpf("4.712522e-3") < eps3 < mpmath.mpf("4.7125518e-3")
        assert abs(eps3_sextic(eps3)) < mpmath.mpf(10) ** -60


def test_eps3_certificate_matches_closed_form(params256):
    cert = eps3_certificate(params256)
    assert cert.order == 3
    assert cert.r_tilde is not None
    with precision(256):
        assert abs(cert.epsilon - closed_form_eps3_upper()) < mpmath.mpf(10) ** -60


# --- 3. СВИДЕТЕЛЬ ФАРКАША ---

def test_farkas_witness_inside_range():
    report = farkas_witness(mpmath.mpf("0.9"), bits=128)
    assert report.passed
    assert report.u1_negative
    with precision(128):
        assert abs(report.determinant_term - mpmath.mpf("0.0255789")) < mpmath.mpf("1e-6")
        assert report.first_block_min_eig > 0
        assert report.second_block_min_eig > 0


def test_farkas_witness_near_one():
    report = farkas_witness(mpmath.mpf("0.99"), bits=128)
    assert report.passed
    with precision(128):
        assert report.xi == mpmath.mpf("1e-3")


def test_farkas_witness_on_sampled_etas():
    """50 случайных η из (√3/2 + 10⁻³, 1 − 10⁻³)."""
    rng = random.Random(11)
    with precision(128):
        lo = mpmath.sqrt(3) / 2 + mpmath.mpf("1e-3")
        hi = 1 - mpmath.mpf("1e-3")
        etas = [lo + (hi - lo) * mpmath.mpf(rng.random()) for _ in range(50)]
    for eta in etas:
        report = farkas_witness(eta, bits=128)
        assert report.passed
        assert report.u1_negative


def test_farkas_determinant_vanishes_at_sqrt3_over_2():
    with precision(128):
        assert abs(farkas_determinant(mpmath.sqrt(3) / 2)) < mpmath.mpf(10) ** -30


def test_farkas_witness_outside_range():
    with pytest.raises(DomainError):
        farkas_witness(Fraction(1, 2))


# --- 4. ПРОВЕРКА ТОЧНОСТИ ---

def test_exactness_above_eps2(params):
    assert exactness_feasible(Fraction(1, 5), 2, params).status == FeasibilityStatus.FEASIBLE


def test_exactness_below_eps2(params):
    assert exactness_feasible(Fraction(1, 10), 2, params).status == FeasibilityStatus.INFEASIBLE


# --- 5. БИСЕКЦИЯ ---

def test_first_threshold_is_degenerate(params):
    enclosure = epsilon_threshold(1, Fraction(1, 10 ** 6), params)
    assert enclosure.lo == enclosure.hi == 1
    assert enclosure.evidence.lo_status == LoStatus.THEORETICAL_BOUND


def test_bisection_encloses_threshold(params):
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.134")):
        enclosure = epsilon_threshold(2, Fraction(1, 10 ** 4), params)
    with precision(params.precision):
        assert enclosure.lo < mpmath.mpf("0.134") <= enclosure.hi
        assert enclosure.hi - enclosure.lo <= mpmath.mpf("1e-4")
    assert enclosure.evidence.lo_status == LoStatus.INFEASIBLE
    assert enclosure.evidence.precisions == (params.precision,)
    assert enclosure.evidence.undecided_at is None


def test_bisection_relative_width_stops_early(params):
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.134")) as exactness:
        epsilon_threshold(2, Fraction(1, 10 ** 12), params, rel_width=Fraction(1, 10))
    assert exactness.call_count < 20


def test_bisection_escalates_then_stops_on_undecided(params):
    oracle = _threshold_oracle("0.134", undecided_band=("0.03", "0.2"))
    with patch(EXACTNESS, side_effect=oracle):
        enclosure = epsilon_threshold(2, Fraction(1, 10 ** 6), params, max_prec=512)
    assert enclosure.evidence.undecided_at is not None
    assert enclosure.evidence.precisions == (128, 256, 512)
    assert enclosure.hi > mpmath.mpf("0.2")


def test_bisection_treats_breakdown_as_undecided(params):
    def broken(eps, d, params):
        if mpmath.mpf(eps) < mpmath.mpf("0.2") and mpmath.mpf(eps) > mpmath.mpf("0.01"):
            raise NumericalBreakdown("lost definiteness")
        return _threshold_oracle("0.134")(eps, d, params)

    with patch(EXACTNESS, side_effect=broken):
        enclosure = epsilon_threshold(2, Fraction(1, 10 ** 6), params, max_prec=256)
    assert enclosure.evidence.undecided_at is not None


def test_bracket_failure_when_upper_bound_is_not_feasible(params):
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.5")):
        with pytest.raises(BracketFailure):
            epsilon_threshold(2, Fraction(1, 10 ** 6), params, max_prec=128)


def test_staircase_point_records_errors(params):
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.5")):
        point = staircase_point(2, Fraction(1, 10 ** 6), params)
    assert point.enclosure is None
    assert "upper bound" in point.error
    assert not point.sandwich_ok


def test_staircase_point_sandwich_mixes_scalar_types(params):
    """Границы: mpf снизу и Fraction сверху; концы оценки: mpf."""
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.134")):
        point = staircase_point(2, Fraction(1, 10 ** 4), params)
    assert isinstance(point.upper_bound, Fraction)
    assert isinstance(point.enclosure.hi, mpmath.mpf)
    assert point.sandwich_ok


def test_first_order_point_is_sandwiched(params):
    point = staircase_point(1, Fraction(1, 10 ** 4), params)
    assert point.enclosure.hi == 1
    assert point.sandwich_ok
    with precision(params.precision):
        assert point.enclosure.width == 0


@pytest.mark.slow
def test_second_threshold(params256):
    enclosure = epsilon_threshold(2, Fraction(1, 10 ** 7), params256)
    with precision(256):
        assert enclosure.lo >= mpmath.mpf("0.1339740")
        assert enclosure.hi <= mpmath.mpf("0.1339750")


@pytest.mark.slow
def test_third_threshold(params256):
    enclosure = epsilon_threshold(3, Fraction(1, 10 ** 9), params256, rel_width=Fraction(1, 10 ** 5))
    with precision(256):
        assert enclosure.lo <= mpmath.mpf("4.7125518e-3")
        assert enclosure.hi >= mpmath.mpf("4.712522e-3")


# --- 6. ЛЕСТНИЦА ---

def _point(d: int, hi) -> StaircasePoint:
    enclosure = Enclosure(lo=hi / 2, hi=hi, evidence=Evidence(lo_status=LoStatus.INFEASIBLE, precisions=(128,), probes=3))
    lower, upper = theoretical_bounds(d - 1)
    return StaircasePoint(d=d, enclosure=enclosure, lower_bound=lower, upper_bound=upper, precision_bits=128)


def test_fit_slope_through_two_points():
    with precision(128):
        points = [_point(2, mpmath.exp(-2)), _point(3, mpmath.exp(-5.5))]
        assert abs(fit_slope(points) - mpmath.mpf("3.5")) < mpmath.mpf(10) ** -20
        assert fit_slope(points[:1]) is None


def test_point_json_restores_enclosure():
    with precision(128):
        point = _point(2, mpmath.mpf("0.134"))
    restored = point_from_json(point_to_json(point), bits=128)
    assert restored.d == 2
    assert restored.enclosure.evidence.probes == 3
    with precision(128):
        assert abs(restored.enclosure.hi - point.enclosure.hi) < mpmath.mpf(10) ** -30


def test_sweep_continues_after_failed_order(params):
    with patch(EXACTNESS, side_effect=_threshold_oracle("0.134")):
        points, slope = sweep([1, 2, 3], params, target_width=Fraction(1, 10 ** 3), jobs=1)
    assert [p.d for p in points] == [1, 2, 3]
    assert points[0].enclosure.hi == 1
    assert points[1].enclosure is not None
    # для d = 3 порог 0.134 выше верхней границы 1/16
    assert points[2].error is not None
    assert slope is None


def test_sweep_uses_dispatch_for_parallel_jobs(params):
    with precision(128):
        doc = point_to_json(_point(2, mpmath.mpf("0.134")))
    with patch("sos_staircase.services.dispatch.run_cells", return_value=[doc]) as run_cells:
        points, _ = sweep([2], SolverParams(precision=128), jobs=2)
    assert run_cells.call_args.args[0] == "threshold"
    assert points[0].d == 2
