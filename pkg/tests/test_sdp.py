from fractions import Fraction
from unittest.mock import patch

import mpmath
import pytest
from mpmath import mp

from sos_staircase.core.scalar import precision
from sos_staircase.core.sdp import inverse_spd, psd_check, sdp_feasibility, sdp_solve, solve_max_margin, with_margin_variable
from sos_staircase.exceptions import NumericalBreakdown
from sos_staircase.models import FeasibilityStatus, LinearEquality, SdpBlock, SdpProblem, SdpStatus


def _disk_problem() -> SdpProblem:
    """min y0 при [[y0, 1], [1, y0]] ⪰ 0: оптимум y0 = 1."""
    block = SdpBlock(dim=2, constant=((0, 1, 1),), coeffs={0: ((0, 0, 1), (1, 1, 1))})
    return SdpProblem(num_vars=1, objective=(Fraction(1),), blocks=(block,), labels=("y0",))


# --- 1. МАТРИЧНЫЕ ПРОВЕРКИ ---

def test_psd_check_bounds_min_eigenvalue_from_below():
    with precision(128):
        value = psd_check(mp.matrix([[1, 0], [0, 2]]))
        assert mpmath.mpf("0.999") < value <= 1
        assert psd_check([[1, 2], [2, 1]]) < 0


def test_psd_check_accepts_explicit_bits():
    value = psd_check([[Fraction(1, 3), 0], [0, 1]], bits=256)
    with precision(256):
        assert abs(value - mpmath.mpf(1) / 3) < mpmath.mpf(10) ** -30


def test_inverse_spd_breaks_down_on_indefinite_input():
    with precision(128):
        with pytest.raises(NumericalBreakdown):
            inverse_spd(mp.matrix([[1, 2], [2, 1]]))


# --- 2. РЕШАТЕЛЬ ---

def test_sdp_block_rejects_entries_outside_dimension():
    with pytest.raises(ValueError):
        SdpBlock(dim=1, coeffs={0: ((0, 1, 1),)})


def test_sdp_solve_reaches_optimum(params):
    solution = sdp_solve(_disk_problem(), params)
    assert solution.status == SdpStatus.OPTIMAL
    with precision(params.precision):
        assert abs(solution.primal_obj - 1) < mpmath.mpf(10) ** -15
        assert solution.gap <= mpmath.mpf(params.gap_tol)


def test_sdp_solve_keeps_equalities(params):
    """min y0 + y1 при [[y0, 1], [1, y1]] ⪰ 0 и y0 = 2: оптимум 2 + 1/2."""
    block = SdpBlock(dim=2, constant=((0, 1, 1),), coeffs={0: ((0, 0, 1),), 1: ((1, 1, 1),)})
    problem = SdpProblem(
        num_vars=2,
        objective=(Fraction(1), Fraction(1)),
        blocks=(block,),
        equalities=(LinearEquality(coeffs={0: Fraction(1)}, rhs=Fraction(2)),),
    )
    solution = sdp_solve(problem, params)
    assert solution.status == SdpStatus.OPTIMAL
    with precision(params.precision):
        assert abs(solution.y[0] - 2) < mpmath.mpf(10) ** -18
        assert abs(solution.primal_obj - mpmath.mpf("2.5")) < mpmath.mpf(10) ** -15


# --- 3. ДОПУСТИМОСТЬ ---

def test_margin_variable_appends_lambda():
    aux = with_margin_variable(_disk_problem())
    assert aux.num_vars == 2
    assert aux.labels[-1] == "lambda"
    assert aux.blocks[-1].dim == 1
    assert aux.objective[-1] == -1


def test_feasibility_with_strict_interior(params):
    problem = _disk_problem().model_copy(update={"objective": (Fraction(0),)})
    result = sdp_feasibility(problem, params)
    assert result.status == FeasibilityStatus.FEASIBLE
    assert result.margin > 0


def test_feasibility_detects_infeasible_system(params):
    """[[y0]] ⪰ 0 при y0 = −1: λ* = −1."""
    problem = SdpProblem(
        num_vars=1,
        objective=(Fraction(0),),
        blocks=(SdpBlock(dim=1, coeffs={0: ((0, 0, 1),)}),),
        equalities=(LinearEquality(coeffs={0: Fraction(1)}, rhs=Fraction(-1)),),
    )
    result = sdp_feasibility(problem, params)
    assert result.status == FeasibilityStatus.INFEASIBLE
    assert result.margin < 0


def test_max_margin_is_capped_at_one(params):
    problem = _disk_problem().model_copy(update={"objective": (Fraction(0),)})
    solution, lam = solve_max_margin(problem, params)
    assert solution.status == SdpStatus.OPTIMAL
    with precision(params.precision):
        assert abs(lam - 1) < mpmath.mpf(10) ** -12


def test_max_margin_on_bounded_block(params):
    """max λ при [[1, y0], [y0, 1]] − λI ⪰ 0: λ* = 1 в y0 = 0."""
    block = SdpBlock(dim=2, constant=((0, 0, 1), (1, 1, 1)), coeffs={0: ((0, 1, 1),)})
    problem = SdpProblem(num_vars=1, objective=(Fraction(0),), blocks=(block,))
    solution, lam = solve_max_margin(problem, params)
    assert solution.status == SdpStatus.OPTIMAL
    with precision(params.precision):
        assert abs(lam - 1) < mpmath.mpf(10) ** -12
        assert abs(solution.y[0]) < mpmath.mpf(10) ** -10


# --- 4. МАСШТАБ И ЛУЧИ ---

def test_badly_scaled_variables_solve(params):
    """min 10⁻¹²y0 + 10¹²y1 при 10⁻¹²y0 ≥ 1, 10¹²y1 ≥ 1: оптимум 2."""
    small, large = Fraction(1, 10 ** 12), Fraction(10 ** 12)
    problem = SdpProblem(
        num_vars=2,
        objective=(small, large),
        blocks=(
            SdpBlock(dim=1, constant=((0, 0, -1),), coeffs={0: ((0, 0, small),)}),
            SdpBlock(dim=1, constant=((0, 0, -1),), coeffs={1: ((0, 0, large),)}),
        ),
    )
    solution = sdp_solve(problem, params)
    assert solution.status == SdpStatus.OPTIMAL
    with precision(params.precision):
        assert abs(solution.primal_obj - 2) < mpmath.mpf(10) ** -15


def test_unbounded_problem_reports_primal_ray(params):
    """min −y0 при y0 ≥ 0: направление d = (1,) уменьшает цель без ограничений."""
    problem = SdpProblem(
        num_vars=1,
        objective=(Fraction(-1),),
        blocks=(SdpBlock(dim=1, coeffs={0: ((0, 0, 1),)}),),
    )
    solution = sdp_solve(problem, params)
    assert solution.status == SdpStatus.DUAL_INFEASIBLE
    with precision(params.precision):
        assert abs(solution.ray[0] - 1) < mpmath.mpf(10) ** -15
        assert solution.ray_margin > 0


def test_pinned_moment_is_not_a_ray(params):
    """[[y0, y1], [y1, y2]] ⪰ 0, 1 − y2 ≥ 0, y1 + 0.9y2 ≥ 0, y0 = 1: оптимум −0.9, луча нет."""
    problem = SdpProblem(
        num_vars=3,
        objective=(Fraction(0), Fraction(1), Fraction(0)),
        blocks=(
            SdpBlock(dim=2, coeffs={0: ((0, 0, 1),), 1: ((0, 1, 1),), 2: ((1, 1, 1),)}),
            SdpBlock(dim=1, coeffs={0: ((0, 0, 1),), 2: ((0, 0, -1),)}),
            SdpBlock(dim=1, coeffs={1: ((0, 0, 1),), 2: ((0, 0, Fraction(9, 10)),)}),
        ),
        equalities=(LinearEquality(coeffs={0: Fraction(1)}, rhs=Fraction(1)),),
    )
    solution = sdp_solve(problem, params)
    assert solution.status == SdpStatus.OPTIMAL
    assert solution.ray is None
    with precision(params.precision):
        assert abs(solution.primal_obj + mpmath.mpf("0.9")) < mpmath.mpf(10) ** -12


def _failing_lu(failures: int, size: int = 1):
    """LU_decomp, падающий на нулевом ведущем элементе для первых failures матриц size×size (система Ньютона)."""
    real = mp.LU_decomp
    calls = {"n": 0}

    def fake(K, *args, **kwargs):
        if K.rows == size:
            calls["n"] += 1
        if K.rows == size and calls["n"] <= failures:
            raise ZeroDivisionError("pivot")
        return real(K, *args, **kwargs)
    return fake


def test_singular_newton_system_is_regularized(params):
    with patch.object(mp, "LU_decomp", side_effect=_failing_lu(1)), \
            patch("sos_staircase.core.sdp.log_warning") as warning:
        solution = sdp_solve(_disk_problem(), params)
    assert solution.status == SdpStatus.OPTIMAL
    assert warning.call_args.args[:2] == ("solver", "REGULARIZE")
    with precision(params.precision):
        assert abs(solution.y[0] - 1) < mpmath.mpf(10) ** -12


def test_regularization_failure_is_breakdown(params):
    with patch.object(mp, "LU_decomp", side_effect=_failing_lu(2)):
        with pytest.raises(NumericalBreakdown, match="numerically singular"):
            sdp_solve(_disk_problem(), params)
