"""
Пороги точности ε_d: бисекция по ε с эскалацией точности, замкнутые формулы для ε₂ и ε₃,
границы (1+2d(4e)^{2d})⁻¹ ≤ ε_{d+1} ≤ 4^{−d}, свидетель Фаркаша для второго порядка.
"""
import time
from fractions import Fraction
from typing import Any, Iterable

import mpmath
import sympy
from mpmath import mp

from sos_staircase.config import settings
from sos_staircase.core.poly import UniPoly
from sos_staircase.core.scalar import (
    Scalar,
    big,
    four_e,
    parse_scalar,
    precision,
    to_decimal,
    working_bits,
)
from sos_staircase.core.sdp import psd_check, sdp_feasibility
from sos_staircase.exceptions import (
    BracketFailure,
    DomainError,
    NumericalBreakdown,
    OrderTooSmall,
    StaircaseError,
    VerificationFailed,
    WitnessInvalid,
)
from sos_staircase.logger import log_action, log_exception, log_warning
from sos_staircase.models import (
    Enclosure,
    Evidence,
    FarkasReport,
    FeasibilityResult,
    FeasibilityStatus,
    GramCertificate,
    LoStatus,
    ReducedDecomposition,
    SdpProblem,
    SolverParams,
    StaircasePoint,
)
from sos_staircase.services.certificates import exactness_system, rank_one_gram, verify_reduced, zero_gram

# 64ε⁶ − 384ε⁵ + 944ε⁴ − 1216ε³ + 812ε² − 216ε + 1, по возрастанию степеней
EPS3_SEXTIC = UniPoly((1, -216, 812, -1216, 944, -384, 64))

# Начальные приближения (a, b, c, d, ε) для s = (1+ax+bx²)², r̃ = (c+dx)²
EPS3_SEEDS = ("-6.9296", "6.6375", "-3.5866", "6.6219", "4.7125e-3")


# --- 1. ПРОВЕРКА ТОЧНОСТИ ПОРЯДКА d ---

def build_exactness_system(eps: Scalar, d: int, reduced: bool = True) -> SdpProblem:
    if not 0 <= eps <= 1:
        raise DomainError(f"epsilon must lie in [0, 1], got {eps}")
    return exactness_system(eps, d, reduced=reduced).problem()


def exactness_feasible(eps: Scalar, d: int, params: SolverParams) -> FeasibilityResult:
    """Принадлежит ли x модулю M(S_ε)_{2d}: Feasible / Infeasible / Undecided."""
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    with precision(params.precision):
        result = sdp_feasibility(build_exactness_system(eps, d), params)
        log_action(
            "staircase", "EXACTNESS_CHECK",
            f"eps={mpmath.nstr(big(eps), 12)} d={d} status={result.status.value} prec={params.precision}",
        )
    return result


# --- 2. БИСЕКЦИЯ ---

def _decide(eps, d: int, params: SolverParams, max_prec: int, used: set[int]) -> FeasibilityStatus:
    """Статус с удвоением точности, пока он Undecided (или решатель сломался) и есть запас до max_prec."""
    bits = params.precision
    while True:
        used.add(bits)
        try:
            status = exactness_feasible(eps, d, params.with_precision(bits)).status
        except NumericalBreakdown as exc:
            log_exception("staircase_bisection", exc, run_info=f"d={d} bits={bits}")
            status = FeasibilityStatus.UNDECIDED
        if status != FeasibilityStatus.UNDECIDED or bits * 2 > max_prec:
            return status
        bits *= 2
        log_warning("staircase", "ESCALATE_PRECISION", f"d={d} eps={mpmath.nstr(big(eps), 12)} bits={bits}")


def epsilon_threshold(
    d: int,
    target_width: Scalar,
    params: SolverParams,
    rel_width: Scalar | None = None,
    max_prec: int | None = None,
) -> Enclosure:
    """
    Бисекция на [нижняя, верхняя граница теоремы] (геометрическая, lo > 0):
    Infeasible сохраняется на lo, Feasible на hi. Неразрешимая точка после эскалации
    останавливает бисекцию, и возвращается текущая (более широкая) оценка.
    """
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    if target_width <= 0:
        raise DomainError("target width must be positive")
    if d == 1:
        # x ∈ M(S_ε)_2 только при ε = 1: q₀ = −(1−ε) должно быть ≥ 0
        return Enclosure(
            lo=Fraction(1), hi=Fraction(1),
            evidence=Evidence(lo_status=LoStatus.THEORETICAL_BOUND, precisions=(params.precision,)),
        )
    cap = max_prec or settings.MAX_PREC
    used: set[int] = set()
    probes = 0
    undecided_at = None
    with precision(params.precision):
        lower, upper = theoretical_bounds(d - 1)
        lo, hi = big(lower), big(upper)
        width = big(target_width)
        rel = big(rel_width) if rel_width is not None else None

        status = _decide(hi, d, params, cap, used)
        probes += 1
        if status != FeasibilityStatus.FEASIBLE:
            raise BracketFailure(f"order {d}: exactness at the upper bound {mpmath.nstr(hi, 8)} is {status.value}")
        status = _decide(lo, d, params, cap, used)
        probes += 1
        if status == FeasibilityStatus.FEASIBLE:
            raise BracketFailure(f"order {d}: exactness already holds at the lower bound {mpmath.nstr(lo, 8)}")
        lo_status = LoStatus.INFEASIBLE if status == FeasibilityStatus.INFEASIBLE else LoStatus.THEORETICAL_BOUND

        while hi - lo > width and not (rel is not None and (hi - lo) / hi <= rel):
            mid = mpmath.sqrt(lo * hi) if lo > 0 else (lo + hi) / 2
            status = _decide(mid, d, params, cap, used)
            probes += 1
            if status == FeasibilityStatus.FEASIBLE:
                hi = mid
            elif status == FeasibilityStatus.INFEASIBLE:
                lo, lo_status = mid, LoStatus.INFEASIBLE
            else:
                undecided_at = mid
                break

    enclosure = Enclosure(
        lo=lo, hi=hi,
        evidence=Evidence(
            lo_status=lo_status,
            hi_status=FeasibilityStatus.FEASIBLE,
            precisions=tuple(sorted(used)),
            probes=probes,
            undecided_at=undecided_at,
        ),
    )
    log_action(
        "staircase", "THRESHOLD",
        f"d={d} lo={mpmath.nstr(lo, 10)} hi={mpmath.nstr(hi, 10)} probes={probes} "
        f"precisions={sorted(used)} undecided={undecided_at is not None}",
    )
    return enclosure


# --- 3. ЗАМКНУТЫЕ ФОРМУЛЫ ---

def closed_form_eps2() -> Any:
    """ε₂ = 1 − √3/2 на рабочей точности."""
    return 1 - mpmath.sqrt(3) / 2


def eps2_discriminant(eps: Scalar) -> Scalar:
    """−4ε² + 8ε − 1: обращается в ноль ровно на ε₂."""
    return -4 * eps ** 2 + 8 * eps - 1


def eps3_sextic(eps: Scalar) -> Scalar:
    return EPS3_SEXTIC(eps)


def closed_form_eps3_upper() -> Any:
    """1 − √(3 + 12√10·sin(arctan(3√111)/3 + π/6))/6; проверяется как корень секстики."""
    angle = mpmath.atan(3 * mpmath.sqrt(111)) / 3 + mpmath.pi / 6
    value = 1 - mpmath.sqrt(3 + 12 * mpmath.sqrt(10) * mpmath.sin(angle)) / 6
    residual = abs(eps3_sextic(value))
    if residual > mpmath.mpf(10) ** (-(mp.prec // 4)):
        raise VerificationFailed(f"closed form misses the sextic root by {mpmath.nstr(residual, 5)}",
                                 residual=residual)
    return value


def eps2_certificate(exact: bool = False, bits: int | None = None) -> ReducedDecomposition:
    """q̃ = 0, r̃ = 3√3/2, s = (1−√3x)² при ε = 1 − √3/2; exact: элементы в ℚ(√3) (sympy)."""
    if exact:
        root3 = sympy.sqrt(3)
        return ReducedDecomposition(
            q_tilde=zero_gram(1),
            r_tilde=GramCertificate(basis_degree=0, gram=((3 * root3 / 2,),)),
            s=GramCertificate(basis_degree=1, gram=((sympy.Integer(1), -root3), (-root3, sympy.Integer(3)))),
            epsilon=1 - root3 / 2,
        )
    with precision(working_bits(bits)):
        root3 = mpmath.sqrt(3)
        return ReducedDecomposition(
            q_tilde=zero_gram(1),
            r_tilde=GramCertificate(basis_degree=0, gram=((3 * root3 / 2,),)),
            s=rank_one_gram([mpmath.mpf(1), -root3]),
            epsilon=1 - root3 / 2,
        )


def _eps3_equations(a, b, c, d, eps):
    eta = 1 - eps
    return [
        c ** 2 + 2 * a + eta,
        2 * c * d + a ** 2 + 2 * b + 2 * a * eta,
        d ** 2 - c ** 2 + 2 * a * b + eta * (a ** 2 + 2 * b),
        -2 * c * d + b ** 2 + 2 * a * b * eta,
        -(d ** 2) + eta * b ** 2,
    ]


def eps3_certificate(params: SolverParams) -> ReducedDecomposition:
    """
    Сертификат ранга один порядка 3 на верхней оценке ε₃: s = (1+ax+bx²)², r̃ = (c+dx)², q̃ = 0.
    Пять уравнений на коэффициенты решаются методом Ньютона из EPS3_SEEDS.
    """
    with precision(params.precision):
        seeds = [mpmath.mpf(v) for v in EPS3_SEEDS]
        try:
            root = mpmath.findroot(_eps3_equations, seeds, tol=mpmath.ldexp(1, -(mp.prec - 32)), maxsteps=100)
        except ValueError as exc:
            raise VerificationFailed(f"Newton refinement of the order-3 certificate failed: {exc}") from exc
        a, b, c, d, eps = (root[i] for i in range(5))
        upper = closed_form_eps3_upper()
        gap = abs(eps - upper)
        if gap > mpmath.mpf(10) ** (-(mp.prec // 4)):
            raise VerificationFailed(f"refined epsilon differs from the closed form by {mpmath.nstr(gap, 5)}")
        cert = ReducedDecomposition(
            q_tilde=zero_gram(2),
            r_tilde=rank_one_gram([c, d]),
            s=rank_one_gram([mpmath.mpf(1), a, b]),
            epsilon=eps,
        )
        check = verify_reduced(cert, bits=params.precision)
        if check.residual > mpmath.mpf(settings.RESIDUAL_TOL):
            raise VerificationFailed("order-3 certificate does not verify", residual=check.residual,
                                     min_gram_eig=check.min_gram_eig)
    log_action("staircase", "EPS3_CERTIFICATE", f"eps={mpmath.nstr(eps, 15)} a={mpmath.nstr(a, 10)} b={mpmath.nstr(b, 10)}")
    return cert


# --- 4. ГРАНИЦЫ ТЕОРЕМЫ ---

def theoretical_bounds(d: int) -> tuple[Any, Any]:
    """Границы для порога с индексом d+1: (1/(1+2d(4e)^{2d}), 4^{−d})."""
    if d < 0:
        raise DomainError(f"bound index must be >= 0, got {d}")
    lower = 1 / (1 + 2 * d * four_e() ** (2 * d))
    return lower, Fraction(1, 4 ** d)


def bound_curves(d_range: Iterable[int]) -> list[tuple[int, Any, Any]]:
    """(d, ln(1/верхняя), ln(1/нижняя)) для порогов ε_d: пунктирные кривые лестницы."""
    rows = []
    for d in d_range:
        lower, upper = theoretical_bounds(d - 1)
        rows.append((d, -mpmath.log(big(upper)), -mpmath.log(lower)))
    return rows


# --- 5. СВИДЕТЕЛЬ ФАРКАША (порядок 2, ε < ε₂) ---

def farkas_determinant(eta: Scalar) -> Any:
    """η²(4η²−3)/(4(η+1)): определитель второго блока при ξ = 0."""
    eta = big(eta)
    return eta ** 2 * (4 * eta ** 2 - 3) / (4 * (eta + 1))


def farkas_witness(eta: Scalar, bits: int | None = None) -> FarkasReport:
    """
    u = (v₂+v₃−1, v₂, −v₃) для v̄₂ = η(1+2η)/(2(η+1)), v̄₃ = 1 − v̄₂ со сдвигом ξ.
    Блоки [[u₂,u₃],[u₃,u₂]] и [[u₁+ηu₂, u₂+ηu₃],[u₂+ηu₃, ηu₂+u₃]] положительно определены, u₁ < 0.
    """
    with precision(working_bits(bits)):
        eta = big(eta)
        if not mpmath.sqrt(3) / 2 < eta < 1:
            raise DomainError(f"eta must lie in (√3/2, 1), got {mpmath.nstr(eta, 10)}")
        v2_bar = eta * (1 + 2 * eta) / (2 * (eta + 1))
        v3_bar = 1 - v2_bar
        determinant = farkas_determinant(eta)
        xi = min(mpmath.mpf("1e-3"), eta ** 2 * (4 * eta ** 2 - 3) / (32 * (eta + 1)))
        v2, v3 = v2_bar - xi, v3_bar - xi
        u1, u2, u3 = v2 + v3 - 1, v2, -v3
        first = psd_check(mp.matrix([[u2, u3], [u3, u2]]))
        second = psd_check(mp.matrix([[u1 + eta * u2, u2 + eta * u3], [u2 + eta * u3, eta * u2 + u3]]))
        passed = u1 < 0 and first > 0 and second > 0
        report = FarkasReport(
            eta=eta, u=(u1, u2, u3), xi=xi, determinant_term=determinant,
            first_block_min_eig=first, second_block_min_eig=second,
            u1_negative=u1 < 0, passed=passed,
        )
    if not passed:
        raise WitnessInvalid(
            f"witness at eta={mpmath.nstr(eta, 10)} fails: u1={mpmath.nstr(u1, 5)}, "
            f"min eigs {mpmath.nstr(first, 5)}, {mpmath.nstr(second, 5)}"
        )
    return report


# --- 6. ЛЕСТНИЦА ---

def staircase_point(d: int, target_width: Scalar, params: SolverParams, rel_width: Scalar | None = None) -> StaircasePoint:
    """Оценка ε_d с границами теоремы; ошибка записывается в точку, а не пробрасывается."""
    started = time.perf_counter()
    with precision(params.precision):
        lower, upper = theoretical_bounds(d - 1)
        try:
            enclosure = epsilon_threshold(d, target_width, params, rel_width=rel_width)
            error = None
        except StaircaseError as exc:
            log_exception("staircase_point", exc, run_info=f"d={d}")
            enclosure, error = None, exc.detail
    elapsed = int((time.perf_counter() - started) * 1000)
    return StaircasePoint(
        d=d,
        enclosure=enclosure,
        lower_bound=lower,
        upper_bound=upper,
        precision_bits=max(enclosure.evidence.precisions) if enclosure else params.precision,
        wall_time_ms=elapsed,
        error=error,
    )


def fit_slope(points: Iterable[StaircasePoint]) -> Any:
    """Наклон МНК для d ↦ ln(1/ε_d) по верхним концам оценок (нужно ≥ 2 точек с d ≥ 2)."""
    data = [(mpmath.mpf(p.d), -mpmath.log(big(p.enclosure.hi)))
            for p in points if p.enclosure is not None and p.d >= 2]
    if len(data) < 2:
        return None
    n = len(data)
    mean_x = mpmath.fsum(x for x, _ in data) / n
    mean_y = mpmath.fsum(y for _, y in data) / n
    num = mpmath.fsum((x - mean_x) * (y - mean_y) for x, y in data)
    den = mpmath.fsum((x - mean_x) ** 2 for x, _ in data)
    return num / den


def sweep(
    d_range: Iterable[int],
    params: SolverParams,
    target_width: Scalar = Fraction(1, 10 ** 6),
    rel_width: Scalar | None = Fraction(1, 10 ** 3),
    jobs: int = 1,
) -> tuple[list[StaircasePoint], Any]:
    """Точки лестницы по d (ошибки отдельных d не фатальны) и наклон ln(1/ε_d)."""
    orders = list(d_range)
    if jobs > 1 or settings.TASK_BACKEND == "celery":
        from sos_staircase.services.dispatch import run_cells

        payloads = [threshold_payload(d, target_width, params, rel_width) for d in orders]
        points = [point_from_json(doc, bits=params.precision) for doc in run_cells("threshold", payloads, jobs)]
    else:
        points = [staircase_point(d, target_width, params, rel_width) for d in orders]
    with precision(params.precision):
        slope = fit_slope(points)
    log_action("staircase", "SWEEP", f"orders={orders} slope={mpmath.nstr(slope, 6) if slope is not None else 'n/a'}")
    return points, slope


# --- 7. СЕРИАЛИЗАЦИЯ ТОЧЕК ---

def threshold_payload(d: int, target_width: Scalar, params: SolverParams, rel_width: Scalar | None) -> dict:
    with precision(params.precision):
        return {
            "d": d,
            "target_width": to_decimal(target_width),
            "rel_width": to_decimal(rel_width) if rel_width is not None else None,
            "params": params.model_dump(),
        }


def point_to_json(p: StaircasePoint) -> dict:
    with precision(max(p.precision_bits, working_bits())):
        enc = p.enclosure
        doc: dict[str, Any] = {
            "d": p.d,
            "lo": to_decimal(enc.lo) if enc else None,
            "hi": to_decimal(enc.hi) if enc else None,
            "lo_status": enc.evidence.lo_status.value if enc else None,
            "hi_status": enc.evidence.hi_status.value if enc else None,
            "precisions": list(enc.evidence.precisions) if enc else [],
            "probes": enc.evidence.probes if enc else 0,
            "undecided_at": to_decimal(enc.evidence.undecided_at) if enc and enc.evidence.undecided_at is not None else None,
            "lower_bound": to_decimal(p.lower_bound),
            "upper_bound": to_decimal(p.upper_bound),
            "precision_bits": p.precision_bits,
            "wall_time_ms": p.wall_time_ms,
            "error": p.error,
        }
    return doc


def point_from_json(doc: dict, bits: int | None = None) -> StaircasePoint:
    with precision(max(doc.get("precision_bits") or 0, working_bits(bits))):
        enclosure = None
        if doc.get("hi") is not None:
            enclosure = Enclosure(
                lo=parse_scalar(doc["lo"]),
                hi=parse_scalar(doc["hi"]),
                evidence=Evidence(
                    lo_status=LoStatus(doc["lo_status"]),
                    hi_status=FeasibilityStatus(doc["hi_status"]),
                    precisions=tuple(doc.get("precisions", ())),
                    probes=doc.get("probes", 0),
                    undecided_at=parse_scalar(doc["undecided_at"]) if doc.get("undecided_at") else None,
                ),
            )
        return StaircasePoint(
            d=doc["d"],
            enclosure=enclosure,
            lower_bound=parse_scalar(doc["lower_bound"]),
            upper_bound=parse_scalar(doc["upper_bound"]),
            precision_bits=doc.get("precision_bits", 0),
            wall_time_ms=doc.get("wall_time_ms", 0),
            error=doc.get("error"),
        )
