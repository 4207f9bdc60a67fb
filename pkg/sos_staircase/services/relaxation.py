"""
Релаксации момент-SOS порядка d для одномерной задачи на [−1, 1] и ее подъема на окружность.
"""
from fractions import Fraction
from math import ceil
from typing import Sequence

import mpmath

from sos_staircase.core.poly import BiPoly, UniPoly, chebyshev_congruence, grlex_key, monomials_2d
from sos_staircase.core.scalar import Scalar, big, is_rational, precision, unify
from sos_staircase.core.sdp import sdp_solve
from sos_staircase.exceptions import DomainError, OrderTooSmall, SolverFailure
from sos_staircase.logger import log_action
from sos_staircase.models import (
    LinearEquality,
    MomentRelaxation,
    ParamPop,
    Pop,
    SdpBlock,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverParams,
    Variant,
)

Exp = tuple[int, ...]


# --- 1. ЗАДАЧИ ---

def _check_epsilon(eps: Scalar) -> None:
    if not 0 <= eps <= 1:
        raise DomainError(f"epsilon must lie in [0, 1], got {eps}")


def _one_minus(eps: Scalar) -> Scalar:
    return 1 - eps if is_rational(eps) else mpmath.mpf(1) - eps


def make_pop(p: ParamPop) -> Pop:
    """Univariate4: min x при 1−x² ≥ 0, x+(1−ε)x² ≥ 0. Bivariate3: min x1 на окружности при 1−ε+x1−(1−ε)x2² ≥ 0."""
    eps = p.epsilon
    _check_epsilon(eps)
    eta = _one_minus(eps)
    if p.variant == Variant.UNIVARIATE4:
        return Pop(
            num_vars=1,
            objective=UniPoly((0, 1)),
            inequalities=(UniPoly((1, 0, -1)), UniPoly((0, 1, eta))),
        )
    return Pop(
        num_vars=2,
        objective=BiPoly({(1, 0): Fraction(1)}),
        inequalities=(BiPoly({(0, 0): eta, (1, 0): Fraction(1), (0, 2): -eta}),),
        equalities=(BiPoly({(2, 0): Fraction(1), (0, 2): Fraction(1), (0, 0): Fraction(-1)}),),
    )


def true_value(eps: Scalar) -> Scalar:
    """v*(ε) = 0 при ε > 0 и −1 при ε = 0."""
    _check_epsilon(eps)
    value = 0 if eps > 0 else -1
    return Fraction(value) if is_rational(eps) else mpmath.mpf(value)


# --- 2. МОНОМЫ И БАЗИСЫ ---

def _terms(poly) -> dict[Exp, Scalar]:
    if isinstance(poly, UniPoly):
        return {(k,): c for k, c in enumerate(poly.coeffs) if c != 0}
    return dict(poly.terms)


def _degree(poly) -> int:
    return poly.degree if isinstance(poly, UniPoly) else poly.total_degree


def monomials(num_vars: int, degree: int) -> list[Exp]:
    if degree < 0:
        return []
    if num_vars == 1:
        return [(k,) for k in range(degree + 1)]
    return monomials_2d(degree)


def _add(a: Exp, b: Exp) -> Exp:
    return tuple(x + y for x, y in zip(a, b))


def _divides(lead: Exp, alpha: Exp) -> bool:
    return all(a >= b for a, b in zip(alpha, lead))


def _leading(poly) -> Exp:
    keys = list(_terms(poly))
    if len(keys[0]) == 1:
        return max(keys)
    return max(keys, key=lambda e: grlex_key(e))  # type: ignore[arg-type]


def reduced_basis(pop: Pop, degree: int) -> list[Exp]:
    """Мономы степени ≤ degree, не делящиеся на старшие мономы равенств (нормальные формы)."""
    leads = [_leading(h) for h in pop.equalities]
    return [a for a in monomials(pop.num_vars, degree) if not any(_divides(lead, a) for lead in leads)]


def _half(poly) -> int:
    return ceil(max(_degree(poly), 0) / 2)


def _label(prefix: str, alpha: Exp) -> str:
    return f"{prefix}[{','.join(str(a) for a in alpha)}]"


def _check_order(pop: Pop, d: int) -> None:
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    for g in (pop.objective, *pop.inequalities, *pop.equalities):
        if _degree(g) > 2 * d:
            raise OrderTooSmall(f"order {d} too small for a constraint of degree {_degree(g)}")


# --- 3. КОНГРУЭНЦИЯ ЧЕБЫШЕВА ---

def _congruence(coeffs: dict[int, dict], C: list[list[Fraction]], n: int) -> dict[int, tuple]:
    """C·F·Cᵀ для каждого F блока (F задан словарем {(i, j): v}, i ≤ j)."""
    out: dict[int, tuple] = {}
    for k, entries in coeffs.items():
        rational = all(is_rational(v) for v in entries.values())
        conv = (lambda x: x) if rational else big
        full = [[conv(Fraction(0))] * n for _ in range(n)]
        for (i, j), v in entries.items():
            full[i][j] = full[i][j] + conv(v)
            if i != j:
                full[j][i] = full[j][i] + conv(v)
        new = []
        for a in range(n):
            for b in range(a, n):
                acc = conv(Fraction(0))
                for i in range(n):
                    if C[a][i] == 0:
                        continue
                    for j in range(n):
                        if C[b][j] != 0 and full[i][j] != 0:
                            acc += conv(C[a][i]) * full[i][j] * conv(C[b][j])
                if acc != 0:
                    new.append((a, b, acc))
        out[k] = tuple(new)
    return out


# --- 4. МОМЕНТНАЯ РЕЛАКСАЦИЯ ---

def _localizing_block(g_terms, basis: list[Exp], index: dict[Exp, int]) -> tuple[int, dict[int, dict]]:
    coeffs: dict[int, dict] = {}
    for a, ba in enumerate(basis):
        for b in range(a, len(basis)):
            bb = basis[b]
            for gamma, gc in g_terms.items():
                var = index[_add(_add(ba, bb), gamma)]
                slot = coeffs.setdefault(var, {})
                if (a, b) in slot:
                    x, y = unify(slot[(a, b)], gc)
                    slot[(a, b)] = x + y
                else:
                    slot[(a, b)] = gc
    return len(basis), coeffs


def build_moment(pop: Pop, d: int, basis: str = "power") -> MomentRelaxation:
    """
    Моментная релаксация порядка d: M_d(y) ⪰ 0, локализаторы M_{d−⌈deg g/2⌉}(g y) ⪰ 0,
    равенства h дают линейные уравнения ℓ_y(x^β h) = 0, y_0 = 1.
    При наличии равенств строки и столбцы всех блоков индексируются сокращенным базисом
    reduced_basis (без мономов, делящихся на x1² для окружности); вектор y по-прежнему
    содержит все мономы степени ≤ 2d.
    """
    _check_order(pop, d)
    n = pop.num_vars
    moments = monomials(n, 2 * d)
    index = {alpha: i for i, alpha in enumerate(moments)}
    zero = tuple([0] * n)

    raw_blocks = [_localizing_block({zero: Fraction(1)}, reduced_basis(pop, d), index)]
    for g in pop.inequalities:
        raw_blocks.append(_localizing_block(_terms(g), reduced_basis(pop, d - _half(g)), index))

    blocks = []
    for dim, coeffs in raw_blocks:
        if dim == 0:
            continue
        if basis == "chebyshev":
            if n != 1:
                raise DomainError("chebyshev basis is available for univariate problems only")
            coeffs_t = _congruence(coeffs, chebyshev_congruence(dim - 1), dim)
        else:
            coeffs_t = {k: tuple((i, j, v) for (i, j), v in slot.items()) for k, slot in coeffs.items()}
        blocks.append(SdpBlock(dim=dim, coeffs=coeffs_t))

    equalities = [LinearEquality(coeffs={index[zero]: 1}, rhs=1)]
    for h in pop.equalities:
        h_terms = _terms(h)
        for beta in monomials(n, 2 * d - _degree(h)):
            row: dict[int, Scalar] = {}
            for gamma, hc in h_terms.items():
                row[index[_add(beta, gamma)]] = hc
            equalities.append(LinearEquality(coeffs=row, rhs=0))

    objective = [Fraction(0)] * len(moments)
    for alpha, fc in _terms(pop.objective).items():
        objective[index[alpha]] = fc
    objective = unify(*objective)

    sdp = SdpProblem(
        num_vars=len(moments),
        objective=tuple(objective),
        blocks=tuple(blocks),
        equalities=tuple(equalities),
        labels=tuple(_label("y", a) for a in moments),
    )
    return MomentRelaxation(order=d, pop=pop, sdp=sdp, moment_index=index)


# --- 5. SOS-ДВОЙСТВЕННАЯ ЗАДАЧА ---

def multiplier_names(pop: Pop) -> list[str]:
    if pop.num_vars == 1 and len(pop.inequalities) == 2:
        return ["q", "r", "s"]
    return [f"sigma{j}" for j in range(len(pop.inequalities) + 1)]


def build_sos(pop: Pop, d: int) -> SdpProblem:
    """
    max v  s.t.  f − v = σ0 + Σ σ_j g_j + Σ t·h, σ_j: Gram-матрицы (переменные: их верхние
    треугольники), t: свободные коэффициенты множителей равенств. Записано как min −v.
    """
    _check_order(pop, d)
    n = pop.num_vars
    zero = tuple([0] * n)
    targets = monomials(n, 2 * d)
    rows: dict[Exp, dict[int, Scalar]] = {alpha: {} for alpha in targets}
    labels: list[str] = []
    blocks: list[SdpBlock] = []

    def _contribute(alpha: Exp, var: int, value: Scalar) -> None:
        slot = rows[alpha]
        if var in slot:
            x, y = unify(slot[var], value)
            slot[var] = x + y
        else:
            slot[var] = value

    multipliers = [UniPoly.constant(Fraction(1)) if n == 1 else BiPoly.constant(Fraction(1)), *pop.inequalities]
    for name, g in zip(multiplier_names(pop), multipliers):
        basis = reduced_basis(pop, d - _half(g))
        if not basis:
            continue
        coeffs: dict[int, tuple] = {}
        for a in range(len(basis)):
            for b in range(a, len(basis)):
                var = len(labels)
                labels.append(f"{name}[{a},{b}]")
                coeffs[var] = ((a, b, 1),)
                weight = 1 if a == b else 2
                for gamma, gc in _terms(g).items():
                    _contribute(_add(_add(basis[a], basis[b]), gamma), var, gc * weight)
        blocks.append(SdpBlock(dim=len(basis), coeffs=coeffs))

    for e, h in enumerate(pop.equalities):
        for beta in monomials(n, 2 * d - _degree(h)):
            var = len(labels)
            labels.append(_label(f"t{e}", beta))
            for gamma, hc in _terms(h).items():
                _contribute(_add(beta, gamma), var, hc)

    v_index = len(labels)
    labels.append("v")
    _contribute(zero, v_index, Fraction(1))

    f_terms = _terms(pop.objective)
    equalities = [
        LinearEquality(coeffs=rows[alpha], rhs=f_terms.get(alpha, Fraction(0)))
        for alpha in targets
    ]
    objective = [Fraction(0)] * len(labels)
    objective[v_index] = Fraction(-1)
    return SdpProblem(
        num_vars=len(labels),
        objective=tuple(objective),
        blocks=tuple(blocks),
        equalities=tuple(equalities),
        labels=tuple(labels),
    )


# --- 6. РЕШЕНИЕ ---

def _require_optimal(solution: SdpSolution, what: str) -> None:
    if solution.status != SdpStatus.OPTIMAL:
        raise SolverFailure(
            f"{what}: solver returned {solution.status.value} ({solution.message}) "
            f"at {solution.precision} bits; raise the precision",
            status=solution.status.value,
        )


def solve_sos(pop: Pop, d: int, params: SolverParams) -> tuple[Scalar, SdpSolution]:
    with precision(params.precision):
        problem = build_sos(pop, d)
        solution = sdp_solve(problem, params)
        _require_optimal(solution, f"sos order {d}")
        return -solution.primal_obj, solution


def solve_moment(pop: Pop, d: int, params: SolverParams, basis: str = "power") -> tuple[Scalar, SdpSolution]:
    with precision(params.precision):
        relaxation = build_moment(pop, d, basis=basis)
        solution = sdp_solve(relaxation.sdp, params)
        _require_optimal(solution, f"moment order {d}")
        return solution.primal_obj, solution


def solve_order(p: ParamPop, d: int, params: SolverParams, basis: str = "power") -> Scalar:
    """v_d(ε): значение моментной релаксации порядка d."""
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    with precision(params.precision):
        value, solution = solve_moment(make_pop(p), d, params, basis=basis)
    log_action(
        "relaxation", "SOLVE_ORDER",
        f"variant={p.variant.value} eps={mpmath.nstr(big(p.epsilon), 8)} d={d} "
        f"value={mpmath.nstr(value, 12)} iters={solution.iterations}",
    )
    return value


def project2d(p: ParamPop, d: int, directions: Sequence[tuple[Scalar, Scalar]], params: SolverParams) -> list[Scalar]:
    """Опорные значения max u1·y10 + u2·y01 по моментной релаксации задачи на окружности порядка d."""
    if p.variant != Variant.BIVARIATE3:
        raise DomainError("project2d needs the Bivariate3 variant")
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    supports = []
    with precision(params.precision):
        relaxation = build_moment(make_pop(p), d)
        base = relaxation.sdp
        i10 = relaxation.moment_index[(1, 0)]
        i01 = relaxation.moment_index[(0, 1)]
        for u1, u2 in directions:
            u1, u2 = big(u1), big(u2)
            if u1 == 0 and u2 == 0:
                raise DomainError("direction must be nonzero")
            objective = [mpmath.mpf(0)] * base.num_vars
            objective[i10] = -u1
            objective[i01] = -u2
            problem = base.model_copy(update={"objective": tuple(objective)})
            solution = sdp_solve(problem, params)
            _require_optimal(solution, f"projection order {d}")
            supports.append(-solution.primal_obj)
    return supports


def support_directions(count: int) -> list[tuple]:
    """count равномерно расположенных единичных направлений, начиная с (1, 0)."""
    with precision(128):
        return [(mpmath.cos(2 * mpmath.pi * k / count), mpmath.sin(2 * mpmath.pi * k / count)) for k in range(count)]
