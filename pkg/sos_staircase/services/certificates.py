"""
SOS-сертификаты тождества  x − v = q + r·(1−x²) + s·(x + (1−ε)x²).

Здесь: Gram-помощники, явное семейство s = (ax−1)^{2d}, проверка неравенства на [−1, 1],
достройка и извлечение сертификатов, перенос на окружность, преобразование Гурса,
марковская оценка коэффициентов, округление до рациональных и JSON "cert-v1".
"""
from fractions import Fraction
from typing import Any

import mpmath
import sympy
from mpmath import mp

from sos_staircase.config import settings
from sos_staircase.core.gram import GramSystem
from sos_staircase.core.poly import BiPoly, UniPoly, uni_in
from sos_staircase.core.scalar import (
    Scalar,
    big,
    four_e,
    is_rational,
    parse_scalar,
    precision,
    to_decimal,
    to_fraction,
    unify,
    working_bits,
    zero_like,
)
from sos_staircase.core.sdp import psd_check, solve_max_margin
from sos_staircase.exceptions import (
    CertificateInfeasible,
    DegreeOverflow,
    DomainError,
    OrderTooSmall,
    RoundingFailed,
    SolverFailure,
    VerificationFailed,
)
from sos_staircase.logger import log_action
from sos_staircase.models import (
    CertificateCheck,
    GramCertificate,
    IneqResult,
    IneqStatus,
    LiftReport,
    ReducedDecomposition,
    SdpSolution,
    SdpStatus,
    SolverParams,
    SosDecomposition,
)
from sos_staircase.services.relaxation import true_value

CERT_SCHEMA = "cert-v1"

X = UniPoly.x()
ONE = UniPoly.constant(Fraction(1))
BOX = UniPoly((1, 0, -1))             # 1 − x²
X_BOX = UniPoly((0, 1, 0, -1))        # x(1 − x²)


def eta_of(eps: Scalar) -> Scalar:
    return 1 - eps if is_rational(eps) else mpmath.mpf(1) - eps


def constraint(eps: Scalar) -> UniPoly:
    """x + (1−ε)x²."""
    return UniPoly((0, 1, eta_of(eps)))


# --- 1. GRAM-МАТРИЦЫ ---

def gram_polynomial(G: GramCertificate) -> UniPoly:
    n = G.size
    flat = unify(*[G.gram[a][b] for a in range(n) for b in range(n)])
    coeffs = [zero_like(flat[0])] * (2 * n - 1)
    for a in range(n):
        for b in range(n):
            coeffs[a + b] = coeffs[a + b] + flat[a * n + b]
    return UniPoly(tuple(coeffs))


def gram_matrix(G: GramCertificate) -> mpmath.matrix:
    return mp.matrix([[big(v) for v in row] for row in G.gram])


def gram_min_eig(G: GramCertificate):
    return psd_check(gram_matrix(G))


def zero_gram(basis_degree: int) -> GramCertificate:
    n = basis_degree + 1
    return GramCertificate(basis_degree=basis_degree, gram=tuple((Fraction(0),) * n for _ in range(n)))


def rank_one_gram(vector) -> GramCertificate:
    """vvᵀ: Gram полинома (Σ v_k x^k)²."""
    v = unify(*vector)
    return GramCertificate(
        basis_degree=len(v) - 1,
        gram=tuple(tuple(a * b for b in v) for a in v),
    )


def gram_shift(G: GramCertificate, k: int) -> GramCertificate:
    """Gram полинома x^{2k}·p: исходная матрица в правом нижнем углу."""
    if k == 0:
        return G
    n = G.size + k
    zero = zero_like(G.gram[0][0])
    rows = []
    for i in range(n):
        rows.append(tuple(
            G.gram[i - k][j - k] if i >= k and j >= k else zero
            for j in range(n)
        ))
    return GramCertificate(basis_degree=n - 1, gram=tuple(rows))


def gram_add(A: GramCertificate, B: GramCertificate, scale: Scalar = 1) -> GramCertificate:
    if A.size != B.size:
        raise ValueError("Gram sizes differ")
    rows = []
    for i in range(A.size):
        row = []
        for j in range(A.size):
            a, b, c = unify(A.gram[i][j], B.gram[i][j], scale)
            row.append(a + c * b)
        rows.append(tuple(row))
    return GramCertificate(basis_degree=A.basis_degree, gram=tuple(rows))


# --- 2. ЯВНОЕ СЕМЕЙСТВО s = (ax−1)^{2d} ---

def paulynomial(eps: Scalar, a: Scalar = 1) -> tuple[int, UniPoly]:
    """
    Наименьшее d ≥ 0 с ε(1+a)^{2d} ≥ 1 и (a−1)^{2d}(2−ε) ≤ 1 (второе условие пусто при a = 1);
    тогда s = (ax−1)^{2d} удовлетворяет неравенству и релаксация порядка d+1 точна.
    """
    if not 0 < eps <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {eps}")
    if not 1 <= a < 2:
        raise DomainError(f"a must lie in [1, 2), got {a}")
    eps_, a_ = unify(eps, a)
    d = 0
    while True:
        reaches = eps_ * (1 + a_) ** (2 * d) >= 1
        flat = a_ == 1 or (a_ - 1) ** (2 * d) * (2 - eps_) <= 1
        if reaches and flat:
            break
        d += 1
    s = UniPoly((-1, a_)) ** (2 * d)
    return d, s


# --- 3. НЕРАВЕНСТВО x − s(x)(x+(1−ε)x²) ≥ 0 НА [−1, 1] ---

def ineq_polynomial(s: UniPoly, eps: Scalar) -> UniPoly:
    return X - s * constraint(eps)


def _sympy_poly(p: UniPoly) -> sympy.Poly:
    x = sympy.Symbol("x")
    coeffs = [sympy.Rational(f.numerator, f.denominator) for f in (to_fraction(c) for c in reversed(p.coeffs))]
    return sympy.Poly(coeffs, x, domain="QQ")


def _as_fraction(r) -> Fraction:
    return Fraction(int(r.p), int(r.q))


def _test_points(p: UniPoly, samples: int) -> list[Fraction]:
    with precision(max(mp.prec, 64)):
        nodes = [to_fraction(mpmath.cos((2 * k + 1) * mpmath.pi / (2 * samples))) for k in range(samples)]
    points = {Fraction(-1), Fraction(1), *nodes}
    roots = _sympy_poly(p).intervals(inf=-1, sup=1)
    edges = [Fraction(-1)]
    for (lo, hi), _ in roots:
        lo, hi = _as_fraction(lo), _as_fraction(hi)
        points.update((lo, hi))
        edges += [lo, hi]
    edges.append(Fraction(1))
    # по точке в каждом промежутке между корнями: там знак p постоянен
    points.update((edges[i] + edges[i + 1]) / 2 for i in range(len(edges) - 1))
    return sorted(pt for pt in points if -1 <= pt <= 1)


def verify_ineq(s: UniPoly, eps: Scalar, samples: int, feas_tol: float | None = None) -> IneqResult:
    """
    p(x) = x − s(x)(x+(1−ε)x²) на узлах Чебышева, концах отрезка и между изолированными
    корнями p; Fails возвращает точку минимума (первую по возрастанию) с p < −feas_tol.
    """
    minimum = 2 * (max(s.degree, 0) + 2)
    if samples < minimum:
        raise DomainError(f"need at least {minimum} samples for deg s = {s.degree}")
    p = ineq_polynomial(s, eps)
    if p.is_zero:
        return IneqResult(status=IneqStatus.HOLDS, margin=Fraction(0))
    exact = UniPoly(tuple(to_fraction(c) for c in p.coeffs))
    best_point, best_value = None, None
    for point in _test_points(exact, samples):
        value = exact(point)
        if best_value is None or value < best_value:
            best_point, best_value = point, value
    tol = to_fraction(mpmath.mpf(feas_tol if feas_tol is not None else settings.FEAS_TOL))
    if best_value < -tol:
        return IneqResult(status=IneqStatus.FAILS, margin=best_value, witness=best_point, value=best_value)
    return IneqResult(status=IneqStatus.HOLDS, margin=best_value)


def hyperbola_envelope(s: UniPoly, eps: Scalar, samples: int = 64, feas_tol: float | None = None) -> bool:
    """s ≤ 1/(1+(1−ε)x) на (0, 1], s ≥ 1/(1+(1−ε)x) на [−1, 0), s(0) = 1."""
    if not 0 < eps <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {eps}")
    tol = big(feas_tol if feas_tol is not None else settings.FEAS_TOL)
    eta = big(eta_of(eps))
    if abs(big(s(Fraction(0))) - 1) > tol:
        return False
    for k in range(1, samples + 1):
        x = mpmath.mpf(k) / samples
        for point, above in ((x, False), (-x, True)):
            h = 1 / (1 + eta * point)
            value = big(s(point))
            if above and value < h - tol:
                return False
            if not above and value > h + tol:
                return False
    return True


# --- 4. ПРОВЕРКА СЕРТИФИКАТОВ ---

def identity_defect(c: SosDecomposition) -> UniPoly:
    v = UniPoly.constant(c.v)
    return X - v - gram_polynomial(c.q) - gram_polynomial(c.r) * BOX - gram_polynomial(c.s) * constraint(c.epsilon)


def is_exact_certificate(c: SosDecomposition) -> bool:
    """Все элементы (v, ε и Gram-матрицы) рациональны."""
    entries = [c.v, c.epsilon] + [v for G in (c.q, c.r, c.s) for row in G.gram for v in row]
    return all(is_rational(v) for v in entries)


def verify_certificate(c: SosDecomposition, bits: int | None = None) -> CertificateCheck:
    """
    Максимальный модуль коэффициента дефекта тождества и min λ_min трех Gram-матриц.
    Нулевой дефект имеет тип скаляров сертификата: Fraction только у точных.
    """
    with precision(working_bits(bits)):
        defect = identity_defect(c)
        if not defect.is_zero:
            residual = defect.max_abs()
        else:
            residual = Fraction(0) if is_exact_certificate(c) else mpmath.mpf(0)
        min_eig = min(gram_min_eig(G) for G in (c.q, c.r, c.s))
    return CertificateCheck(residual=residual, min_gram_eig=min_eig)


def reduced_defect(c: ReducedDecomposition) -> UniPoly:
    x2 = UniPoly.monomial(2, Fraction(1))
    defect = X - x2 * gram_polynomial(c.q_tilde) - gram_polynomial(c.s) * constraint(c.epsilon)
    if c.r_tilde is not None:
        defect = defect - x2 * BOX * gram_polynomial(c.r_tilde)
    return defect


def verify_reduced(c: ReducedDecomposition, bits: int | None = None) -> CertificateCheck:
    with precision(working_bits(bits)):
        defect = reduced_defect(c)
        residual = big(defect.max_abs()) if not defect.is_zero else mpmath.mpf(0)
        residual = max(residual, abs(big(gram_polynomial(c.s).coeff(0)) - 1))
        grams = [c.q_tilde, c.s] + ([c.r_tilde] if c.r_tilde is not None else [])
        min_eig = min(gram_min_eig(G) for G in grams)
    return CertificateCheck(residual=residual, min_gram_eig=min_eig)


def _exact(value):
    if isinstance(value, Fraction) or isinstance(value, int):
        f = Fraction(value)
        return sympy.Rational(f.numerator, f.denominator)
    if isinstance(value, sympy.Basic):
        return value
    raise TypeError(f"exact check needs rational or algebraic entries, got {type(value).__name__}")


def verify_reduced_exact(c: ReducedDecomposition) -> CertificateCheck:
    """Точная проверка в ℚ(√3) (sympy): дефект тождества и минимальное собственное число."""
    x = sympy.Symbol("x")

    def poly(G: GramCertificate):
        z = sympy.Matrix([x ** k for k in range(G.size)])
        M = sympy.Matrix([[_exact(v) for v in row] for row in G.gram])
        return sympy.expand((z.T * M * z)[0, 0]), M

    eta = 1 - _exact(c.epsilon)
    q, Mq = poly(c.q_tilde)
    s, Ms = poly(c.s)
    matrices = [Mq, Ms]
    defect = x - x ** 2 * q - s * (x + eta * x ** 2)
    if c.r_tilde is not None:
        r, Mr = poly(c.r_tilde)
        matrices.append(Mr)
        defect -= x ** 2 * (1 - x ** 2) * r
    defect = sympy.expand(defect)
    coeffs = sympy.Poly(defect, x).all_coeffs() if defect != 0 else [sympy.Integer(0)]
    residual = max((sympy.nsimplify(sympy.Abs(k)) for k in coeffs), key=lambda e: sympy.N(e, 50))
    residual = max(residual, sympy.Abs(sympy.expand(s.subs(x, 0) - 1)), key=lambda e: sympy.N(e, 50))
    eigs = [sympy.simplify(e) for M in matrices for e in M.eigenvals()]
    min_eig = min(eigs, key=lambda e: sympy.N(e, 50))
    return CertificateCheck(residual=sympy.simplify(residual), min_gram_eig=min_eig)


def embed_reduced(c: ReducedDecomposition) -> SosDecomposition:
    """q = x²q̃, r = x²r̃ (или 0 при d = 1), v = 0."""
    d = c.order
    r = gram_shift(c.r_tilde, 1) if c.r_tilde is not None else zero_gram(d - 1)
    return SosDecomposition(v=Fraction(0), q=gram_shift(c.q_tilde, 1), r=r, s=c.s, epsilon=c.epsilon)


def elementary_certificate(eps: Scalar, d: int = 1) -> SosDecomposition:
    """q = 0, r = 1−ε, s = 1, v = ε−1: тождество x − (ε−1) = (1−ε)(1−x²) + (x+(1−ε)x²)."""
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    eta = eta_of(eps)
    r = [[zero_like(eta)] * d for _ in range(d)]
    s = [[zero_like(eta)] * d for _ in range(d)]
    r[0][0] = eta
    s[0][0] = zero_like(eta) + 1
    return SosDecomposition(
        v=-eta,
        q=zero_gram(d),
        r=GramCertificate(basis_degree=d - 1, gram=tuple(map(tuple, r))),
        s=GramCertificate(basis_degree=d - 1, gram=tuple(map(tuple, s))),
        epsilon=eps,
    )


def _accept(c: SosDecomposition, what: str) -> CertificateCheck:
    check = verify_certificate(c)
    if big(check.residual) > mpmath.mpf(settings.RESIDUAL_TOL) or check.min_gram_eig < -mpmath.mpf(settings.GRAM_EIG_TOL):
        raise VerificationFailed(
            f"{what}: residual {mpmath.nstr(big(check.residual), 5)}, "
            f"min Gram eigenvalue {mpmath.nstr(check.min_gram_eig, 5)}",
            residual=check.residual,
            min_gram_eig=check.min_gram_eig,
        )
    return check


# --- 5. ДОСТРОЙКА, ИЗВЛЕЧЕНИЕ И МАКСИМАЛЬНЫЙ ЗАПАС ---

def exactness_system(eps: Scalar, d: int, reduced: bool = True) -> GramSystem:
    """
    Сопоставление коэффициентов для принадлежности x модулю M(S_ε)_{2d}.
    reduced: 1 = q̃·x + r̃·x(1−x²) + s·(1+(1−ε)x); иначе x = q + r(1−x²) + s(x+(1−ε)x²).
    """
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    eta = eta_of(eps)
    if reduced:
        system = GramSystem(2 * d)
        system.add_gram("qt", d, X)
        if d >= 2:
            system.add_gram("rt", d - 1, X_BOX)
        system.add_gram("s", d, UniPoly((1, eta)))
        system.set_target(ONE)
    else:
        system = GramSystem(2 * d + 1)
        system.add_gram("q", d + 1, ONE)
        system.add_gram("r", d, BOX)
        system.add_gram("s", d, constraint(eps))
        system.set_target(X)
    return system


def _margin_params(params: SolverParams) -> SolverParams:
    return params.model_copy(update={"gap_tol": min(params.gap_tol, params.feas_tol) * 1e-5})


def _max_margin(system: GramSystem, params: SolverParams, what: str) -> tuple[SdpSolution, Any]:
    solution, lam = solve_max_margin(system.problem(), _margin_params(params))
    if solution.status == SdpStatus.PRIMAL_INFEASIBLE:
        raise CertificateInfeasible(f"{what}: coefficient system is infeasible")
    if solution.status != SdpStatus.OPTIMAL:
        raise SolverFailure(
            f"{what}: solver returned {solution.status.value} ({solution.message}); raise the precision",
            status=solution.status.value,
        )
    if lam < -mpmath.mpf(settings.GRAM_EIG_TOL):
        raise CertificateInfeasible(f"{what}: best Gram margin {mpmath.nstr(lam, 5)} is negative")
    return solution, lam


def complete_certificate(
    s: UniPoly,
    eps: Scalar,
    d: int,
    params: SolverParams,
    v: Scalar | None = None,
) -> SosDecomposition:
    """
    Находит q, r для заданного s: x − v − s·(x+(1−ε)x²) = q + r·(1−x²).
    При v = 0 и s(0) = 1 решается приведенная система (q = x²q̃, r = x²r̃).
    """
    if d < 1:
        raise OrderTooSmall(f"relaxation order must be >= 1, got {d}")
    if s.degree > 2 * (d - 1):
        raise DegreeOverflow(f"deg s = {s.degree} exceeds 2(d−1) = {2 * (d - 1)}")
    what = f"completion at d={d}"
    with precision(params.precision):
        target = true_value(eps) if v is None else v
        eta = eta_of(eps)
        reduced = target == 0 and abs(big(s.coeff(0)) - 1) <= mpmath.mpf(settings.RESIDUAL_TOL)
        if reduced:
            system = GramSystem(2 * d)
            system.add_gram("qt", d, X)
            if d >= 2:
                system.add_gram("rt", d - 1, X_BOX)
            system.add_gram("s", d)
            system.represent("s", s)
            rhs = ONE - s * UniPoly((1, eta))
            system.set_target(UniPoly((0,) + rhs.coeffs[1:]) if rhs.coeffs else rhs)
        else:
            system = GramSystem(2 * d + 1)
            system.add_gram("q", d + 1, ONE)
            system.add_gram("r", d, BOX)
            system.add_gram("s", d)
            system.represent("s", s)
            system.set_target(X - UniPoly.constant(target) - s * constraint(eps))
        solution, lam = _max_margin(system, params, what)
        y = solution.y
        if reduced:
            r_tilde = system.gram("rt", y) if d >= 2 else None
            cert = embed_reduced(ReducedDecomposition(
                q_tilde=system.gram("qt", y), r_tilde=r_tilde, s=system.gram("s", y), epsilon=eps,
            ))
        else:
            cert = SosDecomposition(
                v=target, q=system.gram("q", y), r=system.gram("r", y), s=system.gram("s", y), epsilon=eps,
            )
        check = _accept(cert, what)
    log_action(
        "certificates", "COMPLETE",
        f"d={d} reduced={reduced} margin={mpmath.nstr(lam, 5)} residual={mpmath.nstr(big(check.residual), 5)}",
    )
    return cert


def exactness_certificate(eps: Scalar, d: int, params: SolverParams) -> SosDecomposition:
    """Сертификат точности порядка d с максимальным общим запасом Gram-матриц (v = 0)."""
    what = f"exactness at d={d}"
    with precision(params.precision):
        if eps == 0:
            raise CertificateInfeasible(f"{what}: v*(0) = −1, the relaxation bound is not 0")
        system = exactness_system(eps, d, reduced=True)
        solution, lam = _max_margin(system, params, what)
        y = solution.y
        reduced = ReducedDecomposition(
            q_tilde=system.gram("qt", y),
            r_tilde=system.gram("rt", y) if d >= 2 else None,
            s=system.gram("s", y),
            epsilon=eps,
        )
        cert = embed_reduced(reduced)
        _accept(cert, what)
    log_action("certificates", "EXACTNESS_CERTIFICATE", f"d={d} margin={mpmath.nstr(lam, 8)}")
    return cert


def extract_certificate(solution: SdpSolution, d: int, eps: Scalar) -> SosDecomposition:
    """Gram-блоки q, r, s и v из решения задачи build_sos для Univariate4."""
    if solution.status != SdpStatus.OPTIMAL:
        raise SolverFailure(f"cannot extract from a {solution.status.value} solution", status=solution.status.value)
    y = list(solution.y)
    expected = (d + 1) * (d + 2) // 2 + d * (d + 1) + 1
    if len(y) != expected:
        raise ValueError(f"solution has {len(y)} variables, expected {expected} for order {d}")
    with precision(solution.precision):
        pos = 0
        grams = []
        for size in (d + 1, d, d):
            M = [[mpmath.mpf(0)] * size for _ in range(size)]
            for a in range(size):
                for b in range(a, size):
                    M[a][b] = M[b][a] = y[pos]
                    pos += 1
            grams.append(GramCertificate(basis_degree=size - 1, gram=tuple(map(tuple, M))))
        cert = SosDecomposition(v=y[pos], q=grams[0], r=grams[1], s=grams[2], epsilon=eps)
        _accept(cert, f"extraction at d={d}")
    return cert


def shift_certificate(c: SosDecomposition, delta: Scalar) -> SosDecomposition:
    """q ← q + δ·s·x², ε ← ε + δ: сертификат остается верным при большем ε."""
    with precision(working_bits(None)):
        eps, delta_ = unify(c.epsilon, delta)
        if delta_ < 0 or eps + delta_ > 1:
            raise DomainError(f"shift {delta} leaves epsilon outside [0, 1]")
        q = gram_add(c.q, gram_shift(c.s, 1), delta_)
        return SosDecomposition(v=c.v, q=q, r=c.r, s=c.s, epsilon=eps + delta_)


# --- 6. ПЕРЕНОС НА ОКРУЖНОСТЬ ---

def lift_to_bivariate(c: SosDecomposition, bits: int | None = None) -> LiftReport:
    """
    x₁ − v = q + r·x₂² + (r − (1−ε)s)(1 − x₁² − x₂²) + s·(1 − ε + x₁ − (1−ε)x₂²),
    q, r, s от x₁. Множитель при равенстве знака не имеет.
    """
    with precision(working_bits(bits)):
        eta = eta_of(c.epsilon)
        q = uni_in(gram_polynomial(c.q), 0)
        r = uni_in(gram_polynomial(c.r), 0)
        s = uni_in(gram_polynomial(c.s), 0)
        x2sq = BiPoly({(0, 2): Fraction(1)})
        multiplier = r - s.scale(eta)
        g = BiPoly({(0, 0): eta, (1, 0): Fraction(1), (0, 2): -eta})
        circle = BiPoly({(0, 0): Fraction(1), (2, 0): Fraction(-1), (0, 2): Fraction(-1)})
        terms = (q, r * x2sq, multiplier * circle, s * g)
        lhs = BiPoly({(1, 0): Fraction(1)}) - BiPoly.constant(c.v)
        defect = lhs
        for term in terms:
            defect = defect - term
    return LiftReport(defect=defect.max_abs(), multiplier=multiplier, terms=terms)


# --- 7. ПРЕОБРАЗОВАНИЕ ГУРСА И МАРКОВСКАЯ ОЦЕНКА ---

def goursat_transform(t: UniPoly, m: int) -> UniPoly:
    """(1+x²)^{2m}·t((x²−1)/(1+x²)) = Σ t_k (x²−1)^k (1+x²)^{2m−k}."""
    if t.degree > 2 * m:
        raise DegreeOverflow(f"deg t = {t.degree} exceeds 2m = {2 * m}")
    num = UniPoly((-1, 0, 1))
    den = UniPoly((1, 0, 1))
    out = UniPoly.zero()
    for k, tk in enumerate(t.coeffs):
        if tk != 0:
            out = out + (num ** k * den ** (2 * m - k)).scale(tk)
    return out


def markov_bound(d: int) -> tuple[Any, Any]:
    """((4e)^{2d}, 1 + 2d·(4e)^{2d}) на рабочей точности."""
    if d < 1:
        raise DomainError(f"order must be >= 1, got {d}")
    coeff_bound = four_e() ** (2 * d)
    return coeff_bound, 1 + 2 * d * coeff_bound


def coefficient_bound_holds(s: UniPoly) -> bool:
    """|s_k| ≤ (4e)^{2d}·max_{0≤j≤2d} s(j/2d), где 2d: степень s (округленная вверх до четной)."""
    deg = s.degree
    if deg <= 0:
        return s.is_zero or s.coeff(0) >= 0
    d = (deg + 1) // 2
    coeff_bound, _ = markov_bound(d)
    peak = max(big(s(Fraction(j, 2 * d))) for j in range(2 * d + 1))
    return all(abs(big(c)) <= coeff_bound * peak for c in s.coeffs)


# --- 8. РАЦИОНАЛЬНОЕ ОКРУГЛЕНИЕ ---

def _snap(value: Scalar, denom_bound: int, tol) -> tuple[Fraction, bool]:
    """Ближайшая дробь со знаменателем ≤ denom_bound и признак точного совпадения."""
    if is_rational(value):
        return Fraction(value), True
    approx = to_fraction(value).limit_denominator(denom_bound)
    return approx, abs(big(approx) - value) <= tol


def _round_gram(G: GramCertificate, denom_bound: int, tol, name: str) -> GramCertificate:
    n = G.size
    structural = {a for a in range(n) if abs(big(G.gram[a][a])) <= mpmath.mpf(1) / denom_bound ** 2}
    rows = []
    snapped_all = True
    for i in range(n):
        row = []
        for j in range(n):
            if i in structural or j in structural:
                row.append(Fraction(0))
                continue
            value, exact = _snap(G.gram[i][j], denom_bound, tol)
            snapped_all = snapped_all and exact
            row.append(value)
        rows.append(row)
    keep = [a for a in range(n) if a not in structural]
    if keep and not snapped_all:
        block = mp.matrix([[big(G.gram[i][j]) for j in keep] for i in keep])
        if psd_check(block) < mpmath.mpf(len(keep)) / denom_bound:
            raise RoundingFailed(f"Gram of {name} is too close to the PSD boundary to round")
    for i in range(n):
        for j in range(i):
            rows[i][j] = rows[j][i]
    return GramCertificate(basis_degree=G.basis_degree, gram=tuple(map(tuple, rows)))


def _exact_psd(G: GramCertificate) -> bool:
    M = sympy.Matrix([[_exact(v) for v in row] for row in G.gram])
    return bool(M.is_positive_semidefinite)


def rationalize_certificate(c: SosDecomposition, denom_bound: int, bits: int | None = None) -> SosDecomposition:
    """
    Округляет Gram-элементы до дробей со знаменателем ≤ denom_bound, устраняет дефект тождества
    через Gram q (четные степени на диагонали, нечетные на первой наддиагонали) и проверяет
    PSD точно.
    """
    if denom_bound < 1:
        raise DomainError("denom_bound must be positive")
    with precision(working_bits(bits)):
        check = verify_certificate(c)
        if big(check.residual) > mpmath.mpf("1e-2") / denom_bound ** 2:
            raise RoundingFailed(f"residual {mpmath.nstr(big(check.residual), 5)} is too large to round")
        tol = mpmath.ldexp(1, -mp.prec // 2)
        eps, eps_exact = _snap(c.epsilon, denom_bound, tol)
        if not eps_exact:
            eps = to_fraction(c.epsilon)
        v, _ = _snap(c.v, denom_bound, tol)
        q = _round_gram(c.q, denom_bound, tol, "q")
        r = _round_gram(c.r, denom_bound, tol, "r")
        s = _round_gram(c.s, denom_bound, tol, "s")

    draft = SosDecomposition(v=v, q=q, r=r, s=s, epsilon=eps)
    defect = identity_defect(draft)
    rows = [list(row) for row in q.gram]
    for k, delta in enumerate(defect.coeffs):
        if delta == 0:
            continue
        if k > 2 * q.basis_degree:
            raise RoundingFailed(f"defect at x^{k} is outside the reach of q")
        if k % 2 == 0:
            rows[k // 2][k // 2] += delta
        else:
            a, b = (k - 1) // 2, (k + 1) // 2
            rows[a][b] += delta / 2
            rows[b][a] += delta / 2
    q = GramCertificate(basis_degree=q.basis_degree, gram=tuple(map(tuple, rows)))
    exact = SosDecomposition(v=v, q=q, r=r, s=s, epsilon=eps)
    if not identity_defect(exact).is_zero:
        raise RoundingFailed("diagonal repair left a nonzero defect")
    for name, G in (("q", q), ("r", r), ("s", s)):
        if not _exact_psd(G):
            raise RoundingFailed(f"rounded Gram of {name} is not PSD")
    log_action("certificates", "RATIONALIZE", f"d={c.order} denom_bound={denom_bound}")
    return exact


# --- 9. JSON "cert-v1" ---

def _gram_json(G: GramCertificate) -> dict:
    return {"basis_degree": G.basis_degree, "gram": [[to_decimal(v) for v in row] for row in G.gram]}


def _gram_from_json(data: dict) -> GramCertificate:
    return GramCertificate(
        basis_degree=data["basis_degree"],
        gram=tuple(tuple(parse_scalar(v) for v in row) for row in data["gram"]),
    )


def certificate_to_json(c: SosDecomposition | ReducedDecomposition, bits: int | None = None) -> dict:
    with precision(working_bits(bits)):
        if isinstance(c, SosDecomposition):
            check = verify_certificate(c)
            doc: dict[str, Any] = {
                "schema": CERT_SCHEMA,
                "kind": "full",
                "v": to_decimal(c.v),
                "q": _gram_json(c.q),
                "r": _gram_json(c.r),
                "s": _gram_json(c.s),
            }
        else:
            check = verify_reduced(c)
            doc = {
                "schema": CERT_SCHEMA,
                "kind": "reduced",
                "q_tilde": _gram_json(c.q_tilde),
                "r_tilde": _gram_json(c.r_tilde) if c.r_tilde is not None else None,
                "s": _gram_json(c.s),
            }
        doc["epsilon"] = to_decimal(c.epsilon)
        doc["metadata"] = {
            "epsilon": to_decimal(c.epsilon),
            "order": c.order,
            "residual": to_decimal(check.residual, 64),
            "min_gram_eig": to_decimal(check.min_gram_eig, 64),
        }
    return doc


def certificate_from_json(doc: dict, bits: int | None = None) -> SosDecomposition | ReducedDecomposition:
    if doc.get("schema") != CERT_SCHEMA:
        raise ValueError(f"unsupported schema {doc.get('schema')!r}, expected {CERT_SCHEMA}")
    with precision(working_bits(bits)):
        eps = parse_scalar(doc["epsilon"])
        if doc.get("kind", "full") == "full":
            return SosDecomposition(
                v=parse_scalar(doc["v"]),
                q=_gram_from_json(doc["q"]),
                r=_gram_from_json(doc["r"]),
                s=_gram_from_json(doc["s"]),
                epsilon=eps,
            )
        return ReducedDecomposition(
            q_tilde=_gram_from_json(doc["q_tilde"]),
            r_tilde=_gram_from_json(doc["r_tilde"]) if doc.get("r_tilde") else None,
            s=_gram_from_json(doc["s"]),
            epsilon=eps,
        )
