"""
SDP произвольной точности: прямо-двойственный метод внутренней точки (HKM + Мехротра).

Прямая задача (y-форма):   min c·y   s.t.  Z_k = F_k0 + Σ y_i F_ki ⪰ 0,   A y = b
Двойственная:              max −Σ⟨F_k0, X_k⟩ + b·λ   s.t.  Σ⟨F_ki, X_k⟩ + (Aᵀλ)_i = c_i,   X_k ⪰ 0
"""
from dataclasses import dataclass, field
from typing import Iterator

import mpmath
from mpmath import mp

from sos_staircase.core.scalar import big, precision
from sos_staircase.exceptions import NumericalBreakdown
from sos_staircase.logger import log_action, log_warning
from sos_staircase.models import (
    FeasibilityResult,
    FeasibilityStatus,
    LinearEquality,
    SdpBlock,
    SdpProblem,
    SdpSolution,
    SdpStatus,
    SolverParams,
)

# Отношение нормы луча к невязке, при котором луч считается сертификатом
RAY_BOX = mpmath.mpf(10) ** 6
STALL_WINDOW = 8


# --- 1. ПЛОТНЫЕ/РАЗРЕЖЕННЫЕ ПОМОЩНИКИ ---

def dense(entries, n: int) -> mpmath.matrix:
    out = mp.matrix(n, n)
    for i, j, v in entries:
        v = big(v)
        out[i, j] += v
        if i != j:
            out[j, i] += v
    return out


def trace_prod(entries, G: mpmath.matrix):
    """tr(F·G) для симметричной F, заданной верхним треугольником."""
    acc = mpmath.mpf(0)
    for i, j, v in entries:
        if i == j:
            acc += v * G[i, i]
        else:
            acc += v * (G[j, i] + G[i, j])
    return acc


def right_mul(X: mpmath.matrix, entries, n: int) -> mpmath.matrix:
    """X·F для разреженной симметричной F."""
    out = mp.matrix(n, n)
    for i, j, v in entries:
        for r in range(n):
            out[r, j] += X[r, i] * v
            if i != j:
                out[r, i] += X[r, j] * v
    return out


def sym(M: mpmath.matrix) -> mpmath.matrix:
    return (M + M.T) * mpmath.mpf(0.5)


def trace_of_product(A: mpmath.matrix, B: mpmath.matrix):
    n = A.rows
    return mpmath.fsum(A[i, j] * B[j, i] for i in range(n) for j in range(n))


def max_abs(M: mpmath.matrix):
    return max((abs(M[i, j]) for i in range(M.rows) for j in range(M.cols)), default=mpmath.mpf(0))


def frobenius(M: mpmath.matrix):
    return mp.mnorm(M, 'f')


def eigenvalues(M: mpmath.matrix) -> list:
    E = mp.eigsy(M, eigvals_only=True)
    return [E[i] for i in range(E.rows)]


def inverse_spd(S: mpmath.matrix) -> mpmath.matrix:
    """S⁻¹ через Холецкого; при потере положительной определенности NumericalBreakdown."""
    try:
        L = mp.cholesky(S)
    except (ValueError, ZeroDivisionError) as exc:
        raise NumericalBreakdown(f"iterate lost positive definiteness ({exc})") from exc
    Linv = mp.inverse(L)
    return Linv.T * Linv


def psd_check(M, bits: int | None = None):
    """
    Нижняя граница λ_min(M): оценка по eigsy, затем подтверждение Холецким
    для M − (λ̂ − δ)I с расширением δ при неудаче; запасной путь: круги Гершгорина.
    """
    if bits is not None:
        with precision(bits):
            return psd_check(M)
    if not isinstance(M, mpmath.matrix):
        M = mp.matrix([[big(v) for v in row] for row in M])
    n = M.rows
    if n == 0:
        return mp.inf
    M = sym(M)
    estimate = min(eigenvalues(M))
    scale = abs(estimate) + mp.mnorm(M, 'inf')
    delta = scale * mpmath.ldexp(1, -mp.prec // 2)
    if delta == 0:
        delta = mpmath.ldexp(1, -mp.prec // 2)
    grow = mpmath.ldexp(1, max(mp.prec // 16, 4))
    for _ in range(8):
        shift = estimate - delta
        try:
            mp.cholesky(M - shift * mp.eye(n))
            return shift
        except ValueError:
            delta *= grow
    return min(M[i, i] - mpmath.fsum(abs(M[i, j]) for j in range(n) if j != i) for i in range(n))


# --- 2. ДАННЫЕ ЗАДАЧИ НА РАБОЧЕЙ ТОЧНОСТИ ---

@dataclass
class _Block:
    n: int
    F0: list
    F: dict[int, list]


@dataclass
class _Data:
    m: int
    c: list
    blocks: list[_Block]
    A: mpmath.matrix | None
    b: list

    @property
    def p(self) -> int:
        return len(self.b)


def _prepare(problem: SdpProblem) -> _Data:
    blocks = [
        _Block(
            n=blk.dim,
            F0=[(i, j, big(v)) for i, j, v in blk.constant],
            F={k: [(i, j, big(v)) for i, j, v in entries] for k, entries in blk.coeffs.items()},
        )
        for blk in problem.blocks
    ]
    p = len(problem.equalities)
    A = None
    if p:
        A = mp.matrix(p, problem.num_vars)
        for r, eq in enumerate(problem.equalities):
            for k, v in eq.coeffs.items():
                A[r, k] = big(v)
    return _Data(
        m=problem.num_vars,
        c=[big(v) for v in problem.objective],
        blocks=blocks,
        A=A,
        b=[big(eq.rhs) for eq in problem.equalities],
    )


def _block_linear(blk: _Block, y: list) -> mpmath.matrix:
    """Σ y_i F_i без постоянной части."""
    Z = mp.matrix(blk.n, blk.n)
    for k, entries in blk.F.items():
        if y[k] == 0:
            continue
        for i, j, v in entries:
            Z[i, j] += y[k] * v
            if i != j:
                Z[j, i] += y[k] * v
    return Z


def _block_value(blk: _Block, y: list) -> mpmath.matrix:
    return dense(blk.F0, blk.n) + _block_linear(blk, y)


def _least_norm(data: _Data) -> list:
    """Решение A y = b минимальной нормы: y = Aᵀ (A Aᵀ)⁻¹ b."""
    y = [mpmath.mpf(0)] * data.m
    if not data.p:
        return y
    A = data.A
    try:
        w = mp.lu_solve(A * A.T, mp.matrix(data.b))
    except ZeroDivisionError as exc:
        raise NumericalBreakdown("equality constraints are linearly dependent") from exc
    yv = A.T * w
    return [yv[i] for i in range(data.m)]


# --- 3. ИТЕРАЦИИ ---

@dataclass
class Iterate:
    iteration: int
    y: list
    Z: list
    X: list
    lam: list
    primal_obj: object
    dual_obj: object
    gap: object
    primal_residual: object
    dual_residual: object
    mu: object
    block_residuals: list = field(default_factory=list)
    r_d: list = field(default_factory=list)
    step: tuple = (0, 0)


class InteriorPointSolver:
    """Один экземпляр решает одну задачу; рабочие массивы принадлежат экземпляру."""

    def __init__(self, problem: SdpProblem, params: SolverParams):
        if not problem.blocks:
            raise ValueError("problem needs at least one block")
        self.problem = problem
        self.params = params

    # Схур: M_ij = tr(F_i X F_j Z⁻¹), плюс ⟨F_i, G⟩
    def _schur(self, data: _Data, X: list, Zinv: list) -> mpmath.matrix:
        M = mp.matrix(data.m, data.m)
        for k, blk in enumerate(data.blocks):
            XF = {j: right_mul(X[k], entries, blk.n) * Zinv[k] for j, entries in blk.F.items()}
            for j, P in XF.items():
                for i, entries in blk.F.items():
                    M[i, j] += trace_prod(entries, P)
        return M

    def _kkt(self, data: _Data, M: mpmath.matrix) -> tuple:
        """
        LU системы [[M, −Aᵀ], [A, 0]] после симметричного масштабирования D·K·D
        (диагональ блока Схура приводится к 1, строки A к единичной max-норме).
        Если факторизация все равно вырождена, повтор с регуляризацией M + δI.
        Возвращает (lu, perm, scale).
        """
        size = data.m + data.p
        scale = [1 / mpmath.sqrt(M[i, i]) if M[i, i] > 0 else mpmath.mpf(1) for i in range(data.m)]
        for r in range(data.p):
            row = max((abs(data.A[r, i]) * scale[i] for i in range(data.m)), default=mpmath.mpf(0))
            scale.append(1 / row if row > 0 else mpmath.mpf(1))
        K = mp.matrix(size, size)
        for i in range(data.m):
            for j in range(data.m):
                K[i, j] = scale[i] * M[i, j] * scale[j]
        for r in range(data.p):
            for i in range(data.m):
                value = scale[data.m + r] * data.A[r, i] * scale[i]
                K[data.m + r, i] = value
                K[i, data.m + r] = -value
        try:
            lu, perm = mp.LU_decomp(K)
            return lu, perm, scale
        except ZeroDivisionError:
            pass
        delta = mpmath.ldexp(1, -mp.prec // 2)
        for i in range(data.m):
            K[i, i] += delta
        try:
            lu, perm = mp.LU_decomp(K)
        except ZeroDivisionError as exc:
            raise NumericalBreakdown("Newton system is numerically singular") from exc
        log_warning("solver", "REGULARIZE", f"schur block shifted by {mpmath.nstr(delta, 3)} size={size}")
        return lu, perm, scale

    def _direction(self, data, LU, X, Z, Zinv, P, r_d, r_e, target, corr=None):
        """Направление HKM для цели σμ (corr: поправка Мехротры dXa·dZa)."""
        rhs = mp.matrix(data.m + data.p, 1)
        G = []
        for k, blk in enumerate(data.blocks):
            core = target * mp.eye(blk.n) - X[k] * P[k]
            if corr is not None:
                core -= corr[k]
            Gk = core * Zinv[k] - X[k]
            G.append(Gk)
            for i, entries in blk.F.items():
                rhs[i] += trace_prod(entries, Gk)
        for i in range(data.m):
            rhs[i] -= r_d[i]
        for r in range(data.p):
            rhs[data.m + r] = r_e[r]
        lu, perm, scale = LU
        for i in range(data.m + data.p):
            rhs[i] *= scale[i]
        sol = mp.U_solve(lu, mp.L_solve(lu, rhs, perm))
        dy = [sol[i] * scale[i] for i in range(data.m)]
        dlam = [sol[data.m + r] * scale[data.m + r] for r in range(data.p)]
        dZ, dX = [], []
        for k, blk in enumerate(data.blocks):
            S = _block_linear(blk, dy)
            dZk = P[k] + S
            dZ.append(dZk)
            dX.append(sym(G[k] - X[k] * S * Zinv[k]))
        return dy, dlam, dZ, dX

    @staticmethod
    def _max_step(S: mpmath.matrix, dS: mpmath.matrix):
        L = mp.cholesky(S)
        Linv = mp.inverse(L)
        W = sym(Linv * dS * Linv.T)
        low = min(eigenvalues(W))
        if low >= 0:
            return mp.inf
        return -1 / low

    def _steps(self, X, Z, dX, dZ):
        frac = mpmath.mpf(self.params.step_fraction)
        ap = min(self._max_step(Zk, dZk) for Zk, dZk in zip(Z, dZ))
        ad = min(self._max_step(Xk, dXk) for Xk, dXk in zip(X, dX))
        return min(mpmath.mpf(1), frac * ap), min(mpmath.mpf(1), frac * ad)

    def iterates(self) -> Iterator[Iterate]:
        """Генератор итераций; вызывающий код решает, когда остановиться."""
        with precision(self.params.precision):
            data = _prepare(self.problem)
            y = _least_norm(data)
            B0 = [_block_value(blk, y) for blk in data.blocks]
            scale = max([mpmath.mpf(1)] + [max_abs(Bk) for Bk in B0] + [abs(v) for v in data.c])
            zeta = 10 * scale
            Z = [zeta * mp.eye(blk.n) for blk in data.blocks]
            X = [zeta * mp.eye(blk.n) for blk in data.blocks]
            lam = [mpmath.mpf(0)] * data.p
            total_dim = sum(blk.n for blk in data.blocks)
            step = (mpmath.mpf(0), mpmath.mpf(0))

            for it in range(self.params.max_iters + 1):
                P = [_block_value(blk, y) - Z[k] for k, blk in enumerate(data.blocks)]
                r_d = list(data.c)
                for k, blk in enumerate(data.blocks):
                    for i, entries in blk.F.items():
                        r_d[i] -= trace_prod(entries, X[k])
                for r in range(data.p):
                    for i in range(data.m):
                        if data.A[r, i] != 0:
                            r_d[i] -= data.A[r, i] * lam[r]
                r_e = [data.b[r] - mpmath.fsum(data.A[r, i] * y[i] for i in range(data.m)) for r in range(data.p)]
                pobj = mpmath.fsum(ci * yi for ci, yi in zip(data.c, y))
                dobj = -mpmath.fsum(trace_prod(blk.F0, X[k]) for k, blk in enumerate(data.blocks))
                dobj += mpmath.fsum(br * lr for br, lr in zip(data.b, lam))
                mu = mpmath.fsum(trace_of_product(X[k], Z[k]) for k in range(len(Z))) / total_dim
                pinf = max([max_abs(Pk) for Pk in P] + [abs(v) for v in r_e])
                dinf = max((abs(v) for v in r_d), default=mpmath.mpf(0))

                yield Iterate(
                    iteration=it, y=list(y), Z=Z, X=X, lam=list(lam),
                    primal_obj=pobj, dual_obj=dobj, gap=abs(pobj - dobj),
                    primal_residual=pinf, dual_residual=dinf, mu=mu,
                    block_residuals=P, r_d=r_d, step=step,
                )
                if it == self.params.max_iters:
                    return

                Zinv = [inverse_spd(Zk) for Zk in Z]
                M = self._schur(data, X, Zinv)
                LU = self._kkt(data, M)

                # Предиктор (σ = 0)
                dy, dlam, dZ, dX = self._direction(data, LU, X, Z, Zinv, P, r_d, r_e, mpmath.mpf(0))
                try:
                    ap, ad = self._steps(X, Z, dX, dZ)
                except (ValueError, ZeroDivisionError) as exc:
                    raise NumericalBreakdown(f"step length failed ({exc})") from exc
                mu_aff = mpmath.fsum(
                    trace_of_product(X[k] + ad * dX[k], Z[k] + ap * dZ[k]) for k in range(len(Z))
                ) / total_dim
                sigma = (mu_aff / mu) ** 3 if mu > 0 else mpmath.mpf(0)
                sigma = min(mpmath.mpf(1), max(mpmath.mpf(0), sigma))

                # Корректор
                corr = [dX[k] * dZ[k] for k in range(len(Z))]
                dy, dlam, dZ, dX = self._direction(data, LU, X, Z, Zinv, P, r_d, r_e, sigma * mu, corr)
                try:
                    ap, ad = self._steps(X, Z, dX, dZ)
                except (ValueError, ZeroDivisionError) as exc:
                    raise NumericalBreakdown(f"step length failed ({exc})") from exc

                y = [yi + ap * di for yi, di in zip(y, dy)]
                Z = [sym(Z[k] + ap * dZ[k]) for k in range(len(Z))]
                X = [sym(X[k] + ad * dX[k]) for k in range(len(X))]
                lam = [li + ad * di for li, di in zip(lam, dlam)]
                step = (ap, ad)


# --- 4. ЛУЧИ НЕДОПУСТИМОСТИ ---

def _dual_ray(data: _Data, state: Iterate, feas_tol):
    """
    (X, λ) с ⟨F_i, X⟩ + (Aᵀλ)_i ≈ 0 и −Σ⟨F0, X⟩ + b·λ > 0 доказывает
    недопустимость прямой задачи (на допустимых y в кубе ‖y‖∞ ≤ RAY_BOX).
    """
    norm = mpmath.fsum(sum(Xk[i, i] for i in range(Xk.rows)) for Xk in state.X)
    norm += mpmath.fsum(abs(v) for v in state.lam)
    if norm <= 0:
        return None
    residual = max(abs(c - r) for c, r in zip(data.c, state.r_d)) / norm if data.c else mpmath.mpf(0)
    margin = state.dual_obj / norm
    if margin >= feas_tol and residual * RAY_BOX <= margin:
        return margin
    return None


def _primal_ray(data: _Data, state: Iterate, previous: Iterate | None, feas_tol):
    """
    Шаг d = y_k − y_{k−1}, нормированный по ‖d‖∞: A d ≈ 0, Σ d_i F_i ⪰ 0 и c·d < 0
    доказывают двойственную недопустимость. Сама точка y не проверяется.
    """
    if previous is None:
        return None
    d = [a - b for a, b in zip(state.y, previous.y)]
    norm = max((abs(v) for v in d), default=mpmath.mpf(0))
    if norm <= 0:
        return None
    d = [v / norm for v in d]
    margin = -mpmath.fsum(ci * di for ci, di in zip(data.c, d))
    if margin < feas_tol:
        return None
    for r in range(data.p):
        if abs(mpmath.fsum(data.A[r, i] * d[i] for i in range(data.m))) > feas_tol:
            return None
    if any(psd_check(_block_linear(blk, d)) < -feas_tol for blk in data.blocks):
        return None
    return margin, d


# --- 5. ПУБЛИЧНЫЕ ОПЕРАЦИИ ---

def _solution(state: Iterate, status: SdpStatus, params: SolverParams, message: str = "",
              ray=None, ray_margin=None) -> SdpSolution:
    return SdpSolution(
        y=tuple(state.y),
        duals=tuple(state.X),
        eq_duals=tuple(state.lam),
        primal_obj=state.primal_obj,
        dual_obj=state.dual_obj,
        gap=state.gap,
        status=status,
        iterations=state.iteration,
        primal_residual=state.primal_residual,
        dual_residual=state.dual_residual,
        precision=params.precision,
        ray=ray,
        ray_margin=ray_margin,
        message=message,
    )


def sdp_solve(problem: SdpProblem, params: SolverParams) -> SdpSolution:
    """
    Решает задачу до Optimal (невязки ≤ feas_tol, зазор ≤ gap_tol),
    либо возвращает луч недопустимости, либо Undecided после max_iters/стагнации.
    """
    solver = InteriorPointSolver(problem, params)
    with precision(params.precision):
        data = _prepare(problem)
        gap_tol = mpmath.mpf(params.gap_tol)
        feas_tol = mpmath.mpf(params.feas_tol)
        best_mu: list = []
        last = None
        for state in solver.iterates():
            previous, last = last, state
            if state.primal_residual <= feas_tol and state.dual_residual <= feas_tol and state.gap <= gap_tol:
                solution = _solution(state, SdpStatus.OPTIMAL, params)
                break
            margin = _dual_ray(data, state, feas_tol)
            if margin is not None:
                solution = _solution(state, SdpStatus.PRIMAL_INFEASIBLE, params, "dual improving ray",
                                     ray=tuple(state.lam), ray_margin=margin)
                break
            found = _primal_ray(data, state, previous, feas_tol)
            if found is not None:
                margin, direction = found
                solution = _solution(state, SdpStatus.DUAL_INFEASIBLE, params, "primal improving ray",
                                     ray=tuple(direction), ray_margin=margin)
                break
            best_mu.append(state.mu)
            if len(best_mu) > STALL_WINDOW and best_mu[-1] >= best_mu[-1 - STALL_WINDOW] * mpmath.mpf("0.999"):
                solution = _solution(state, SdpStatus.UNDECIDED, params, "stalled")
                break
        else:
            solution = _solution(last, SdpStatus.UNDECIDED, params, "max_iters reached")  # type: ignore[arg-type]

    log_action(
        "solver", "SDP_SOLVE",
        f"status={solution.status.value} iters={solution.iterations} gap={mpmath.nstr(solution.gap, 5)} "
        f"prec={params.precision} vars={problem.num_vars} blocks={len(problem.blocks)}",
    )
    return solution


def with_margin_variable(problem: SdpProblem) -> SdpProblem:
    """
    Вспомогательная задача: max λ при B_k(y) − λI ⪰ 0, 1 − λ ≥ 0 и исходных равенствах.
    Переменная λ получает индекс num_vars.
    """
    lam = problem.num_vars
    blocks = []
    for blk in problem.blocks:
        coeffs = dict(blk.coeffs)
        coeffs[lam] = tuple((i, i, -1) for i in range(blk.dim))
        blocks.append(SdpBlock(dim=blk.dim, constant=blk.constant, coeffs=coeffs))
    blocks.append(SdpBlock(dim=1, constant=((0, 0, 1),), coeffs={lam: ((0, 0, -1),)}))
    objective = tuple([0] * problem.num_vars + [-1])
    labels = tuple(problem.labels) + ("lambda",) if problem.labels else ()
    return SdpProblem(
        num_vars=problem.num_vars + 1,
        objective=objective,
        blocks=tuple(blocks),
        equalities=tuple(LinearEquality(coeffs=eq.coeffs, rhs=eq.rhs) for eq in problem.equalities),
        labels=labels,
    )


def _confirm_feasible(data: _Data, y: list, feas_tol):
    """Минимальная граница λ_min исходных блоков в точке y (None, если равенства нарушены)."""
    for r in range(data.p):
        if abs(data.b[r] - mpmath.fsum(data.A[r, i] * y[i] for i in range(data.m))) > feas_tol:
            return None
    return min(psd_check(_block_value(blk, y)) for blk in data.blocks)


def sdp_feasibility(problem: SdpProblem, params: SolverParams) -> FeasibilityResult:
    """
    Решает max λ при B_k(y) ⪰ λI. Feasible, если найден y с λ_min ≥ feas_tol
    (подтверждено psd_check); Infeasible, если двойственная граница λ* ≤ −feas_tol
    при двойственной невязке ≤ feas_tol; иначе Undecided.
    """
    aux = with_margin_variable(problem)
    solver = InteriorPointSolver(aux, params)
    m = problem.num_vars
    with precision(params.precision):
        data = _prepare(problem)
        feas_tol = mpmath.mpf(params.feas_tol)
        gap_tol = mpmath.mpf(params.gap_tol)
        result = FeasibilityResult(status=FeasibilityStatus.UNDECIDED, precision=params.precision)
        history: list = []
        for state in solver.iterates():
            lam = state.y[m]
            worst = max((frobenius(P) for P in state.block_residuals), default=mpmath.mpf(0))
            if lam - worst >= feas_tol:
                margin = _confirm_feasible(data, state.y[:m], feas_tol)
                if margin is not None and margin >= feas_tol:
                    result = FeasibilityResult(status=FeasibilityStatus.FEASIBLE, margin=margin,
                                               y=tuple(state.y[:m]), iterations=state.iteration,
                                               precision=params.precision)
                    break
            upper = -state.dual_obj
            if state.dual_residual <= feas_tol and upper <= -feas_tol:
                result = FeasibilityResult(status=FeasibilityStatus.INFEASIBLE, margin=upper,
                                           y=tuple(state.y[:m]), iterations=state.iteration,
                                           precision=params.precision)
                break
            if state.primal_residual <= feas_tol and state.dual_residual <= feas_tol and state.gap <= gap_tol:
                # Оптимум с |λ*| < feas_tol: решение на границе
                result = FeasibilityResult(status=FeasibilityStatus.UNDECIDED, margin=lam,
                                           y=tuple(state.y[:m]), iterations=state.iteration,
                                           precision=params.precision)
                break
            history.append(state.mu)
            if len(history) > STALL_WINDOW and history[-1] >= history[-1 - STALL_WINDOW] * mpmath.mpf("0.999"):
                result = FeasibilityResult(status=FeasibilityStatus.UNDECIDED, margin=lam,
                                           iterations=state.iteration, precision=params.precision)
                break

    log_action(
        "solver", "SDP_FEASIBILITY",
        f"status={result.status.value} iters={result.iterations} prec={params.precision} "
        f"margin={mpmath.nstr(result.margin, 5) if result.margin is not None else 'n/a'}",
    )
    return result


def solve_max_margin(problem: SdpProblem, params: SolverParams) -> tuple[SdpSolution, object]:
    """Вспомогательная задача с λ до оптимума; возвращает решение и λ*."""
    aux = with_margin_variable(problem)
    solution = sdp_solve(aux, params)
    return solution, solution.y[problem.num_vars]
