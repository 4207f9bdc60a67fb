"""
Полиномы в степенном базисе.

UniPoly: плотный одномерный, coeffs[k]: коэффициент при x^k.
BiPoly: разреженный двумерный, terms[(i, j)]: коэффициент при x1^i x2^j.
Коэффициенты либо все Fraction (точный путь), либо mpf (путь BigScalar).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal

import mpmath

from sos_staircase.core.scalar import Scalar, big, is_rational, parse_scalar, pruning_threshold, to_decimal, unify


def _strip(coeffs: Iterable[Scalar]) -> tuple:
    items = list(coeffs)
    while items and items[-1] == 0:
        items.pop()
    return tuple(items)


def _normalize(coeffs: Iterable[Scalar]) -> tuple:
    items = list(coeffs)
    if not items:
        return ()
    return _strip(unify(*items))


# --- 1. ОДНОМЕРНЫЕ ПОЛИНОМЫ ---

@dataclass(frozen=True)
class UniPoly:
    coeffs: tuple = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _normalize(self.coeffs))

    # Конструкторы
    @classmethod
    def zero(cls) -> UniPoly:
        return cls(())

    @classmethod
    def constant(cls, c: Scalar) -> UniPoly:
        return cls((c,))

    @classmethod
    def x(cls) -> UniPoly:
        return cls((Fraction(0), Fraction(1)))

    @classmethod
    def monomial(cls, k: int, c: Scalar = 1) -> UniPoly:
        return cls(tuple([0] * k + [c]))

    @property
    def is_rational(self) -> bool:
        return all(is_rational(c) for c in self.coeffs)

    @property
    def is_zero(self) -> bool:
        return not self.coeffs

    @property
    def degree(self) -> int:
        """
        Степень с отсечением шумовых коэффициентов mpf: |c| < 2^(−prec+16)·max|c|
        считается структурным нулем. Нулевой полином имеет степень −1.
        """
        if not self.coeffs:
            return -1
        if self.is_rational:
            return len(self.coeffs) - 1
        scale = max(abs(big(c)) for c in self.coeffs)
        cut = pruning_threshold() * scale
        for k in range(len(self.coeffs) - 1, -1, -1):
            if abs(self.coeffs[k]) >= cut and self.coeffs[k] != 0:
                return k
        return -1

    def coeff(self, k: int) -> Scalar:
        if 0 <= k < len(self.coeffs):
            return self.coeffs[k]
        return Fraction(0) if self.is_rational else mpmath.mpf(0)

    def max_abs(self) -> Scalar:
        if not self.coeffs:
            return Fraction(0)
        return max(abs(c) for c in self.coeffs)

    # Вычисление (схема Горнера)
    def __call__(self, x: Scalar) -> Scalar:
        acc: Scalar = 0
        coeffs = self.coeffs
        if coeffs and not is_rational(x) and self.is_rational:
            coeffs = tuple(big(c) for c in coeffs)
        elif coeffs and is_rational(x) and not self.is_rational:
            x = big(x)
        for c in reversed(coeffs):
            acc = acc * x + c
        return acc

    # Арифметика
    def __add__(self, other: UniPoly) -> UniPoly:
        n = max(len(self.coeffs), len(other.coeffs))
        pairs = [unify(self.coeff(k), other.coeff(k)) for k in range(n)]
        return UniPoly(tuple(a + b for a, b in pairs))

    def __neg__(self) -> UniPoly:
        return UniPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: UniPoly) -> UniPoly:
        return self + (-other)

    def __mul__(self, other: UniPoly | Scalar) -> UniPoly:
        if not isinstance(other, UniPoly):
            return self.scale(other)
        if self.is_zero or other.is_zero:
            return UniPoly.zero()
        a = list(self.coeffs)
        b = list(other.coeffs)
        unified = unify(*a, *b)
        a, b = unified[:len(a)], unified[len(a):]
        out = [a[0] * 0 for _ in range(len(a) + len(b) - 1)]
        for i, ai in enumerate(a):
            if ai == 0:
                continue
            for j, bj in enumerate(b):
                out[i + j] += ai * bj
        return UniPoly(tuple(out))

    __rmul__ = __mul__

    def scale(self, c: Scalar) -> UniPoly:
        if not self.coeffs:
            return self
        items = unify(c, *self.coeffs)
        return UniPoly(tuple(items[0] * v for v in items[1:]))

    def __pow__(self, n: int) -> UniPoly:
        """Возведение в степень повторным возведением в квадрат."""
        if n < 0:
            raise ValueError("negative power")
        result = UniPoly.constant(Fraction(1))
        base = self
        while n:
            if n & 1:
                result = result * base
            n >>= 1
            if n:
                base = base * base
        return result

    def compose(self, inner: UniPoly) -> UniPoly:
        """self(inner(x)) по Горнеру."""
        acc = UniPoly.zero()
        for c in reversed(self.coeffs):
            acc = acc * inner + UniPoly.constant(c)
        return acc

    def shift_down(self, k: int) -> UniPoly:
        """Деление на x^k; младшие k коэффициентов отбрасываются (должны быть нулями)."""
        return UniPoly(self.coeffs[k:])

    def shift_up(self, k: int) -> UniPoly:
        if self.is_zero:
            return self
        return UniPoly(tuple([self.coeffs[0] * 0] * k) + self.coeffs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UniPoly):
            return NotImplemented
        n = max(len(self.coeffs), len(other.coeffs))
        for k in range(n):
            a, b = unify(self.coeff(k), other.coeff(k))
            if a != b:
                return False
        return True

    def __hash__(self) -> int:
        return hash(tuple(str(c) for c in self.coeffs))

    # JSON
    def to_json(self) -> dict:
        return {"basis": "power", "coeffs": [to_decimal(c) for c in self.coeffs]}

    @classmethod
    def from_json(cls, data: dict) -> UniPoly:
        if data.get("basis", "power") != "power":
            raise ValueError(f"unsupported basis {data.get('basis')}")
        return cls(tuple(parse_scalar(c) for c in data["coeffs"]))

    def __repr__(self) -> str:
        return f"UniPoly({[to_decimal(c) for c in self.coeffs]})"


def poly_eval(p: UniPoly, x: Scalar) -> Scalar:
    return p(x)


def poly_arith(a: UniPoly, b: UniPoly | Scalar, op: Literal["add", "sub", "mul", "scale"]) -> UniPoly:
    if op == "add":
        return a + b  # type: ignore[operator]
    if op == "sub":
        return a - b  # type: ignore[operator]
    if op == "mul":
        return a * b
    if op == "scale":
        return a.scale(b)
    raise ValueError(f"unknown op {op}")


def poly_pow(p: UniPoly, n: int) -> UniPoly:
    return p ** n


# --- 2. ДВУМЕРНЫЕ ПОЛИНОМЫ ---

Exponent = tuple[int, int]


def grlex_key(alpha: Exponent) -> tuple[int, int]:
    """Градуированный лексикографический порядок, x1 > x2: больший ключ у старшего монома."""
    return (alpha[0] + alpha[1], alpha[0])


def monomials_2d(degree: int) -> list[Exponent]:
    """Мономы степени ≤ degree по возрастанию степени, внутри степени от x1^t к x2^t."""
    return [(i, t - i) for t in range(degree + 1) for i in range(t, -1, -1)]


@dataclass(frozen=True)
class BiPoly:
    terms: dict = field(default_factory=dict)

    def __post_init__(self):
        items = {k: v for k, v in self.terms.items() if v != 0}
        if items:
            keys = list(items)
            values = unify(*items.values())
            items = dict(zip(keys, values))
        object.__setattr__(self, "terms", dict(sorted(items.items(), key=lambda kv: grlex_key(kv[0]))))

    @classmethod
    def from_uni(cls, p: UniPoly, var: int = 0) -> BiPoly:
        if var == 0:
            return cls({(k, 0): c for k, c in enumerate(p.coeffs)})
        return cls({(0, k): c for k, c in enumerate(p.coeffs)})

    @classmethod
    def constant(cls, c: Scalar) -> BiPoly:
        return cls({(0, 0): c})

    @property
    def total_degree(self) -> int:
        return max((i + j for i, j in self.terms), default=-1)

    @property
    def is_rational(self) -> bool:
        return all(is_rational(c) for c in self.terms.values())

    def coeff(self, alpha: Exponent) -> Scalar:
        return self.terms.get(alpha, Fraction(0))

    def __add__(self, other: BiPoly) -> BiPoly:
        out = dict(self.terms)
        for k, v in other.terms.items():
            if k in out:
                a, b = unify(out[k], v)
                out[k] = a + b
            else:
                out[k] = v
        return BiPoly(out)

    def __neg__(self) -> BiPoly:
        return BiPoly({k: -v for k, v in self.terms.items()})

    def __sub__(self, other: BiPoly) -> BiPoly:
        return self + (-other)

    def scale(self, c: Scalar) -> BiPoly:
        out = {}
        for k, v in self.terms.items():
            a, b = unify(c, v)
            out[k] = a * b
        return BiPoly(out)

    def __mul__(self, other: BiPoly | Scalar) -> BiPoly:
        if not isinstance(other, BiPoly):
            return self.scale(other)
        out: dict = {}
        for (i1, j1), a in self.terms.items():
            for (i2, j2), b in other.terms.items():
                a_, b_ = unify(a, b)
                key = (i1 + i2, j1 + j2)
                if key in out:
                    acc, prod = unify(out[key], a_ * b_)
                    out[key] = acc + prod
                else:
                    out[key] = a_ * b_
        return BiPoly(out)

    def __call__(self, x1: Scalar, x2: Scalar) -> Scalar:
        acc: Scalar = 0
        for (i, j), c in self.terms.items():
            c_, a, b = unify(c, x1, x2)
            acc = acc + c_ * a ** i * b ** j
        return acc

    def max_abs(self) -> Scalar:
        return max((abs(v) for v in self.terms.values()), default=Fraction(0))

    def to_json(self) -> dict:
        return {"basis": "power", "terms": [[i, j, to_decimal(c)] for (i, j), c in self.terms.items()]}


def uni_in(p: UniPoly, var: int) -> BiPoly:
    return BiPoly.from_uni(p, var)


# --- 3. БАЗИС ЧЕБЫШЕВА ---

def chebyshev_congruence(d: int) -> list[list[Fraction]]:
    """
    Матрица C размера (d+1)×(d+1): T_k(x) = Σ_j C[k][j] x^j.
    Блок в базисе Чебышева: C·B·Cᵀ (значение релаксации не меняется, C обратима).
    """
    rows: list[list[Fraction]] = []
    t_prev = UniPoly.constant(Fraction(1))
    t_cur = UniPoly.x()
    for k in range(d + 1):
        if k == 0:
            poly = t_prev
        elif k == 1:
            poly = t_cur
        else:
            t_prev, t_cur = t_cur, UniPoly.x().scale(Fraction(2)) * t_cur - t_prev
            poly = t_cur
        rows.append([Fraction(poly.coeff(j)) for j in range(d + 1)])
    return rows
