import random
from fractions import Fraction

import mpmath
import pytest
from mpmath import mp

from sos_staircase.config import settings
from sos_staircase.core.poly import (
    BiPoly,
    UniPoly,
    chebyshev_congruence,
    grlex_key,
    monomials_2d,
    poly_arith,
    poly_eval,
    poly_pow,
)
from sos_staircase.core.scalar import (
    parse_scalar,
    precision,
    to_decimal,
    to_fraction,
    unify,
    working_bits,
)


# --- 1. СКАЛЯРЫ ---

def test_precision_context_restores_bits():
    before = mp.prec
    with precision(300) as bits:
        assert bits == 300
        assert mp.prec == 300
    assert mp.prec == before


def test_working_bits_prefers_explicit_value():
    assert working_bits(300) == 300
    assert working_bits() >= settings.PREC


def test_decimal_strings_keep_rationals_exact():
    assert to_decimal(Fraction(1, 10)) == "1/10"
    assert to_decimal(Fraction(-3)) == "-3"
    assert parse_scalar("1/10") == Fraction(1, 10)
    assert parse_scalar("-7") == Fraction(-7)


def test_decimal_strings_for_big_scalars():
    with precision(256):
        value = mpmath.sqrt(2)
        text = to_decimal(value)
        assert isinstance(parse_scalar(text), mpmath.mpf)
        assert abs(parse_scalar(text) - value) < mpmath.mpf(10) ** -70


def test_to_fraction_is_exact_for_binary_values():
    with precision(128):
        assert to_fraction(mpmath.mpf("0.5")) == Fraction(1, 2)
        assert to_fraction(mpmath.mpf(-3)) == Fraction(-3)


def test_unify_promotes_to_big_when_any_value_is_real():
    with precision(128):
        a, b = unify(Fraction(1, 2), mpmath.mpf(1))
        assert isinstance(a, mpmath.mpf) and isinstance(b, mpmath.mpf)
    assert unify(1, Fraction(1, 3)) == [Fraction(1), Fraction(1, 3)]


# --- 2. ПОЛИНОМЫ ---

def test_unipoly_arithmetic_and_evaluation():
    x = UniPoly.x()
    p = (x - UniPoly.constant(1)) ** 2
    assert p.coeffs == (Fraction(1), Fraction(-2), Fraction(1))
    assert p(Fraction(3)) == 4
    assert p.degree == 2
    assert UniPoly.zero().degree == -1
    assert (p * x).coeffs[3] == 1


def test_poly_operations():
    """g = x + 0.9x² при ε = 1/10."""
    x = UniPoly.x()
    g = poly_arith(x, poly_arith(poly_pow(x, 2), Fraction(9, 10), "scale"), "add")
    assert g.coeffs == (0, 1, Fraction(9, 10))
    assert poly_eval(g, Fraction(-1)) == Fraction(-1, 10)
    assert poly_arith(g, g, "sub") == UniPoly.zero()
    assert poly_arith(g, x, "mul").coeffs[3] == Fraction(9, 10)
    with precision(128):
        assert abs(poly_eval(g, mpmath.mpf("0.5")) - mpmath.mpf("0.725")) < mpmath.mpf(10) ** -30
    with pytest.raises(ValueError):
        poly_arith(g, g, "div")


def test_unipoly_ring_axioms():
    rng = random.Random(13)

    def sample() -> UniPoly:
        return UniPoly(tuple(Fraction(rng.randint(-20, 20), rng.randint(1, 7)) for _ in range(rng.randint(0, 6))))

    one = UniPoly.constant(Fraction(1))
    for _ in range(30):
        p, q, r = sample(), sample(), sample()
        assert p + q == q + p
        assert p * q == q * p
        assert (p + q) + r == p + (q + r)
        assert (p * q) * r == p * (q * r)
        assert p * (q + r) == p * q + p * r
        assert p + UniPoly.zero() == p
        assert p * one == p
        assert p - p == UniPoly.zero()
        x = Fraction(rng.randint(-9, 9), rng.randint(1, 4))
        assert (p * q)(x) == p(x) * q(x)


def test_unipoly_compose_and_shift():
    x = UniPoly.x()
    square = x * x
    composed = square.compose(x + UniPoly.constant(1))
    assert composed == UniPoly((1, 2, 1))
    assert square.shift_down(2) == UniPoly.constant(1)
    assert UniPoly.constant(1).shift_up(3) == UniPoly.monomial(3)


def test_unipoly_degree_prunes_round_off():
    with precision(128):
        noisy = UniPoly((mpmath.mpf(1), mpmath.mpf(2), mpmath.ldexp(1, -200)))
        assert noisy.degree == 1


def test_unipoly_pow_rejects_negative_exponent():
    with pytest.raises(ValueError):
        UniPoly.x() ** -1


def test_bipoly_product():
    s = BiPoly({(1, 0): Fraction(1), (0, 1): Fraction(1)})
    square = s * s
    assert square.coeff((2, 0)) == 1
    assert square.coeff((1, 1)) == 2
    assert square.coeff((0, 2)) == 1
    assert square.total_degree == 2
    assert square(Fraction(1), Fraction(2)) == 9


def test_monomials_in_grlex_order():
    assert monomials_2d(2) == [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
    assert max([(0, 2), (1, 1), (2, 0)], key=grlex_key) == (2, 0)
    assert grlex_key((0, 3)) > grlex_key((2, 0))


def test_chebyshev_rows():
    """T0 = 1, T1 = x, T2 = 2x² − 1."""
    assert chebyshev_congruence(2) == [
        [Fraction(1), Fraction(0), Fraction(0)],
        [Fraction(0), Fraction(1), Fraction(0)],
        [Fraction(-1), Fraction(0), Fraction(2)],
    ]


def test_unipoly_json():
    p = UniPoly((Fraction(1, 2), 0, 3))
    assert p.to_json() == {"basis": "power", "coeffs": ["1/2", "0", "3"]}
    assert UniPoly.from_json(p.to_json()) == p
    with pytest.raises(ValueError):
        UniPoly.from_json({"basis": "chebyshev", "coeffs": []})
