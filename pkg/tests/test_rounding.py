from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ausn.coding import CodeWord, make_layout
from ausn.errors import CodeError, ValidationError
from ausn.quantizer import quantize_tensor
from ausn.rounding import (PowerPoly, RoundingBudget, canonicalize, compress, dot_product,
                           encode_poly, matvec, merge_run, multiply)

from oracles import binary_terms


def budget(b_sub):
    return RoundingBudget(b_sub + 1, b_sub, (1,) * b_sub)


def test_canonicalize_is_binary_expansion():
    p = canonicalize(PowerPoly(1, (3, 3, 3, 0, 1, 1)))
    assert p.exponents == tuple(binary_terms(3 * 8 + 1 + 4))
    assert p.is_canonical
    assert canonicalize(PowerPoly(-1, (2, 2))).exponents == (3,)
    assert canonicalize(PowerPoly(-1, (2, 2))).sign == -1
    assert canonicalize(PowerPoly()).is_zero


@given(st.lists(st.integers(-20, 20), max_size=30))
@settings(max_examples=200, deadline=None)
def test_canonicalize_preserves_value(exps):
    p = PowerPoly(1, exps)
    c = canonicalize(p)
    assert c.value == p.value and c.is_canonical


def test_merge_run():
    # 2+4+8 with b_sub=1: a run of length 3 >= 3 becomes 16
    assert merge_run(PowerPoly(1, (1, 2, 3)), 1).exponents == (4,)
    # length 2 is short enough to stay
    assert merge_run(PowerPoly(1, (1, 2)), 1).exponents == (1, 2)
    # carries can join runs: {0,1,2,4,5} -> {3,4,5} -> {6}
    assert merge_run(PowerPoly(1, (0, 1, 2, 4, 5)), 1).exponents == (6,)
    assert merge_run(PowerPoly(1, (0, 1, 2, 4)), 1).exponents == (3, 4)


def test_compress_golden():
    assert compress(PowerPoly.from_int(412), RoundingBudget(2, 1, (1,))).value == 384
    assert compress(PowerPoly.from_int(412), RoundingBudget(2, 1, (1,))).exponents == (7, 8)
    assert compress(PowerPoly.from_int(257), RoundingBudget(2, 1, (1,))).exponents == (8,)
    assert compress(PowerPoly(1, (2, 3, 4)), budget(1)).exponents == (5,)
    assert compress(PowerPoly.from_int(15), budget(1)).exponents == (4,)


def test_compress_sign_and_zero():
    p = compress(PowerPoly.from_int(-412), RoundingBudget(2, 1, (1,)))
    assert p.sign == -1 and p.value == -384
    assert compress(PowerPoly(), budget(2)).is_zero


@given(st.integers(1, 2 ** 20), st.integers(1, 3), st.integers(-10, 10))
@settings(max_examples=300, deadline=None)
def test_compress_properties(n, b_sub, shift):
    bud = budget(b_sub)
    p = PowerPoly.from_scaled_int(n, shift)
    c = compress(p, bud)
    assert bud.satisfied_by(c)
    M = p.exponents[-1]
    assert Fraction(2) ** M <= c.value <= Fraction(2) ** (M + 1)
    assert compress(c, bud) == c


def test_budget_validation():
    with pytest.raises(ValueError):
        RoundingBudget(0, 0)
    with pytest.raises(ValueError):
        RoundingBudget(3, 2, (1,))
    lay = make_layout(8, 3, [2, 2])
    b = RoundingBudget.for_layout(lay)
    assert (b.max_terms, b.b_sub, b.gap_bits) == (3, 4, (2, 2))
    assert b.satisfied_by(PowerPoly(1, (0, 3, 6)))
    assert not b.satisfied_by(PowerPoly(1, (0, 4)))
    assert not b.satisfied_by(PowerPoly(1, (0, 0)))


def test_multiply_is_exponent_cross_sum():
    a = PowerPoly(1, (1, 0))
    b = PowerPoly(-1, (2, 1, 0))
    assert multiply(a, b).value == -21
    assert len(multiply(a, b)) == 6
    assert multiply(a, PowerPoly()).is_zero


def test_encode_poly():
    lay = make_layout(6, 3, [2])
    assert encode_poly(PowerPoly(1, (-3, -1)), lay, 0) == CodeWord(1, (1, 2))
    assert encode_poly(PowerPoly(), lay, 0) == CodeWord(1, (0, 0))
    with pytest.raises(CodeError):
        encode_poly(PowerPoly(1, (-6, -1)), lay, 0)       # gap 5 > 3
    with pytest.raises(CodeError):
        encode_poly(PowerPoly(1, (1,)), lay, 0)           # above the range


def _exact_dot(w, a):
    return sum(Fraction(float(x)) * Fraction(float(y)) for x, y in zip(w, a))


def test_dot_product_exact_accumulator():
    lay = make_layout(6, 3, [2])
    rng = np.random.default_rng(1)
    wq = quantize_tensor(rng.standard_normal(32), lay)
    aq = quantize_tensor(rng.standard_normal(32), lay)
    r = dot_product(wq, aq, lay, "exact")
    assert r.exact == _exact_dot(wq.dequantize(), aq.dequantize())
    assert abs(r.value) <= abs(r.exact)
    r2 = dot_product(wq, aq, lay, "rounded")
    assert r2.exact == r.exact
    assert PowerPoly.from_code(r2.code, r2.power_j).value == r2.value


def test_dot_product_zero_and_overflow():
    lay = make_layout(5, 2, [2])
    z = quantize_tensor(np.zeros(4), lay)
    r = dot_product(z, z, lay)
    assert r.exact == 0 and r.code.is_zero
    big = quantize_tensor(np.full(4, 1.0), lay)
    assert dot_product(big, big, lay, acc_bits=2).overflow is True
    assert dot_product(big, big, lay, acc_bits=32).overflow is False
    with pytest.raises(ValueError):
        dot_product(big, big, lay, "approx")
    with pytest.raises(ValidationError):
        dot_product(big, quantize_tensor(np.ones(3), lay), lay)


def test_matvec_rows():
    lay = make_layout(6, 3, [2])
    rng = np.random.default_rng(2)
    w = rng.standard_normal((4, 8))
    wq = quantize_tensor(w, lay)
    aq = quantize_tensor(rng.standard_normal(8), lay)
    rows = matvec(wq, aq, lay, "rounded", out_power_j=4)
    deq = wq.dequantize()
    assert [r.exact for r in rows] == [_exact_dot(deq[i], aq.dequantize()) for i in range(4)]
    assert all(r.power_j == 4 for r in rows)
    with pytest.raises(ValidationError):
        matvec(aq, aq, lay)
