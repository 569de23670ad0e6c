"""Rounding of power-of-two polynomials and exact shift-add arithmetic.

A :class:`PowerPoly` is a signed multiset of exponents.  Products of AUSN
codes are cross sums of exponents (pure shifts), and accumulation is carried
out on wide Python integers, so a dot product is exact.  The single rounding
step at the output (:func:`compress`) folds the sum back into the term and
gap budget of the output layout without a separate re-quantization pass.
"""
from __future__ import annotations

import math
from functools import lru_cache
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, NamedTuple, Optional, Sequence

from .coding import BitLayout, CodeWord, zero_code
from .errors import CodeError, ValidationError
from .quantizer import QuantizedTensor, code_exponents, quantize_value


@dataclass(frozen=True)
class PowerPoly:
    sign: int = 1
    exponents: tuple[int, ...] = ()

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise ValueError(f"sign must be +1 or -1, got {self.sign}")
        object.__setattr__(self, "exponents", tuple(sorted(int(e) for e in self.exponents)))

    @classmethod
    def from_int(cls, n: int) -> "PowerPoly":
        sign = -1 if n < 0 else 1
        n = abs(n)
        return cls(sign, tuple(i for i in range(n.bit_length()) if n >> i & 1))

    @classmethod
    def from_scaled_int(cls, n: int, base: int) -> "PowerPoly":
        """Poly for ``n * 2**base``."""
        p = cls.from_int(n)
        return cls(p.sign, tuple(e + base for e in p.exponents))

    @classmethod
    def from_code(cls, code: CodeWord, power_j: int) -> "PowerPoly":
        return cls(code.sign, tuple(code_exponents(code, power_j)))

    @property
    def value(self) -> Fraction:
        return self.sign * sum((Fraction(2) ** e for e in self.exponents), Fraction(0))

    @property
    def is_zero(self) -> bool:
        return not self.exponents

    @property
    def is_canonical(self) -> bool:
        return len(set(self.exponents)) == len(self.exponents)

    def __len__(self):
        return len(self.exponents)

    def __float__(self):
        return float(self.value)


def _as_int(exponents: Iterable[int], base: int) -> int:
    return sum(1 << (e - base) for e in exponents)


def canonicalize(poly: PowerPoly) -> PowerPoly:
    """Merge duplicate exponents (``2**n + 2**n = 2**(n+1)``) until all are distinct.

    Carrying duplicates upward is binary addition, so the canonical form is
    the binary expansion of the value.
    """
    if poly.is_zero:
        return PowerPoly()
    base = poly.exponents[0]
    out = PowerPoly.from_scaled_int(_as_int(poly.exponents, base), base)
    return PowerPoly(poly.sign, out.exponents)


def _runs(exponents: Sequence[int]) -> list[tuple[int, int]]:
    """Maximal runs of consecutive exponents as ``(low, high)``, ascending."""
    runs = []
    for e in exponents:
        if runs and e == runs[-1][1] + 1:
            runs[-1] = (runs[-1][0], e)
        else:
            runs.append((e, e))
    return runs


def merge_run(poly: PowerPoly, b_sub: int) -> PowerPoly:
    """Replace each run ``2**n + ... + 2**m`` of length ``>= b_sub + 2`` by ``2**(m+1)``.

    Each merge adds exactly ``2**n``.  Runs are taken lowest first and the
    poly is re-canonicalized after every merge, so carries that create new
    runs are picked up on the next pass.
    """
    poly = canonicalize(poly)
    while True:
        for low, high in _runs(poly.exponents):
            if high - low + 1 >= b_sub + 2:
                rest = [e for e in poly.exponents if not low <= e <= high]
                poly = canonicalize(PowerPoly(poly.sign, rest + [high + 1]))
                break
        else:
            return poly


@dataclass(frozen=True)
class RoundingBudget:
    """How many power terms the target layout can hold, and how far apart.

    ``gap_bits[i]`` bounds the exponent gap between term ``i`` and ``i+1``
    (largest first) to ``2**gap_bits[i] - 1``.  ``None`` leaves gaps free.
    """
    max_terms: int
    b_sub: int
    gap_bits: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if self.max_terms < 1:
            raise ValueError("max_terms must be at least 1")
        if self.gap_bits is not None:
            gaps = tuple(int(b) for b in self.gap_bits)
            object.__setattr__(self, "gap_bits", gaps)
            if len(gaps) != self.max_terms - 1 or sum(gaps) != self.b_sub:
                raise ValueError(f"gap_bits {gaps} inconsistent with max_terms={self.max_terms}, "
                                 f"b_sub={self.b_sub}")

    @classmethod
    def for_layout(cls, layout: BitLayout) -> "RoundingBudget":
        return cls(layout.n_tiers + 1, layout.b_sub, layout.tier_bits)

    def satisfied_by(self, poly: PowerPoly) -> bool:
        exps = sorted(set(poly.exponents), reverse=True)
        if len(exps) != len(poly.exponents) or len(exps) > self.max_terms:
            return False
        if self.gap_bits is None:
            return True
        return all(hi - lo <= 2 ** b - 1
                   for hi, lo, b in zip(exps, exps[1:], self.gap_bits))


def _drop_smallest(poly: PowerPoly) -> PowerPoly:
    return PowerPoly(poly.sign, poly.exponents[1:])


def _merge_smallest_up(poly: PowerPoly) -> PowerPoly:
    # 2**n + 2**n' -> 2**(n'+1), n < n' the two smallest terms
    rest = list(poly.exponents[2:])
    return canonicalize(PowerPoly(poly.sign, rest + [poly.exponents[1] + 1]))


@lru_cache(maxsize=65536)
def _settle(exponents: tuple[int, ...], budget: RoundingBudget, target: int) -> tuple[int, ...]:
    # exponents are relative to the input's lowest exponent, target likewise
    poly = PowerPoly(1, exponents)
    if budget.satisfied_by(poly):
        return exponents
    down = _settle(_drop_smallest(poly).exponents, budget, target)
    up = _settle(_merge_smallest_up(poly).exponents, budget, target)
    if abs(_as_int(up, 0) - target) < abs(target - _as_int(down, 0)):
        return up
    return down


def compress(poly: PowerPoly, budget: RoundingBudget) -> PowerPoly:
    """Round ``poly`` onto the term/gap budget of a layout.

    Steps: merge long runs upward, canonicalize, drop low terms lying more
    than ``b_sub`` below the top while there are too many terms, then settle
    any remaining violation by the nearer of dropping the smallest term or
    merging the two smallest upward (each branch followed to a valid result;
    ties drop).  The magnitude is rounded and the sign carried through; the
    result stays inside ``[2**M, 2**(M+1)]`` for input magnitude in
    ``[2**M, 2**(M+1))``.
    """
    poly = canonicalize(poly)
    if poly.is_zero:
        return poly
    base = poly.exponents[0]
    top = poly.exponents[-1]
    target = _as_int(poly.exponents, base)

    poly = merge_run(poly, budget.b_sub)
    while len(poly) > budget.max_terms and poly.exponents[-1] > poly.exponents[0] + budget.b_sub:
        poly = _drop_smallest(poly)
    if not budget.satisfied_by(poly):
        rel = _settle(tuple(e - base for e in poly.exponents), budget, target)
        poly = PowerPoly(poly.sign, tuple(e + base for e in rel))

    if _as_int(poly.exponents, base) > 1 << (top + 1 - base):
        # a carry out of the top run can leave surviving low terms above 2**(M+1)
        poly = PowerPoly(poly.sign, (top + 1,))
    return poly


def multiply(a: PowerPoly, b: PowerPoly) -> PowerPoly:
    """Cross product of exponents: every term pair is a single shift."""
    if a.is_zero or b.is_zero:
        return PowerPoly()
    return PowerPoly(a.sign * b.sign, tuple(x + y for x in a.exponents for y in b.exponents))


# ---------------------------------------------------------------------------
# Shift-add dot products
# ---------------------------------------------------------------------------

def encode_poly(poly: PowerPoly, layout: BitLayout, power_j: int) -> CodeWord:
    """Code word for a canonical poly that fits ``layout`` at ``power_j`` exactly."""
    if poly.is_zero:
        return zero_code(layout)
    exps = sorted(poly.exponents, reverse=True)
    if len(set(exps)) != len(exps) or len(exps) > layout.n_tiers + 1:
        raise CodeError(f"{poly} does not fit {layout}")
    fields = [power_j - exps[0]] + [hi - lo for hi, lo in zip(exps, exps[1:])]
    for v, width in zip(fields, layout.field_widths):
        if not 1 <= v <= 2 ** width - 1:
            raise CodeError(f"{poly} does not fit {layout} at power_j={power_j}")
    fields += [0] * (layout.n_tiers + 1 - len(fields))
    return CodeWord(poly.sign, tuple(fields))


def _trunc_float(n: int, base: int) -> float:
    """``n * 2**base`` as a float, truncated toward zero to 53 bits."""
    mag = abs(n)
    extra = max(mag.bit_length() - 53, 0)
    return math.copysign(math.ldexp(mag >> extra, base + extra), n)


class DotResult(NamedTuple):
    code: CodeWord
    exact: Fraction
    value: Fraction
    power_j: int
    overflow: Optional[bool] = None
    poly: Optional[PowerPoly] = None


def _row_codes(row) -> tuple[list[CodeWord], int]:
    if isinstance(row, QuantizedTensor):
        return row.codes, row.power_j
    codes, power_j = row
    return list(codes), power_j


def accumulate(w_codes: Sequence[CodeWord], w_power: int,
               a_codes: Sequence[CodeWord], a_power: int) -> tuple[int, int]:
    """Exact dot product as ``(n, base)`` with value ``n * 2**base``."""
    if len(w_codes) != len(a_codes):
        raise ValidationError(f"length mismatch: {len(w_codes)} vs {len(a_codes)}")
    terms = []
    for wc, ac in zip(w_codes, a_codes):
        prod = multiply(PowerPoly.from_code(wc, w_power), PowerPoly.from_code(ac, a_power))
        terms.extend((prod.sign, e) for e in prod.exponents)
    if not terms:
        return 0, 0
    base = min(e for _, e in terms)
    return sum(s << (e - base) for s, e in terms), base


def dot_product(wq, aq, out_layout: BitLayout, mode: str = "exact",
                out_power_j: Optional[int] = None, acc_bits: Optional[int] = None,
                quant_mode: str = "floor") -> DotResult:
    """Shift-add dot product of two quantized rows.

    ``wq``/``aq`` are 1-D :class:`QuantizedTensor` rows or ``(codes, power_j)``
    pairs.  The sum is exact in both modes.  ``exact`` quantizes the exact sum
    under ``out_layout``; ``rounded`` compresses its power polynomial to the
    layout budget and encodes it directly.  Without ``out_power_j`` the output
    exponent is chosen so the leading term sits in the top basic code.
    ``acc_bits`` flags sums whose integer form needs more bits (sign included).
    """
    if mode not in ("exact", "rounded"):
        raise ValueError(f"mode must be 'exact' or 'rounded', got {mode!r}")
    w_codes, w_power = _row_codes(wq)
    a_codes, a_power = _row_codes(aq)
    n, base = accumulate(w_codes, w_power, a_codes, a_power)
    exact = Fraction(n) * Fraction(2) ** base
    overflow = None if acc_bits is None else abs(n).bit_length() + 1 > acc_bits

    if n == 0:
        pj = 0 if out_power_j is None else out_power_j
        return DotResult(zero_code(out_layout), exact, Fraction(0), pj, overflow, PowerPoly())

    if mode == "exact":
        pj = out_power_j
        if pj is None:
            pj = abs(n).bit_length() - 1 + base + 1
        code = quantize_value(_trunc_float(n, base), out_layout, pj, quant_mode)
        return DotResult(code, exact, PowerPoly.from_code(code, pj).value, pj, overflow, None)

    poly = compress(PowerPoly.from_scaled_int(n, base), RoundingBudget.for_layout(out_layout))
    pj = poly.exponents[-1] + 1 if out_power_j is None else out_power_j
    try:
        code = encode_poly(poly, out_layout, pj)
    except CodeError:
        # outside the output range: saturate / flush like the quantizer does
        code = quantize_value(float(poly.value), out_layout, pj, "floor")
    return DotResult(code, exact, PowerPoly.from_code(code, pj).value, pj, overflow, poly)


def matvec(wq: QuantizedTensor, aq: QuantizedTensor, out_layout: BitLayout,
           mode: str = "exact", acc_bits: Optional[int] = None,
           out_power_j: Optional[int] = None) -> list[DotResult]:
    """Row-wise :func:`dot_product` of a 2-D weight tensor with a 1-D activation."""
    if len(wq.shape) != 2 or wq.shape[1] != len(aq):
        raise ValidationError(f"cannot multiply shape {wq.shape} by {aq.shape}")
    rows = wq.shape[0]
    width = wq.shape[1]
    w_codes = wq.codes
    a_codes = aq.codes
    return [dot_product((w_codes[r * width:(r + 1) * width], wq.power_j),
                        (a_codes, aq.power_j), out_layout, mode, out_power_j, acc_bits)
            for r in range(rows)]
