"""Superposition quantization of real tensors onto AUSN codes.

The magnitude ``|w|`` is approximated greedily, one tier at a time: tier 0
picks the largest ``2**(power_j - k_0) <= |w|``, and each subdivision tier
picks the largest ``2**-k_i`` not above the relative remainder
``rem = rem / v - 1``.  Reconstruction is the nested product-sum::

    |w| ~= v_0 * (1 + v_1 * (1 + v_2 * (...)))

All remainders are produced by power-of-two scaling and a subtraction of 1
from a value in ``[1, 2)``, both exact in binary floating point, so the
greedy walk never suffers from rounding drift.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .coding import (BitLayout, CodeWord, PowerBasis, ZERO_SIGN, arrays_to_codes,
                     basis, check_arrays, codes_to_arrays)
from .errors import CodeError, DegenerateTensorError, ValidationError

MODES = ("floor", "nearest")


def _as_finite_array(tensor) -> np.ndarray:
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.size == 0:
        raise ValidationError("tensor is empty")
    if not np.isfinite(arr).all():
        raise ValidationError("tensor contains NaN or infinite values")
    return arr


def _ceil_log2(m: float) -> int:
    # frexp is exact, so powers of two are not nudged over by log2 rounding
    frac, exp = math.frexp(m)
    return exp - 1 if frac == 0.5 else exp


def scale_exponent(tensor) -> int:
    """Return ``ceil(log2(max|w|))``, the exponent that PreConvert shifts by.

    Raises :class:`DegenerateTensorError` for an all-zero tensor.
    """
    arr = _as_finite_array(tensor)
    m = float(np.max(np.abs(arr)))
    if m == 0.0:
        raise DegenerateTensorError("all-zero tensor has no scale exponent")
    return _ceil_log2(m)


def preconvert(pow_basis: PowerBasis, power_j: int) -> PowerBasis:
    """Shift an unshifted tier-0 basis by ``power_j`` (multiply by ``2**power_j``)."""
    if pow_basis.tier != 0 or pow_basis.shift != 0:
        raise ValueError("preconvert expects the unshifted tier-0 basis")
    values = (0.0,) + tuple(float(np.ldexp(v, power_j)) for v in pow_basis.values[1:])
    return PowerBasis(0, values, power_j)


def range_matches(pow_pre: PowerBasis, max_abs: float) -> bool:
    """``max(Pow_pre) <= max|W| <= 2 * max(Pow_pre)``."""
    top = pow_pre.max
    return top <= max_abs <= 2 * top


def _check_mode(mode: str) -> None:
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")


def _floor_fields(x: float, layout: BitLayout, power_j: int) -> list[int]:
    """Greedy magnitude fields for ``x >= 0`` (floor semantics, clipped at the top)."""
    k = [0] * (layout.n_tiers + 1)
    if x == 0.0:
        return k
    lead = math.frexp(x)[1] - 1             # largest 2**lead <= x
    if lead >= power_j:
        # x >= 2 * max(basis): saturate every field at its largest value
        return [1] * len(k)
    k0 = power_j - lead
    if k0 > 2 ** layout.b_basic - 1:
        return k
    k[0] = k0
    rem = math.ldexp(x, k0 - power_j) - 1.0
    for i, width in enumerate(layout.tier_bits, start=1):
        if rem <= 0.0:
            break
        ki = 1 - math.frexp(rem)[1]          # rem in (0, 1) here, so ki >= 1
        if ki > 2 ** width - 1:
            break
        k[i] = ki
        rem = math.ldexp(rem, ki) - 1.0
    return k


def _successor_fields(k: Sequence[int], layout: BitLayout) -> Optional[list[int]]:
    """Fields of the next representable magnitude above ``k``, or None at the top."""
    k = list(k)
    depth = next((i for i, v in enumerate(k) if v == 0), len(k))
    if depth < len(k):
        k[depth] = 2 ** layout.field_widths[depth] - 1
        return k
    for i in range(len(k) - 1, -1, -1):
        if k[i] > 1:
            k[i] -= 1
            k[i + 1:] = [0] * (len(k) - i - 1)
            return k
    return None


def _magnitude(k: Sequence[int], power_j: int) -> float:
    terms = []
    e = power_j
    for v in k:
        if v == 0:
            break
        e -= v
        terms.append(math.ldexp(1.0, e))
    return math.fsum(terms)


def quantize_value(w: float, layout: BitLayout, power_j: int, mode: str = "floor") -> CodeWord:
    """Quantize one real number (reference scalar path)."""
    _check_mode(mode)
    w = float(w)
    if not math.isfinite(w):
        raise ValidationError(f"cannot quantize non-finite value {w}")
    x = abs(w)
    k = _floor_fields(x, layout, power_j)
    if mode == "nearest":
        up = _successor_fields(k, layout)
        if up is not None and _magnitude(up, power_j) - x < x - _magnitude(k, power_j):
            k = up
    sign = -1 if (w < 0 and k[0] != 0) else ZERO_SIGN
    return CodeWord(sign, tuple(k))


def code_exponents(code: CodeWord, power_j: int) -> list[int]:
    """Exponents of the power terms a code denotes, largest first."""
    out = []
    e = power_j
    for v in code.k:
        if v == 0:
            break
        e -= v
        out.append(e)
    return out


def reconstruct(code: CodeWord, layout: BitLayout, power_j: int) -> float:
    if len(code.k) != layout.n_tiers + 1:
        raise CodeError(f"code has {len(code.k)} fields, layout expects {layout.n_tiers + 1}")
    return code.sign * _magnitude(code.k, power_j)


# ---------------------------------------------------------------------------
# Whole tensors
# ---------------------------------------------------------------------------

def floor_fields_array(x: np.ndarray, layout: BitLayout, power_j: int) -> np.ndarray:
    """Vectorised :func:`_floor_fields` over a flat array of magnitudes."""
    n = x.shape[0]
    k = np.zeros((n, layout.n_tiers + 1), dtype=np.uint16)
    lead = np.frexp(x)[1].astype(np.int64) - 1
    nonzero = x > 0
    saturated = nonzero & (lead >= power_j)
    k0 = power_j - lead
    active = nonzero & ~saturated & (k0 <= 2 ** layout.b_basic - 1)
    k[:, 0] = np.where(active, k0, 0)
    rem = np.where(active, np.ldexp(x, np.where(active, k0 - power_j, 0)) - 1.0, 0.0)
    for i, width in enumerate(layout.tier_bits, start=1):
        active &= rem > 0
        ki = 1 - np.frexp(rem)[1].astype(np.int64)
        active &= ki <= 2 ** width - 1
        k[:, i] = np.where(active, ki, 0)
        rem = np.where(active, np.ldexp(rem, np.where(active, ki, 0)) - 1.0, 0.0)
    k[saturated] = 1
    return k


def successor_fields_array(k: np.ndarray, layout: BitLayout) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised :func:`_successor_fields`; returns ``(fields, has_successor)``."""
    n, width = k.shape
    out = k.copy()
    zero = k == 0
    depth = np.where(zero.any(axis=1), zero.argmax(axis=1), width)
    maxes = np.array([2 ** b - 1 for b in layout.field_widths], dtype=np.uint16)
    rows = np.arange(n)
    shallow = depth < width
    out[rows[shallow], depth[shallow]] = maxes[depth[shallow]]
    # full chains: decrement the deepest field above 1 and clear the tail
    gt1 = k > 1
    has_gt1 = gt1.any(axis=1)
    last = width - 1 - gt1[:, ::-1].argmax(axis=1)
    full = ~shallow & has_gt1
    cols = np.arange(width)
    out[full] = np.where(cols[None, :] > last[full, None], 0, out[full])
    out[rows[full], last[full]] -= 1
    return out, shallow | has_gt1


def magnitudes_array(k: np.ndarray, power_j: int) -> np.ndarray:
    exps = power_j - np.cumsum(k.astype(np.int64), axis=1)
    alive = np.cumprod(k != 0, axis=1).astype(bool)
    terms = np.where(alive, np.ldexp(1.0, np.where(alive, exps, 0)), 0.0)
    # smallest terms first keeps the float sum as tight as possible
    return terms[:, ::-1].sum(axis=1)


@dataclass
class QuantizedTensor:
    layout: BitLayout
    power_j: int
    shape: tuple[int, ...]
    signs: np.ndarray
    k: np.ndarray
    mode: str = "floor"
    origin_stats: Optional[dict] = field(default=None)

    def __post_init__(self):
        self.shape = tuple(int(s) for s in self.shape)
        self.signs = np.asarray(self.signs, dtype=np.int8)
        self.k = np.asarray(self.k, dtype=np.uint16)
        if self.signs.shape[0] != int(np.prod(self.shape, dtype=np.int64)):
            raise CodeError(f"{self.signs.shape[0]} codes for shape {self.shape}")
        check_arrays(self.signs, self.k, self.layout)

    def __len__(self):
        return self.signs.shape[0]

    @property
    def codes(self) -> list[CodeWord]:
        return arrays_to_codes(self.signs, self.k)

    @classmethod
    def from_codes(cls, codes: Sequence[CodeWord], layout: BitLayout, power_j: int,
                   shape=None, **kwargs) -> "QuantizedTensor":
        signs, k = codes_to_arrays(codes, layout)
        return cls(layout, power_j, shape if shape is not None else (len(codes),), signs, k, **kwargs)

    @property
    def range_matched(self) -> Optional[bool]:
        """Whether the PreConvert range brackets the source tensor's max magnitude."""
        if not self.origin_stats:
            return None
        pre = preconvert(basis(self.layout, 0), self.power_j)
        return range_matches(pre, self.origin_stats["absmax"])

    def magnitudes(self) -> np.ndarray:
        return magnitudes_array(self.k, self.power_j)

    def dequantize(self) -> np.ndarray:
        return (self.signs * self.magnitudes()).reshape(self.shape)

    def __eq__(self, other):
        if not isinstance(other, QuantizedTensor):
            return NotImplemented
        return (self.layout == other.layout and self.power_j == other.power_j
                and self.shape == other.shape and self.mode == other.mode
                and np.array_equal(self.signs, other.signs) and np.array_equal(self.k, other.k))


def tensor_stats(arr: np.ndarray) -> dict:
    return {
        "count": int(arr.size),
        "min": float(arr.min()),
        "max": float(arr.max()),
        "absmax": float(np.abs(arr).max()),
        "std": float(arr.std()),
    }


def quantize_tensor(tensor, layout: BitLayout, mode: str = "floor",
                    power_j: Optional[int] = None) -> QuantizedTensor:
    """Quantize every element of ``tensor`` independently.

    ``power_j`` defaults to :func:`scale_exponent`; an all-zero tensor gets
    ``power_j = 0`` and all-zero codes.
    """
    _check_mode(mode)
    arr = _as_finite_array(tensor)
    if power_j is None:
        try:
            power_j = scale_exponent(arr)
        except DegenerateTensorError:
            power_j = 0
    flat = arr.ravel()
    x = np.abs(flat)
    k = floor_fields_array(x, layout, power_j)
    if mode == "nearest":
        up, has_up = successor_fields_array(k, layout)
        down_err = x - magnitudes_array(k, power_j)
        up_err = magnitudes_array(up, power_j) - x
        take = has_up & (up_err < down_err)
        k[take] = up[take]
    signs = np.where((flat < 0) & (k[:, 0] != 0), -1, 1).astype(np.int8)
    return QuantizedTensor(layout, int(power_j), arr.shape, signs, k, mode, tensor_stats(arr))


def dequantize_tensor(qt: QuantizedTensor) -> np.ndarray:
    return qt.dequantize()
