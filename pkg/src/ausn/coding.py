"""Decoder-free code layout: sign bit, basic field and subdivision tiers.

A code word stores *powers*, not values.  Field ``k_0`` selects the leading
power of two ``2**(shift - k_0)``; every subdivision field ``k_i`` selects a
multiplicative refinement ``2**-k_i``.  Code 0 in the basic field is the exact
zero, and code 0 in a subdivision field ends the superposition chain.

Bitstream order (per code word): sign bit (1 = negative), then ``k_0`` in
``b_basic`` bits MSB-first, then each ``k_i`` MSB-first.  Code words are
concatenated and the tensor is zero-padded to a byte boundary at the end.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import CodeError, LayoutError, PayloadError

MAX_TOTAL_BITS = 16
DEFAULT_MAX_TIERS = 3


@dataclass(frozen=True)
class BitLayout:
    total_bits: int
    b_basic: int
    tier_bits: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "tier_bits", tuple(int(b) for b in self.tier_bits))

    @property
    def n_tiers(self) -> int:
        return len(self.tier_bits)

    @property
    def b_sub(self) -> int:
        return sum(self.tier_bits)

    @property
    def field_widths(self) -> tuple[int, ...]:
        """Widths of the magnitude fields, basic part first."""
        return (self.b_basic,) + self.tier_bits

    def __str__(self):
        return f"{self.b_basic}:{','.join(map(str, self.tier_bits))}"

    def to_dict(self) -> dict:
        return {
            "total_bits": self.total_bits,
            "b_basic": self.b_basic,
            "tier_bits": list(self.tier_bits),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BitLayout":
        return make_layout(d["total_bits"], d["b_basic"], d.get("tier_bits", []))

    @classmethod
    def parse(cls, text: str, n_max: int = DEFAULT_MAX_TIERS) -> "BitLayout":
        """Parse ``"b_basic:t1,t2"`` (tiers optional), e.g. ``"3:2"`` or ``"4:"``."""
        basic, _, tiers = text.partition(":")
        try:
            b_basic = int(basic)
            tier_bits = [int(t) for t in tiers.split(",") if t.strip()]
        except ValueError:
            raise LayoutError(f"cannot parse layout {text!r}") from None
        return make_layout(1 + b_basic + sum(tier_bits), b_basic, tier_bits, n_max=n_max)


def make_layout(total_bits: int, b_basic: int, tier_bits: Iterable[int] = (),
                n_max: int = DEFAULT_MAX_TIERS) -> BitLayout:
    """Validate and build a :class:`BitLayout`.

    >>> make_layout(6, 3, [2])
    BitLayout(total_bits=6, b_basic=3, tier_bits=(2,))
    """
    tier_bits = tuple(int(b) for b in tier_bits)
    if b_basic < 1 or any(b < 1 for b in tier_bits):
        raise LayoutError(f"every field needs at least one bit: basic={b_basic}, tiers={tier_bits}")
    if len(tier_bits) > n_max:
        raise LayoutError(f"{len(tier_bits)} tiers exceeds the maximum of {n_max}")
    if 1 + b_basic + sum(tier_bits) != total_bits:
        raise LayoutError(
            f"1 + {b_basic} + {sum(tier_bits)} != total_bits={total_bits}")
    if total_bits > MAX_TOTAL_BITS:
        raise LayoutError(f"total_bits={total_bits} exceeds {MAX_TOTAL_BITS}")
    return BitLayout(int(total_bits), int(b_basic), tier_bits)


@dataclass(frozen=True)
class PowerBasis:
    tier: int
    values: tuple[float, ...]
    shift: int = 0

    def __len__(self):
        return len(self.values)

    @property
    def max(self) -> float:
        return self.values[1]

    @property
    def min_nonzero(self) -> float:
        return self.values[-1]


def basis(layout: BitLayout, tier: int, shift: int = 0) -> PowerBasis:
    """Power basis of one field: ``{0, 2**(shift-1), ..., 2**(shift - (2**bits - 1))}``.

    Index ``k`` of the returned values is the value selected by code ``k``.
    Only tier 0 carries the tensor scale exponent; subdivision tiers are
    always unshifted.
    """
    if not 0 <= tier <= layout.n_tiers:
        raise LayoutError(f"tier {tier} out of range for {layout.n_tiers} subdivision tiers")
    if tier > 0 and shift != 0:
        raise LayoutError("subdivision tiers are never shifted")
    width = layout.field_widths[tier]
    values = (0.0,) + tuple(float(np.ldexp(1.0, shift - k)) for k in range(1, 2 ** width))
    return PowerBasis(tier, values, shift)


@dataclass(frozen=True)
class CodeWord:
    sign: int
    k: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "k", tuple(int(v) for v in self.k))

    @property
    def is_zero(self) -> bool:
        return self.k[0] == 0

    @property
    def depth(self) -> int:
        """Number of active power terms (0 for the zero code)."""
        t = 0
        for v in self.k:
            if v == 0:
                break
            t += 1
        return t


ZERO_SIGN = 1


def zero_code(layout: BitLayout) -> CodeWord:
    return CodeWord(ZERO_SIGN, (0,) * (layout.n_tiers + 1))


def validate_code(code: CodeWord, layout: BitLayout) -> None:
    """Raise :class:`CodeError` unless ``code`` is canonical under ``layout``."""
    if code.sign not in (1, -1):
        raise CodeError(f"sign must be +1 or -1, got {code.sign}")
    if len(code.k) != layout.n_tiers + 1:
        raise CodeError(f"code has {len(code.k)} fields, layout expects {layout.n_tiers + 1}")
    for v, width in zip(code.k, layout.field_widths):
        if not 0 <= v < 2 ** width:
            raise CodeError(f"field value {v} does not fit in {width} bits")
    if code.k[0] == 0 and code.sign != ZERO_SIGN:
        raise CodeError("negative zero is not a canonical code")
    ended = False
    for v in code.k:
        if ended and v != 0:
            raise CodeError(f"code {code.k} continues after a terminating zero field")
        ended = ended or v == 0


def codes_to_arrays(codes: Sequence[CodeWord], layout: BitLayout) -> tuple[np.ndarray, np.ndarray]:
    """Convert code words to ``(signs int8[N], k uint16[N, n_tiers + 1])``."""
    n = len(codes)
    signs = np.empty(n, dtype=np.int8)
    k = np.empty((n, layout.n_tiers + 1), dtype=np.uint16)
    for i, c in enumerate(codes):
        validate_code(c, layout)
        signs[i] = c.sign
        k[i] = c.k
    return signs, k


def arrays_to_codes(signs: np.ndarray, k: np.ndarray) -> list[CodeWord]:
    return [CodeWord(int(s), tuple(int(v) for v in row)) for s, row in zip(signs, k)]


def check_arrays(signs: np.ndarray, k: np.ndarray, layout: BitLayout) -> None:
    """Vectorised form of :func:`validate_code` over a whole tensor."""
    if k.ndim != 2 or k.shape[1] != layout.n_tiers + 1 or signs.shape != k.shape[:1]:
        raise CodeError(f"code arrays {signs.shape}/{k.shape} do not match layout {layout}")
    if not np.isin(signs, (1, -1)).all():
        raise CodeError("signs must be +1 or -1")
    for i, width in enumerate(layout.field_widths):
        if (k[:, i].astype(np.int64) >= 2 ** width).any():
            raise CodeError(f"field {i} overflows {width} bits")
    zero = k[:, 0] == 0
    if (signs[zero] != ZERO_SIGN).any():
        raise CodeError("negative zero is not a canonical code")
    for i in range(1, k.shape[1]):
        if ((k[:, i] != 0) & (k[:, i - 1] == 0)).any():
            raise CodeError(f"field {i} is set after a terminating zero field")


def pack_arrays(signs: np.ndarray, k: np.ndarray, layout: BitLayout) -> bytes:
    signs = np.asarray(signs)
    k = np.asarray(k)
    check_arrays(signs, k, layout)
    columns = [(signs < 0).astype(np.uint8)[:, None]]
    for i, width in enumerate(layout.field_widths):
        shifts = np.arange(width - 1, -1, -1, dtype=np.uint16)
        columns.append(((k[:, i, None] >> shifts) & 1).astype(np.uint8))
    bits = np.hstack(columns).ravel()
    return np.packbits(bits).tobytes()


def unpack_arrays(data: bytes, count: int, layout: BitLayout) -> tuple[np.ndarray, np.ndarray]:
    needed = -(-count * layout.total_bits // 8)
    if len(data) < needed:
        raise PayloadError(f"payload has {len(data)} bytes, {needed} needed for {count} codes")
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8, count=needed))
    bits = bits[: count * layout.total_bits].reshape(count, layout.total_bits)
    signs = np.where(bits[:, 0] == 1, -1, 1).astype(np.int8)
    k = np.empty((count, layout.n_tiers + 1), dtype=np.uint16)
    pos = 1
    for i, width in enumerate(layout.field_widths):
        weights = (1 << np.arange(width - 1, -1, -1)).astype(np.uint16)
        k[:, i] = bits[:, pos:pos + width].astype(np.uint16) @ weights
        pos += width
    check_arrays(signs, k, layout)
    return signs, k


def pack(codes: Sequence[CodeWord], layout: BitLayout) -> bytes:
    """Serialise code words into the packed bitstream."""
    return pack_arrays(*codes_to_arrays(codes, layout), layout)


def unpack(data: bytes, count: int, layout: BitLayout) -> list[CodeWord]:
    """Inverse of :func:`pack`; trailing pad bits are ignored."""
    return arrays_to_codes(*unpack_arrays(data, count, layout))
