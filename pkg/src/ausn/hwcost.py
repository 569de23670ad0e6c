"""Analytic hardware cost model: LUT counts, CCR and the roofline bound.

The LUT model is calibrated on a single 6-bit design point (6-input LUTs):
a shift-based multiply produces ``a + w`` result bits at 2 LUTs per bit, and
the exponent adder of AUSN works in 2-bit chunks of 4 LUTs each.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ValidationError

SCHEMES = ("shift_mult", "ausn_add")
LUTS_PER_PRODUCT_BIT = 2
LUTS_PER_ADDER_CHUNK = 4
ADDER_CHUNK_BITS = 2
DEFAULT_BYTES_PER_ELEM = 4.0


def lut_cost(scheme: str, a_bits: int, w_bits: int) -> int:
    for b in (a_bits, w_bits):
        if not 2 <= b <= 16:
            raise ValidationError(f"bit width {b} outside [2, 16]")
    if scheme == "shift_mult":
        return LUTS_PER_PRODUCT_BIT * (a_bits + w_bits)
    if scheme == "ausn_add":
        chunks = math.ceil(max(a_bits, w_bits) / ADDER_CHUNK_BITS)
        return LUTS_PER_ADDER_CHUNK * chunks
    raise ValidationError(f"unknown scheme {scheme!r}; expected one of {SCHEMES}")


def result_width(scheme: str, a_bits: int, w_bits: int) -> int:
    """Bit width of the per-product result (12 vs 7 bits at 6/6)."""
    if scheme == "shift_mult":
        return a_bits + w_bits
    return max(a_bits, w_bits) + 1


@dataclass(frozen=True)
class LayerDesc:
    ops: float
    weight_elems: float
    output_elems: float
    bytes_per_elem: float = DEFAULT_BYTES_PER_ELEM

    def __post_init__(self):
        if min(self.ops, self.weight_elems, self.output_elems, self.bytes_per_elem) < 0:
            raise ValidationError("layer fields must be non-negative")


@dataclass(frozen=True)
class RooflineConfig:
    bandwidth: float
    peak: float

    def __post_init__(self):
        if self.bandwidth <= 0 or self.peak <= 0:
            raise ValidationError("bandwidth and peak must be positive")

    @property
    def ridge(self) -> float:
        return self.peak / self.bandwidth


def ccr(layer: LayerDesc) -> float:
    """Operations per byte of external traffic (weights in, outputs out)."""
    traffic = layer.bytes_per_elem * (layer.weight_elems + layer.output_elems)
    if traffic <= 0:
        raise ValidationError("CCR is undefined without memory traffic")
    return layer.ops / traffic


def roofline_attainable(ccr_value: float, cfg: RooflineConfig) -> float:
    if ccr_value <= 0:
        raise ValidationError("CCR must be positive")
    return min(cfg.peak, ccr_value * cfg.bandwidth)


# 64x64 MAC array on ZCU104; A/B = A-bit inputs times B-bit weights.
# The 8/5 "need decoder" FF entry is an order of magnitude off its
# neighbours and is kept as published.
_FPGA_REFERENCE = (
    ("mult_acc", "8/8", 212388, 192293, 4.21),
    ("mult_acc", "8/5", 187262, 143142, 3.75),
    ("mult_acc", "8/4", 181248, 108729, 3.67),
    ("shift_add_decoder", "8/8", 225280, 86317, 4.51),
    ("shift_add_decoder", "8/5", 212942, 512731, 4.26),
    ("shift_add_decoder", "8/4", 203712, 45729, 4.07),
    ("ausn", "8/8", 133120, 54313, 2.65),
    ("ausn", "8/5", 112071, 45127, 2.24),
    ("ausn", "8/4", 108544, 44032, 2.17),
)
FPGA_REFERENCE_GAINS = {"lut": 2.0, "ff": 4.4, "energy": 1.9}
FPGA_REFERENCE_FLAGGED = {("shift_add_decoder", "8/5"): "ff value anomalous (likely typo)"}


def reference_table() -> list[dict]:
    """Published FPGA resource rows; reference data, never recomputed."""
    rows = []
    for scheme, bits, lut, ff, watts in _FPGA_REFERENCE:
        row = {"scheme": scheme, "bits": bits, "lut": lut, "ff": ff, "energy_w": watts}
        if (scheme, bits) in FPGA_REFERENCE_FLAGGED:
            row["flag"] = FPGA_REFERENCE_FLAGGED[(scheme, bits)]
        rows.append(row)
    return rows
