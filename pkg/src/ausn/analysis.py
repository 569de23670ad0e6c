"""Information loss and the baseline quantizers AUSN is compared against."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coding import make_layout
from .errors import ValidationError
from .quantizer import QuantizedTensor, _as_finite_array, quantize_tensor

KL_SMOOTHING = 1e-12
SQNR_EXACT = math.inf


@dataclass
class InfoLossReport:
    kl: float
    accuracy_loss: Optional[float] = None
    bins: list = field(default_factory=list, repr=False)
    smoothing: float = KL_SMOOTHING

    @property
    def total(self) -> float:
        return total_information_loss(self.kl, self.accuracy_loss)

    def to_dict(self, with_bins: bool = False) -> dict:
        d = {
            "kl": self.kl,
            "accuracy_loss": self.accuracy_loss,
            "total": self.total,
            "smoothing": self.smoothing,
            "bin_edges": "geometric midpoints between levels",
            "assigned_mass": "fraction of quantized magnitudes at each level",
        }
        if with_bins:
            d["bins"] = [{"level": y, "original": p, "quantized": q} for y, p, q in self.bins]
        return d


def kl_information_loss(tensor, qt: QuantizedTensor, accuracy_loss: Optional[float] = None,
                        eps: float = KL_SMOOTHING) -> InfoLossReport:
    """KL divergence between binned original magnitudes and quantized level masses.

    Original magnitudes are binned around each positive level ``y_i`` with
    edges at the geometric midpoints ``sqrt(y_i * y_(i+1))``; the first bin
    reaches down to 0 and the last one up to ``max|w|``.  Zero is a bin of
    its own holding exact zeros.  The quantized mass of a bin is the share of
    elements the quantizer actually put on that level, so floor assignment
    shows up as a divergence even where the bins line up.
    """
    return kl_from_values(tensor, qt.dequantize(), accuracy_loss, eps)


def kl_from_values(tensor, dequantized, accuracy_loss: Optional[float] = None,
                   eps: float = KL_SMOOTHING) -> InfoLossReport:
    """Same measure for any reconstruction, e.g. a uniform baseline."""
    w = np.abs(_as_finite_array(tensor)).ravel()
    y = np.abs(np.asarray(dequantized, dtype=np.float64)).ravel()
    if w.size != y.size:
        raise ValidationError(f"tensor has {w.size} elements, quantized tensor {y.size}")
    n = w.size
    levels = np.unique(y[y > 0])

    if levels.size == 0:
        orig = np.array([1.0])
        quant = np.array([1.0])
        grid = np.array([0.0])
    else:
        inner = np.sqrt(levels[:-1] * levels[1:])
        orig_pos = np.bincount(np.searchsorted(inner, w[w > 0], side="right"),
                               minlength=levels.size)
        quant_pos = np.bincount(np.searchsorted(levels, y[y > 0]), minlength=levels.size)
        orig = np.concatenate(([np.count_nonzero(w == 0)], orig_pos)) / n
        quant = np.concatenate(([np.count_nonzero(y == 0)], quant_pos)) / n
        grid = np.concatenate(([0.0], levels))
        keep = (orig > 0) | (quant > 0)
        orig, quant, grid = orig[keep], quant[keep], grid[keep]

    mass = orig > 0
    q = np.where(quant > 0, quant, eps)
    kl = float(np.sum(orig[mass] * np.log(orig[mass] / q[mass])))
    bins = [(float(a), float(b), float(c)) for a, b, c in zip(grid, orig, quant)]
    return InfoLossReport(max(kl, 0.0), accuracy_loss, bins, eps)


def total_information_loss(kl: float, accuracy_loss: Optional[float] = None) -> float:
    """KL complexity term plus an externally measured accuracy drop (in %)."""
    if kl < 0:
        raise ValidationError("KL divergence cannot be negative")
    return kl + (accuracy_loss or 0.0)


@dataclass
class UniformResult:
    q: np.ndarray
    scale: float
    bits: int
    qmin: int
    qmax: int
    shape: tuple

    def dequantize(self) -> np.ndarray:
        return (self.q * self.scale).reshape(self.shape)


def baseline_uniform(tensor, bits: int, scale: Optional[float] = None,
                     signed: bool = True) -> UniformResult:
    """Affine (zero-point free) integer quantization with round-to-nearest.

    The signed grid is ``[-(2**(bits-1) - 1), 2**(bits-1) - 1]`` with scale
    ``max|w| / qmax``; pass ``scale`` to pin the step and ``signed=False``
    for the ``[0, 2**bits - 1]`` grid.  Values off the grid are clipped.
    """
    if bits < 2:
        raise ValidationError("uniform baseline needs at least 2 bits")
    arr = _as_finite_array(tensor)
    if signed:
        qmin, qmax = -(2 ** (bits - 1) - 1), 2 ** (bits - 1) - 1
    else:
        qmin, qmax = 0, 2 ** bits - 1
    if scale is None:
        m = float(np.abs(arr).max())
        scale = m / qmax if m > 0 else 0.0
    if scale == 0.0:
        q = np.zeros(arr.size, dtype=np.int64)
    else:
        q = np.clip(np.rint(arr.ravel() / scale), qmin, qmax).astype(np.int64)
    return UniformResult(q, float(scale), bits, qmin, qmax, arr.shape)


def baseline_power_of_two(tensor, bits: int, mode: str = "floor") -> QuantizedTensor:
    """Single power-of-two per weight: an AUSN layout without subdivision tiers."""
    if bits < 2:
        raise ValidationError("power-of-two baseline needs at least 2 bits")
    return quantize_tensor(tensor, make_layout(bits, bits - 1, []), mode)


def sqnr(tensor, dequantized) -> float:
    """Signal-to-quantization-noise ratio in dB; ``inf`` for exact reconstruction."""
    w = np.asarray(tensor, dtype=np.float64).ravel()
    w_hat = np.asarray(dequantized, dtype=np.float64).ravel()
    if w.shape != w_hat.shape:
        raise ValidationError(f"shape mismatch: {w.shape} vs {w_hat.shape}")
    signal = float(np.sum(w * w))
    if signal == 0.0:
        raise ValidationError("SQNR is undefined for a zero signal")
    noise = float(np.sum((w - w_hat) ** 2))
    if noise == 0.0:
        return SQNR_EXACT
    return 10.0 * math.log10(signal / noise)
