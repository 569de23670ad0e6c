"""Clipping and rounding error, and the bit-allocation search built on them.

Both errors weight the absolute quantization error by the weight magnitude:

* clipping  E_b = E[|w| * (|w| - R)  ; |w| > R]
* rounding  E_r = E[|w| * | |w| - |w_hat| |  ; |w| <= R]

where ``R`` is the largest representable magnitude.  :func:`empirical_errors`
takes the expectation over a concrete tensor; :func:`analytic_errors` takes it
over a standard normal truncated at ``clip_bound``, folded onto magnitudes
(density ``2 * phi``), so that both return comparable per-element means.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np

from .coding import DEFAULT_MAX_TIERS, BitLayout, make_layout
from .errors import DegenerateTensorError, ValidationError
from .quadrature import piecewise_simpson
from .quantizer import QuantizedTensor, _as_finite_array, quantize_tensor, scale_exponent

SCALE_OFFSETS = (-1, 0, 1)


@dataclass(frozen=True)
class ErrorPair:
    clipping: float
    rounding: float
    boundary: float
    clip_bound: float

    def objective(self, lam: float = 1.0) -> float:
        return self.clipping + lam * self.rounding

    def to_dict(self) -> dict:
        return {"clipping": self.clipping, "rounding": self.rounding,
                "boundary": self.boundary, "clip_bound": self.clip_bound}


@lru_cache(maxsize=256)
def _unit_magnitudes(b_basic: int, tier_bits: tuple[int, ...]) -> tuple[float, ...]:
    # brute force over every code word, at power_j = 0
    ranges = [range(2 ** b) for b in (b_basic,) + tier_bits]
    values = set()
    for k in itertools.product(*ranges):
        depth = next((i for i, v in enumerate(k) if v == 0), len(k))
        if any(k[depth:]):
            continue                          # not a canonical chain
        total, e = 0.0, 0
        for v in k[:depth]:
            e -= v
            total += math.ldexp(1.0, e)
        values.add(total)
    return tuple(sorted(values))


def representable_set(layout: BitLayout, power_j: int) -> np.ndarray:
    """Sorted distinct non-negative magnitudes reachable under ``layout``."""
    unit = np.array(_unit_magnitudes(layout.b_basic, layout.tier_bits))
    return np.ldexp(unit, power_j)


def clipping_rounding_errors(tensor, approx, boundary: float) -> ErrorPair:
    """Empirical E_b / E_r of ``approx`` against ``tensor`` for range ``[0, boundary]``."""
    w = np.abs(np.asarray(tensor, dtype=np.float64)).ravel()
    w_hat = np.abs(np.asarray(approx, dtype=np.float64)).ravel()
    if w.shape != w_hat.shape:
        raise ValidationError(f"shape mismatch: {w.shape} vs {w_hat.shape}")
    if w.size == 0:
        raise ValidationError("empty tensor")
    clipped = w > boundary
    n = w.size
    e_b = float(np.sum(w[clipped] * (w[clipped] - boundary)) / n)
    inside = ~clipped
    e_r = float(np.sum(w[inside] * np.abs(w[inside] - w_hat[inside])) / n)
    return ErrorPair(e_b, e_r, float(boundary), float(w.max()))


def empirical_errors(tensor, qt: QuantizedTensor) -> ErrorPair:
    arr = np.asarray(tensor, dtype=np.float64)
    if arr.size != len(qt):
        raise ValidationError(f"tensor has {arr.size} elements, quantized tensor {len(qt)}")
    boundary = float(representable_set(qt.layout, qt.power_j)[-1])
    return clipping_rounding_errors(arr, qt.magnitudes(), boundary)


def _phi(w):
    return np.exp(-0.5 * w * w) / math.sqrt(2.0 * math.pi)


def analytic_errors_for_points(points, clip_bound: float, rtol: float = 1e-6) -> ErrorPair:
    """E_b / E_r for an arbitrary quantized set (must contain its own maximum ``R``)."""
    if clip_bound <= 0:
        raise ValidationError("clip_bound must be positive")
    p = np.unique(np.asarray(points, dtype=np.float64))
    if p.size == 0 or p[-1] <= 0:
        raise ValidationError("quantized set needs a positive maximum")
    boundary = float(p[-1])
    if p[0] > 0:
        p = np.concatenate(([0.0], p))

    def clip_integrand(w):
        return 2.0 * w * (w - boundary) * _phi(w)

    e_b = 0.0
    if boundary < clip_bound:
        e_b = piecewise_simpson(clip_integrand, [boundary, clip_bound], rtol=rtol)

    # pieces [p_i, mid_i] use the lower neighbour, [mid_i, p_i+1] the upper one
    mids = 0.5 * (p[:-1] + p[1:])
    edges = np.empty(2 * p.size - 1)
    edges[0::2] = p
    edges[1::2] = mids
    anchors = np.repeat(p, 2)[1:-1]          # nearest level on each half-piece
    top = min(boundary, clip_bound)
    keep = edges[:-1] < top
    edges = np.minimum(edges[: keep.sum() + 1], top)
    anchors = anchors[: keep.sum()]

    def round_integrand(w):
        return 2.0 * w * np.abs(w - anchors[:, None]) * _phi(w)

    e_r = piecewise_simpson(round_integrand, edges, rtol=rtol)
    return ErrorPair(e_b, e_r, boundary, float(clip_bound))


def analytic_errors(layout: BitLayout, power_j: int, clip_bound: float,
                    rtol: float = 1e-6) -> ErrorPair:
    """Errors of ``layout`` for standard-normal weights truncated at ``clip_bound``.

    The rounding term uses the nearest representable value, so compare it
    with tensors quantized in ``nearest`` mode.  Real tensors should be
    divided by their standard deviation first.
    """
    return analytic_errors_for_points(representable_set(layout, power_j), clip_bound, rtol)


# ---------------------------------------------------------------------------
# Bit-allocation search
# ---------------------------------------------------------------------------

def _compositions(total: int, parts: int):
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(1, total - parts + 2):
        for rest in _compositions(total - first, parts - 1):
            yield (first,) + rest


def candidate_layouts(total_bits: int, n_max: int = DEFAULT_MAX_TIERS) -> list[BitLayout]:
    """Every (b_basic, tiers) split of the ``total_bits - 1`` data bits."""
    data = total_bits - 1
    out = []
    for n in range(0, n_max + 1):
        for b_basic in range(data - n, 0, -1):
            for tiers in _compositions(data - b_basic, n):
                out.append(make_layout(total_bits, b_basic, tiers, n_max=n_max))
    return out


@dataclass(frozen=True)
class Candidate:
    layout: BitLayout
    scale_offset: int
    errors: ErrorPair
    objective: float

    def sort_key(self):
        return (self.objective, self.layout.n_tiers, -self.layout.b_basic,
                abs(self.scale_offset), self.scale_offset,
                tuple(-b for b in self.layout.tier_bits))


@dataclass
class SearchResult:
    layout: BitLayout
    scale_offset: int
    errors: ErrorPair
    candidates_evaluated: int
    power_j: int
    objective: float
    lam: float = 1.0
    mode: str = "floor"
    candidates: list = field(default_factory=list, repr=False)

    def to_dict(self) -> dict:
        return {
            "layout": self.layout.to_dict(),
            "scale_offset": self.scale_offset,
            "power_j": self.power_j,
            "errors": self.errors.to_dict(),
            "objective": self.objective,
            "lambda": self.lam,
            "mode": self.mode,
            "candidates_evaluated": self.candidates_evaluated,
        }


def search_layout(tensor, total_bits: int, n_max: int = DEFAULT_MAX_TIERS,
                  lam: float = 1.0, mode: str = "floor") -> SearchResult:
    """Exhaustive search over bit splits and scale offsets for ``E_b + lam * E_r``.

    Ties go to fewer tiers, then a wider basic field, then the offset closest
    to zero.
    """
    if total_bits < 3:
        raise ValidationError("search needs at least 3 total bits")
    arr = _as_finite_array(tensor)
    try:
        base = scale_exponent(arr)
    except DegenerateTensorError:
        base = 0
    candidates = []
    for layout in candidate_layouts(total_bits, n_max):
        for delta in SCALE_OFFSETS:
            qt = quantize_tensor(arr, layout, mode, power_j=base + delta)
            errs = empirical_errors(arr, qt)
            candidates.append(Candidate(layout, delta, errs, errs.objective(lam)))
    best = min(candidates, key=Candidate.sort_key)
    return SearchResult(best.layout, best.scale_offset, best.errors, len(candidates),
                        base + best.scale_offset, best.objective, lam, mode, candidates)


def quantize_auto(tensor, total_bits: int, n_max: int = DEFAULT_MAX_TIERS,
                  lam: float = 1.0, mode: str = "floor") -> tuple[QuantizedTensor, SearchResult]:
    """Search a layout, then quantize ``tensor`` with it."""
    result = search_layout(tensor, total_bits, n_max, lam, mode)
    qt = quantize_tensor(tensor, result.layout, mode, power_j=result.power_j)
    return qt, result
