"""AUSN: post-training quantization by adaptive superposition of powers of two."""

__version__ = "0.1.0"

from .coding import BitLayout, CodeWord, PowerBasis, basis, make_layout, pack, unpack
from .quantizer import (QuantizedTensor, dequantize_tensor, preconvert, quantize_tensor,
                        quantize_value, reconstruct, scale_exponent)
from .error_model import (ErrorPair, SearchResult, analytic_errors, empirical_errors,
                          quantize_auto, representable_set, search_layout)
from .rounding import (PowerPoly, RoundingBudget, canonicalize, compress, dot_product,
                       merge_run, multiply)
from .analysis import (baseline_power_of_two, baseline_uniform, kl_information_loss, sqnr,
                       total_information_loss)
from .hwcost import LayerDesc, RooflineConfig, ccr, lut_cost, reference_table, roofline_attainable
from .formats import load_container, load_tensor, save_container, save_tensor
