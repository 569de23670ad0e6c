"""JSON Schemas for the reports the CLI writes."""

_NUM = {"type": "number"}
_NUM_OR_NULL = {"type": ["number", "null"]}

LAYOUT = {
    "type": "object",
    "required": ["total_bits", "b_basic", "tier_bits"],
    "properties": {
        "total_bits": {"type": "integer", "minimum": 2, "maximum": 16},
        "b_basic": {"type": "integer", "minimum": 1},
        "tier_bits": {"type": "array", "items": {"type": "integer", "minimum": 1}},
    },
}

ERRORS = {
    "type": "object",
    "required": ["clipping", "rounding", "boundary", "clip_bound"],
    "properties": {
        "clipping": {"type": "number", "minimum": 0},
        "rounding": {"type": "number", "minimum": 0},
        "boundary": _NUM,
        "clip_bound": _NUM,
    },
}

_QUALITY = {
    "type": "object",
    "required": ["errors", "kl", "sqnr_db", "exact_reconstruction"],
    "properties": {
        "errors": ERRORS,
        "kl": {"type": "number", "minimum": 0},
        "sqnr_db": _NUM_OR_NULL,
        "exact_reconstruction": {"type": "boolean"},
    },
}

QUANTIZE = {
    "type": "object",
    "required": ["command", "layout", "power_j", "mode", "count", "errors", "kl", "sqnr_db",
                 "range_matched", "search"],
    "properties": {
        "command": {"const": "quantize"},
        "layout": LAYOUT,
        "power_j": {"type": "integer"},
        "scale_offset": {"type": "integer"},
        "mode": {"enum": ["floor", "nearest"]},
        "count": {"type": "integer", "minimum": 1},
        "errors": ERRORS,
        "kl": {"type": "number", "minimum": 0},
        "sqnr_db": _NUM_OR_NULL,
        "range_matched": {"type": ["boolean", "null"]},
        "search": {"type": ["object", "null"]},
    },
}

SEARCH = {
    "type": "object",
    "required": ["command", "layout", "scale_offset", "power_j", "errors", "objective",
                 "candidates_evaluated", "candidates"],
    "properties": {
        "command": {"const": "search"},
        "layout": LAYOUT,
        "scale_offset": {"enum": [-1, 0, 1]},
        "power_j": {"type": "integer"},
        "errors": ERRORS,
        "objective": _NUM,
        "candidates_evaluated": {"type": "integer", "minimum": 1},
        "candidates": {"type": "array", "minItems": 1},
    },
}

ANALYZE = {
    "type": "object",
    "required": ["command", "ausn", "baselines"],
    "properties": {
        "command": {"const": "analyze"},
        "ausn": _QUALITY,
        "baselines": {"type": "object", "additionalProperties": _QUALITY},
        "accuracy_loss": _NUM_OR_NULL,
        "total_information_loss": _NUM,
    },
}

SIMULATE = {
    "type": "object",
    "required": ["command", "mode", "out_layout", "outputs", "max_abs_error"],
    "properties": {
        "command": {"const": "simulate"},
        "mode": {"enum": ["exact", "rounded"]},
        "out_layout": LAYOUT,
        "max_abs_error": _NUM,
        "outputs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["exact", "exact_float", "value", "power_j", "sign", "k"],
            },
        },
    },
}

COST = {
    "type": "object",
    "required": ["command", "scheme", "a_bits", "w_bits", "luts", "result_bits"],
    "properties": {"command": {"const": "cost"}, "luts": {"type": "integer", "minimum": 1}},
}

ROOFLINE = {
    "type": "object",
    "required": ["command", "ccr", "attainable", "bound", "ridge"],
    "properties": {
        "command": {"const": "roofline"},
        "ccr": _NUM,
        "attainable": _NUM,
        "bound": {"enum": ["memory", "compute"]},
        "ridge": _NUM,
    },
}

BY_COMMAND = {
    "quantize": QUANTIZE,
    "search": SEARCH,
    "analyze": ANALYZE,
    "simulate": SIMULATE,
    "cost": COST,
    "roofline": ROOFLINE,
}
