"""Command line interface.

Exit codes: 0 success, 1 usage error, 2 data error.  Reports are JSON; if
``AUSN_REPORT_DIR`` is set, relative report paths are placed under it.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (SQNR_EXACT, baseline_power_of_two, baseline_uniform, kl_from_values,
                       kl_information_loss, sqnr)
from .coding import DEFAULT_MAX_TIERS, BitLayout
from .error_model import (clipping_rounding_errors, empirical_errors, quantize_auto,
                          search_layout)
from .errors import AusnError, LayoutError
from .formats import load_container, load_tensor, save_container, save_tensor
from .hwcost import LayerDesc, RooflineConfig, ccr, lut_cost, result_width, roofline_attainable
from .quantizer import MODES, QuantizedTensor, quantize_tensor
from .rounding import matvec
from .samples import synthetic

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2
REPORT_DIR_ENV = "AUSN_REPORT_DIR"
SCHEME_ALIASES = {"shift": "shift_mult", "ausn": "ausn_add"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _report_path(path: str) -> Path:
    p = Path(path)
    base = os.environ.get(REPORT_DIR_ENV)
    if base and not p.is_absolute():
        p = Path(base) / p
    p.parent.mkdir(parents=True, exist_ok=True)
    return p


def _emit(report: dict, path=None, quiet=False):
    text = json.dumps(report, indent=2, allow_nan=False)
    if path:
        _report_path(path).write_text(text + "\n")
    if not quiet:
        print(text)


def _sqnr_fields(w, w_hat) -> dict:
    try:
        value = sqnr(w, w_hat)
    except AusnError:
        return {"sqnr_db": None, "exact_reconstruction": bool(np.array_equal(w, w_hat))}
    if value == SQNR_EXACT:
        return {"sqnr_db": None, "exact_reconstruction": True}
    return {"sqnr_db": value, "exact_reconstruction": False}


def _write_hist(path, bins):
    with open(_report_path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["level", "original", "quantized"])
        writer.writerows(bins)


def _quality(w, w_hat, errors, kl_report) -> dict:
    return {"errors": errors.to_dict(), "kl": kl_report.kl, **_sqnr_fields(w, w_hat)}


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_quantize(args) -> int:
    layout = None
    if args.layout and not args.auto:
        layout = BitLayout.parse(args.layout, n_max=args.max_tiers)
        if args.bits is not None and layout.total_bits != args.bits:
            raise UsageError(f"--layout {args.layout} uses {layout.total_bits} bits, --bits says {args.bits}")
    elif args.bits is None:
        raise UsageError("--bits is required with --auto")
    tensor = load_tensor(args.input).array.astype(np.float64)
    search = None
    offset = 0
    if layout is not None:
        qt = quantize_tensor(tensor, layout, args.mode)
    else:
        qt, search = quantize_auto(tensor, args.bits, args.max_tiers, args.lam, args.mode)
        offset = search.scale_offset
    save_container(args.out, qt)
    errors = empirical_errors(tensor, qt)
    kl = kl_information_loss(tensor, qt)
    report = {
        "command": "quantize",
        "input": str(args.input),
        "output": str(args.out),
        "layout": qt.layout.to_dict(),
        "power_j": qt.power_j,
        "scale_offset": offset,
        "mode": qt.mode,
        "count": len(qt),
        "errors": errors.to_dict(),
        "objective": errors.objective(args.lam),
        "kl": kl.kl,
        **_sqnr_fields(tensor, qt.dequantize()),
        "range_matched": qt.range_matched,
        "search": search.to_dict() if search else None,
        "notes": ["rounding error is measured against the assigned value; "
                  "the analytic model uses the nearest representable value"],
    }
    if args.hist:
        _write_hist(args.hist, kl.bins)
    _emit(report, args.report, args.quiet)
    return EXIT_OK


def cmd_search(args) -> int:
    tensor = load_tensor(args.input).array.astype(np.float64)
    result = search_layout(tensor, args.bits, args.max_tiers, args.lam, args.mode)
    report = {"command": "search", **result.to_dict()}
    report["candidates"] = [
        {"layout": str(c.layout), "scale_offset": c.scale_offset, "objective": c.objective,
         "clipping": c.errors.clipping, "rounding": c.errors.rounding}
        for c in sorted(result.candidates, key=lambda c: c.sort_key())
    ]
    _emit(report, args.report, args.quiet)
    return EXIT_OK


def cmd_analyze(args) -> int:
    tensor = load_tensor(args.input).array.astype(np.float64)
    qt = load_container(args.quantized)
    if tensor.size != len(qt):
        raise AusnError(f"{args.input} has {tensor.size} elements, {args.quantized} has {len(qt)}")
    kl = kl_information_loss(tensor, qt, args.acc_loss)
    report = {
        "command": "analyze",
        "ausn": {**_quality(tensor, qt.dequantize(), empirical_errors(tensor, qt), kl),
                 "layout": qt.layout.to_dict(), "power_j": qt.power_j},
        "baselines": {},
        "accuracy_loss": args.acc_loss,
        "total_information_loss": kl.total,
        "information_loss": kl.to_dict(),
    }
    bits = qt.layout.total_bits
    for name in filter(None, (b.strip() for b in args.baselines.split(","))):
        if name == "uniform":
            res = baseline_uniform(tensor, bits)
            w_hat = res.dequantize()
            errs = clipping_rounding_errors(tensor, w_hat, res.qmax * res.scale)
            report["baselines"]["uniform"] = {
                **_quality(tensor, w_hat, errs, kl_from_values(tensor, w_hat)),
                "scale": res.scale}
        elif name == "pow2":
            base = baseline_power_of_two(tensor, bits)
            report["baselines"]["pow2"] = _quality(
                tensor, base.dequantize(), empirical_errors(tensor, base),
                kl_information_loss(tensor, base))
        else:
            raise UsageError(f"unknown baseline {name!r}; choose from uniform, pow2")
    if args.hist:
        _write_hist(args.hist, kl.bins)
    _emit(report, args.report, args.quiet)
    return EXIT_OK


def cmd_simulate(args) -> int:
    wq = load_container(args.weights)
    aq = load_container(args.activations)
    if len(wq.shape) == 1:
        wq.shape = (1, wq.shape[0])
    elif len(wq.shape) > 2:
        wq.shape = (wq.shape[0], int(np.prod(wq.shape[1:])))
    aq.shape = (len(aq),)
    out_layout = BitLayout.parse(args.out_layout)
    results = matvec(wq, aq, out_layout, args.mode, args.acc_bits)
    outputs = []
    worst = 0.0
    for r in results:
        outputs.append({
            "exact": str(r.exact),
            "exact_float": float(r.exact),
            "value": float(r.value),
            "power_j": r.power_j,
            "sign": r.code.sign,
            "k": list(r.code.k),
            "overflow": r.overflow,
        })
        worst = max(worst, float(abs(r.value - r.exact)))
    report = {
        "command": "simulate",
        "mode": args.mode,
        "out_layout": out_layout.to_dict(),
        "rows": len(outputs),
        "outputs": outputs,
        "max_abs_error": worst,
    }
    if args.out:
        # one container shares one power_j: size it for the largest output
        nonzero = [abs(r.exact) for r in results if r.exact != 0]
        common = _floor_log2(max(nonzero)) + 1 if nonzero else 0
        shared = matvec(wq, aq, out_layout, args.mode, args.acc_bits, out_power_j=common)
        out = QuantizedTensor.from_codes([r.code for r in shared], out_layout, common,
                                         shape=(len(shared),), mode="floor")
        save_container(args.out, out)
        report["output"] = str(args.out)
        report["output_power_j"] = common
    _emit(report, args.report, args.quiet)
    return EXIT_OK


def _floor_log2(q: Fraction) -> int:
    e = q.numerator.bit_length() - q.denominator.bit_length()
    return e if Fraction(2) ** e <= q else e - 1


def cmd_cost(args) -> int:
    scheme = SCHEME_ALIASES.get(args.scheme, args.scheme)
    luts = lut_cost(scheme, args.a_bits, args.w_bits)
    print(luts)
    if args.report:
        _emit({"command": "cost", "scheme": scheme, "a_bits": args.a_bits, "w_bits": args.w_bits,
               "luts": luts, "result_bits": result_width(scheme, args.a_bits, args.w_bits)},
              args.report, quiet=True)
    return EXIT_OK


def cmd_roofline(args) -> int:
    layer = LayerDesc(args.ops, args.weight_elems, args.output_elems, args.bytes_per_elem)
    cfg = RooflineConfig(args.bandwidth, args.peak)
    value = ccr(layer)
    attainable = roofline_attainable(value, cfg)
    report = {
        "command": "roofline",
        "ccr": value,
        "attainable": attainable,
        "bound": "compute" if value * cfg.bandwidth >= cfg.peak else "memory",
        "ridge": cfg.ridge,
    }
    _emit(report, args.report, args.quiet)
    return EXIT_OK


def cmd_generate(args) -> int:
    shape = tuple(int(s) for s in args.shape.split("x"))
    save_tensor(args.out, synthetic(args.dist, shape, args.seed, args.scale))
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="ausn", description="AUSN post-training quantization toolkit")
    parser.add_argument("--version", action="version", version=f"ausn {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common_report(p):
        p.add_argument("--report", help="write the JSON report here")
        p.add_argument("--quiet", action="store_true", help="do not echo the report")

    p = sub.add_parser("quantize", help="quantize a tensor file into an AUSN container")
    p.add_argument("--input", required=True)
    p.add_argument("--bits", type=int)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--layout", help="explicit split 'b_basic:t1,t2'")
    group.add_argument("--auto", action="store_true", help="search the split (default)")
    p.add_argument("--mode", choices=MODES, default="floor")
    p.add_argument("--max-tiers", type=int, default=DEFAULT_MAX_TIERS)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.add_argument("--hist", help="CSV histogram of level masses")
    common_report(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("search", help="rank bit allocations for a tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--bits", type=int, required=True)
    p.add_argument("--max-tiers", type=int, default=DEFAULT_MAX_TIERS)
    p.add_argument("--lambda", dest="lam", type=float, default=1.0)
    p.add_argument("--mode", choices=MODES, default="floor")
    common_report(p)
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("analyze", help="errors, KL and SQNR of a quantized tensor")
    p.add_argument("--input", required=True)
    p.add_argument("--quantized", required=True)
    p.add_argument("--baselines", default="")
    p.add_argument("--acc-loss", type=float)
    p.add_argument("--hist")
    common_report(p)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", help="shift-add matrix-vector product of two containers")
    p.add_argument("--weights", required=True)
    p.add_argument("--activations", required=True)
    p.add_argument("--mode", choices=("exact", "rounded"), default="exact")
    p.add_argument("--out-layout", required=True)
    p.add_argument("--acc-bits", type=int)
    p.add_argument("--out", help="write the outputs as an AUSN container")
    common_report(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("cost", help="LUT cost of one multiply")
    p.add_argument("--scheme", required=True, choices=sorted(SCHEME_ALIASES) + list(SCHEME_ALIASES.values()))
    p.add_argument("--a-bits", type=int, required=True)
    p.add_argument("--w-bits", type=int, required=True)
    p.add_argument("--report")
    p.set_defaults(func=cmd_cost)

    p = sub.add_parser("roofline", help="CCR and attainable performance of a layer")
    p.add_argument("--ops", type=float, required=True)
    p.add_argument("--weight-elems", type=float, required=True)
    p.add_argument("--output-elems", type=float, required=True)
    p.add_argument("--bytes-per-elem", type=float, default=4.0)
    p.add_argument("--bandwidth", type=float, required=True)
    p.add_argument("--peak", type=float, required=True)
    common_report(p)
    p.set_defaults(func=cmd_roofline)

    p = sub.add_parser("generate", help="write a synthetic tensor (deterministic per seed)")
    p.add_argument("--out", required=True)
    p.add_argument("--shape", default="4096")
    p.add_argument("--dist", choices=("normal", "relu", "laplace"), default="normal")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_generate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:          # --help / --version
        return exc.code if isinstance(exc.code, int) else EXIT_OK
    except LayoutError as exc:
        print(f"ausn: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AusnError, OSError, ValueError) as exc:
        print(f"ausn: error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
