"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 validation failure (bad input or a
failed self-test), 3 runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .channels import read_channel_csv
from .codec import channel_llr, encode, sc_decode, union_bound
from .construct import CodeSpec, cached_eta, construct_code, reselect
from .extremal import c_rho, compute_constants
from .polarize import run_det_polar2
from .quantize import DEFAULT_C, DEFAULT_LAMBDA, build_grid
from .sim import resolve_threads, run_monte_carlo
from .speed import DEFAULT_B, estimate_eta, speed_trace

CSV_SCHEMA = "nspolar-csv-1"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _header(config: dict) -> str:
    return f"# {CSV_SCHEMA} nspolar {__version__} config={json.dumps(config, sort_keys=True)}\n"


def _write_csv(path, config, header, rows):
    buf = io.StringIO()
    buf.write(_header(config))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    text = buf.getvalue()
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _emit_json(obj, path=None):
    text = json.dumps(obj, indent=2, default=_json_default) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o).__name__)


def read_hex_bits(path, width: int) -> np.ndarray:
    """One word per line: ``width`` bits packed most-significant-bit first, hex encoded."""
    words = []
    for k, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            raw = np.frombuffer(bytes.fromhex(line), dtype=np.uint8)
        except ValueError:
            raise ValueError(f"{path}:{k}: not a hex string") from None
        if len(raw) != -(-width // 8):
            raise ValueError(f"{path}:{k}: expected {-(-width // 8)} bytes for {width} bits, got {len(raw)}")
        bits = np.unpackbits(raw)
        if bits[width:].any():
            raise ValueError(f"{path}:{k}: padding bits must be zero")
        words.append(bits[:width])
    return np.array(words, dtype=np.uint8).reshape(len(words), width)


def write_hex_bits(path, bits, comment: str | None = None) -> None:
    bits = np.atleast_2d(np.asarray(bits, dtype=np.uint8))
    lines = [f"# {comment}"] if comment else []
    lines += [np.packbits(row).tobytes().hex() for row in bits]
    text = "\n".join(lines) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _config(args) -> dict:
    return {k: v for k, v in vars(args).items() if k != "func"}


def cmd_eta_estimate(args):
    cfg = _config(args)
    rows, summary = [], []
    for b in args.b:
        est = estimate_eta(b, args.resolution, c=args.c, lam=args.lam)
        rows += [(b, f"{z:.10g}", f"{h:.12g}") for z, h in zip(est.z, est.h)] if len(args.b) > 1 else \
            [(f"{z:.10g}", f"{h:.12g}") for z, h in zip(est.z, est.h)]
        summary.append((b, f"{est.eta:.10g}", f"{float(est.sup_z):.10g}"))
    header = ["b", "z", "h(z)"] if len(args.b) > 1 else ["z", "h(z)"]
    _write_csv(args.out, cfg, header, rows)
    _write_csv(args.summary, cfg, ["b", "eta", "sup_z"], summary)
    return 0


def cmd_speed_trace(args):
    cfg = _config(args)
    chans = read_channel_csv(args.channels)
    n = int(np.log2(len(chans)))
    grid = build_grid(len(chans), args.tau, args.c, args.lam)
    run = run_det_polar2(chans, grid, args.b)
    levels, bar = speed_trace(run.energy)
    eta = cached_eta(args.b) if args.eta is None else args.eta
    crho = c_rho(args.rho, eta, args.b, args.c)[0]
    rows = [(0, f"{run.energy[0]:.12g}", "")]
    rows += [(j, f"{run.energy[j]:.12g}", f"{levels[j - 1] + 0.0:.12g}") for j in range(1, n + 1)]
    _write_csv(args.out, cfg, ["level", "E", "eta_level"], rows)
    ok = bar > args.rho - crho / n
    _write_csv(args.summary, cfg, ["eta_bar", "rho", "c_rho", "bound_satisfied"],
               [(f"{bar:.10g}", args.rho, f"{crho:.10g}", str(ok).lower())])
    return 0


def cmd_constants(args):
    eta = cached_eta(args.b) if args.eta is None else args.eta
    rep = compute_constants(args.mu, args.pe, args.b, eta, args.n, args.t)
    _emit_json({"version": __version__, "config": _config(args), "constants": rep.to_dict()}, args.out)
    return 0


def cmd_construct(args):
    chans = read_channel_csv(args.channels)
    con = construct_code(chans, Pe=args.pe, mu=args.mu, b=args.b, eta=args.eta, t=args.t)
    spec = con.spec
    if args.n_info is not None:
        spec = reselect(spec, args.n_info)
    spec.provenance.update(config=_config(args), library_version=__version__)
    spec.save(args.out)
    report = dict(con.report(), K=spec.K, rate=spec.rate, union_bound=union_bound(spec))
    _emit_json({"version": __version__, "config": _config(args), "report": report})
    return 0


def cmd_encode(args):
    spec = CodeSpec.load(args.code)
    info = read_hex_bits(args.input, spec.K)
    write_hex_bits(args.out, encode(spec, info), f"nspolar {__version__} codewords N={spec.N}")
    return 0


def cmd_decode(args):
    spec = CodeSpec.load(args.code)
    chans = read_channel_csv(args.channels)
    if len(chans) != spec.N:
        raise ValueError(f"{len(chans)} channels for a length-{spec.N} code")
    rx = read_hex_bits(args.input, spec.N)
    erased = read_hex_bits(args.erasures, spec.N).astype(bool) if args.erasures else None
    if erased is not None and erased.shape != rx.shape:
        raise ValueError("erasure file must have one mask per received word")
    llr = channel_llr(chans, rx, erased)
    write_hex_bits(args.out, sc_decode(spec, llr, min_sum=args.min_sum), f"nspolar {__version__} K={spec.K}")
    return 0


def cmd_simulate(args):
    spec = CodeSpec.load(args.code)
    chans = read_channel_csv(args.channels)
    res = run_monte_carlo(spec, chans, args.trials, seed=args.seed, threads=resolve_threads(args.threads),
                          min_sum=args.min_sum)
    row = res.row()
    cols = ["trials", "errors", "fer", "ci_lo", "ci_hi", "rate", "union_bound"]
    _write_csv(args.out, _config(args), cols, [[row[c] for c in cols]])
    return 0


def cmd_selftest(args):
    from .checks import ALL_CHECKS, run_all

    names = args.only or [k for k in ALL_CHECKS]
    unknown = [k for k in names if k not in ALL_CHECKS]
    if unknown:
        raise UsageError(f"unknown check(s) {unknown}; choose from {list(ALL_CHECKS)}")
    print(f"# nspolar {__version__} selftest ({'full' if args.full else 'quick'})")
    failed = 0
    for res in run_all(names, quick=not args.full):
        print(res.line(), flush=True)
        failed += not res.passed
    print(f"# {len(names) - failed}/{len(names)} passed")
    return 2 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="nspolar", description="Polar codes for non-stationary binary channels.")
    p.add_argument("--version", action="version", version=f"nspolar {__version__}")
    shared = _Parser(add_help=False)
    shared.add_argument("--threads", type=int, default=0,
                        help="worker threads, 0 = auto (NSPOLAR_THREADS overrides)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    add = partial(sub.add_parser, parents=[shared])

    def common(sp, b=True):
        if b:
            sp.add_argument("--b", type=float, default=DEFAULT_B, help="energy exponent (default 0.72)")
        sp.add_argument("--c", type=float, default=DEFAULT_C, help="grid edge width c (default 0.1)")
        sp.add_argument("--lam", type=float, default=DEFAULT_LAMBDA, help="grid cell width (default 0.1)")

    sp = add("eta-estimate", help="estimate the polarization speed eta")
    sp.add_argument("--b", type=float, nargs="+", default=[DEFAULT_B], help="one or more exponents to sweep")
    sp.add_argument("--resolution", type=float, default=1e-5)
    common(sp, b=False)
    sp.add_argument("--out", help="h(z) profile CSV (default: stdout)")
    sp.add_argument("--summary", help="summary CSV (default: stdout)")
    sp.set_defaults(func=cmd_eta_estimate)

    sp = add("speed-trace", help="energy and speed per level for a channel sequence")
    sp.add_argument("--channels", required=True)
    sp.add_argument("--tau", type=float, default=0.12 / DEFAULT_B)
    sp.add_argument("--rho", type=float, default=0.12)
    sp.add_argument("--eta", type=float, default=None)
    common(sp)
    sp.add_argument("--out")
    sp.add_argument("--summary")
    sp.set_defaults(func=cmd_speed_trace)

    sp = add("constants", help="construction constants as JSON")
    sp.add_argument("--mu", type=float, default=10.79)
    sp.add_argument("--pe", type=float, default=0.01)
    sp.add_argument("--n", type=int, required=True)
    sp.add_argument("--b", type=float, default=DEFAULT_B)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--t", type=float, default=0.49)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_constants)

    sp = add("construct", help="build a code for a channel sequence")
    sp.add_argument("--channels", required=True)
    sp.add_argument("--pe", type=float, default=0.01)
    sp.add_argument("--mu", type=float, default=10.79)
    sp.add_argument("--b", type=float, default=DEFAULT_B)
    sp.add_argument("--eta", type=float, default=None)
    sp.add_argument("--t", type=float, default=0.49)
    sp.add_argument("--n-info", type=int, default=None,
                    help="use the K best certified positions instead of the Pe/N rule")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_construct)

    sp = add("encode", help="encode hex information words")
    sp.add_argument("--code", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_encode)

    sp = add("decode", help="SC-decode hex received words")
    sp.add_argument("--code", required=True)
    sp.add_argument("--channels", required=True)
    sp.add_argument("--in", dest="input", required=True)
    sp.add_argument("--erasures", help="hex masks flagging BEC erasures")
    sp.add_argument("--min-sum", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_decode)

    sp = add("simulate", help="Monte Carlo block error rate")
    sp.add_argument("--code", required=True)
    sp.add_argument("--channels", required=True)
    sp.add_argument("--trials", type=int, default=4000)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--min-sum", action="store_true")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_simulate)

    sp = add("selftest", help="run the randomized property suites")
    sp.add_argument("--full", action="store_true", help="full-size instances")
    sp.add_argument("--only", nargs="+", help="subset of checks")
    sp.set_defaults(func=cmd_selftest)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return 1
    except (ValueError, FileNotFoundError, KeyError, json.JSONDecodeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - map anything else to the runtime code
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
