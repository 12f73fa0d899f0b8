"""Command-line front end: ``chcpre program.chc``."""
from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path

from .chc import Program, check_wellformed, parse_file, print_program
from .precond import (
    DEFAULT_DEPTH_BOUND,
    DEFAULT_MAX_ITERATIONS,
    DEFAULT_SEQ_LENGTH,
    STOP_DNF_CAP,
    InferenceReport,
    Options,
    check_soundness,
    infer,
)
from .linarith import DEFAULT_DNF_CAP
from .syntax import ParseError
from .transforms import CS, PE, TE

log = logging.getLogger("chcpre")

EXIT_OK, EXIT_INPUT, EXIT_CAPS = 0, 1, 2
_STEPS = {"pe": PE, "cs": CS, "te": TE}


def _order(text: str) -> list[str]:
    try:
        steps = [_STEPS[s.strip().lower()] for s in text.split(",") if s.strip()]
    except KeyError as e:
        raise argparse.ArgumentTypeError(f"unknown transformation {e.args[0]!r} (use pe, cs, te)") from None
    if not steps:
        raise argparse.ArgumentTypeError("empty transformation order")
    return steps


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chcpre", description="Infer sufficient preconditions for safety and unsafety of a CHC program.")
    ap.add_argument("input", type=Path, help=".chc file, or a directory of them")
    ap.add_argument("--theory", choices=("integer", "rational"), default="integer")
    ap.add_argument("-n", "--seq-length", type=_positive, default=DEFAULT_SEQ_LENGTH,
                    help="transformations per iteration (default %(default)s)")
    ap.add_argument("--order", type=_order, default=[PE, CS, TE], help="comma-separated cycle of pe, cs, te")
    ap.add_argument("--max-iterations", type=_positive, default=DEFAULT_MAX_ITERATIONS)
    ap.add_argument("--depth-bound", type=_positive, default=DEFAULT_DEPTH_BOUND,
                    help="derivation depth for trace elimination and --check")
    ap.add_argument("--dnf-cap", type=_positive, default=DEFAULT_DNF_CAP)
    ap.add_argument("--emit-intermediate", type=Path, metavar="DIR",
                    help="write each transformed program to DIR/{goal}-{iteration}-{step}.chc")
    ap.add_argument("--output", choices=("text", "json"), default="text")
    ap.add_argument("--check", action="store_true", help="verify the reported preconditions by bounded search")
    ap.add_argument("--init-pred")
    ap.add_argument("--safe-pred")
    ap.add_argument("--unsafe-pred")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _override(p: Program, args) -> Program:
    if args.init_pred:
        p = replace(p, init_pred=args.init_pred, init_preds=p.init_preds - {p.init_pred}, var_decl=None)
    if args.safe_pred:
        p = replace(p, safe_pred=args.safe_pred)
    if args.unsafe_pred:
        p = replace(p, unsafe_pred=args.unsafe_pred)
    return p


def report_json(r: InferenceReport, status: str) -> dict:
    return {
        "status": status,
        "classification": r.classification,
        "iterations": r.iterations,
        "stop_reason": r.stop_reason,
        "truncated": r.truncated,
        "progress_violations": r.progress_violations,
        "multi_initial_theta": r.multi_initial_theta,
        "sp_safe": str(r.sp_safe),
        "sp_unsafe": str(r.sp_unsafe),
        "np_safe_last": str(r.np_safe_last),
        "np_unsafe_last": str(r.np_unsafe_last),
        "nonterm_candidate": str(r.nonterm_candidate),
        "timings": {"total": r.seconds, "iterations": [t.seconds for t in r.trace]},
    }


def _text(name: str, out: dict) -> str:
    lines = [f"{name}: {out['status']} ({out.get('classification', '-')})"]
    for key in ("iterations", "stop_reason", "sp_safe", "sp_unsafe", "np_safe_last",
                "np_unsafe_last", "nonterm_candidate", "check"):
        if key in out:
            lines.append(f"  {key:18} {out[key]}")
    for v in out.get("check_violations", ()):
        lines.append(f"  violation: {v}")
    if "error" in out:
        lines.append(f"  error: {out['error']}")
    return "\n".join(lines)


def run_one(path: Path, args) -> tuple[int, dict]:
    try:
        p = _override(parse_file(path), args)
    except ParseError as e:
        return EXIT_INPUT, {"status": "error", "error": f"{path}:{e.line}:{e.col}: {e.msg}"}
    except OSError as e:
        return EXIT_INPUT, {"status": "error", "error": str(e)}
    diag = check_wellformed(p)
    if not diag:
        return EXIT_INPUT, {"status": "error", "error": f"{path}: " + "; ".join(diag.messages)}
    hook = None
    if args.emit_intermediate:
        args.emit_intermediate.mkdir(parents=True, exist_ok=True)

        def hook(goal, iteration, index, kind, prog):
            target = args.emit_intermediate / f"{goal}-{iteration}-{index}{kind.lower()}.chc"
            target.write_text(print_program(prog), encoding="utf-8")

    integer = args.theory == "integer"
    opts = Options(integer=integer, seq_length=args.seq_length, order=args.order,
                   max_iterations=args.max_iterations, depth_bound=args.depth_bound,
                   dnf_cap=args.dnf_cap, on_step=hook)
    r = infer(p, opts)
    code = EXIT_OK
    status = "truncated" if r.truncated else "ok"
    if r.stop_reason == STOP_DNF_CAP and not r.trace:
        code, status = EXIT_CAPS, "caps-exhausted"
    out = report_json(r, status)
    if args.check:
        t0 = time.perf_counter()
        res = check_soundness(p, r.sp_safe, r.sp_unsafe, args.depth_bound, integer)
        out["timings"]["check"] = time.perf_counter() - t0
        out["check"] = "pass" if res.ok else "fail"
        if not res.ok:
            out["check_violations"] = [f"sp_{v.side} disjunct {v.disjunct}: {v.tree.skeleton()}" for v in res.violations]
            code, out["status"] = EXIT_CAPS, "check-failed"
    return code, out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    if args.input.is_dir():
        paths = sorted(args.input.glob("*.chc"))
        if not paths:
            print(f"{args.input}: no .chc files", file=sys.stderr)
            return EXIT_INPUT
    else:
        paths = [args.input]
    code = EXIT_OK
    results = {}
    for path in paths:
        log.debug("analysing %s", path)
        c, out = run_one(path, args)
        code = max(code, c)
        results[str(path)] = out
        if "error" in out:
            print(out["error"], file=sys.stderr)
    if args.output == "json":
        doc = results[str(paths[0])] if len(paths) == 1 and not args.input.is_dir() else results
        print(json.dumps(doc, indent=2))
    else:
        for name, out in results.items():
            print(_text(name, out))
    return code


if __name__ == "__main__":
    sys.exit(main())
