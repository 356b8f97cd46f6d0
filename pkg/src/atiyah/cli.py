"""Command-line interface.

Exit codes: 0 ok, 1 usage or parse error, 2 degenerate input,
3 confirmed conjecture violation.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from typing import Any, Sequence

from .determinant import normalized_determinant, normalized_determinant_real
from .errors import AtiyahError, DegenerateConfiguration, DegreeTooHigh
from .geometry import Configuration, embed_planar, parse_inline_points
from .harness import CampaignSpec, default_workers, run_campaign, write_summary_csv
from .operad import ClusterTree, LabeledState, independence_margin, nu_compose, nu_compose_real

EXIT_OK, EXIT_USAGE, EXIT_DEGENERATE, EXIT_VIOLATION = 0, 1, 2, 3

TARGET_ALIASES = {"strong": "strong-complex", "weak": "weak-complex"}
FORMATS = ("json", "jsonl", "csv", "pretty")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _parse_k(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad block sizes {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="atiyah", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    det = sub.add_parser("det", help="normalized determinant D of one configuration")
    det.add_argument("--points", required=True, help='JSON file or inline "x,y,z;x,y,z;..."')
    det.add_argument("--dim", type=int, choices=(2, 3))
    det.add_argument("--real", action="store_true", help="real pipeline for planar points")
    det.add_argument("--tol", type=float, default=1e-9)
    det.add_argument("--format", choices=FORMATS, default="json")

    ver = sub.add_parser("verify", help="run a verification campaign")
    ver.add_argument(
        "--target",
        required=True,
        choices=("strong", "weak", "strong-complex", "weak-complex", "strong-real", "weak-real", "e3", "e2"),
    )
    ver.add_argument("--n", type=int, required=True)
    ver.add_argument("--k", type=_parse_k)
    ver.add_argument("--samples", type=int, default=1000)
    ver.add_argument("--seed", type=int, default=0)
    ver.add_argument("--sampler", default="uniform-ball")
    ver.add_argument("--start-index", type=int, default=0)
    ver.add_argument("--tree-kind", choices=("flat", "nested"), default="flat")
    ver.add_argument("--state-kind", choices=("random", "collinear"), default="random")
    ver.add_argument("--tol-violation", type=float, default=1e-9)
    ver.add_argument("--tol-margin", type=float, default=1e-10)
    ver.add_argument("--workers", type=int, default=None, help="default: $ATIYAH_THREADS or 1")
    ver.add_argument("--out", help="JSONL campaign file")
    ver.add_argument("--append", action="store_true", help="append to an existing campaign file")
    ver.add_argument("--summary-csv")
    ver.add_argument("--format", choices=FORMATS, default="json")

    mn = sub.add_parser("minimize", help="multi-start minimization of log|D|")
    mn.add_argument("--n", type=int, required=True)
    mn.add_argument("--dim", type=int, choices=(2, 3), default=3)
    mn.add_argument("--restarts", type=int, default=20)
    mn.add_argument("--seed", type=int, default=0)
    mn.add_argument("--max-iter", type=int, default=4000)
    mn.add_argument("--sampler", default="uniform-ball")
    mn.add_argument("--out")
    mn.add_argument("--summary-csv")
    mn.add_argument("--format", choices=FORMATS, default="json")

    co = sub.add_parser("compose", help="apply the structure map to a tree and labeled states")
    co.add_argument("--tree", required=True)
    co.add_argument("--states", nargs="+", required=True)
    co.add_argument("--real", action="store_true")
    co.add_argument("--format", choices=FORMATS, default="json")
    return p


def _emit(obj: dict[str, Any], fmt: str, out=None) -> None:
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(obj, indent=2) + "\n")
    elif fmt == "jsonl":
        out.write(json.dumps(obj) + "\n")
    elif fmt == "csv":
        flat = {k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in obj.items()}
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(flat))
        w.writeheader()
        w.writerow(flat)
        out.write(buf.getvalue())
    else:
        width = max(len(k) for k in obj)
        for k, v in obj.items():
            out.write(f"{k:<{width}}  {v!r}\n" if isinstance(v, float) else f"{k:<{width}}  {v}\n")


def _load_json(path: str) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read {path}: {exc}") from None


def _read_points(text: str) -> Configuration:
    if os.path.exists(text):
        return Configuration.from_json(_load_json(text))
    try:
        return parse_inline_points(text)
    except ValueError as exc:
        if isinstance(exc, DegenerateConfiguration):
            raise
        raise UsageError(f"cannot parse points {text!r}: {exc}") from None


def cmd_det(args) -> int:
    c = _read_points(args.points)
    if args.dim is not None and c.dim != args.dim:
        raise UsageError(f"--dim {args.dim} but the points have dimension {c.dim}")
    if args.real:
        if c.dim != 2:
            raise UsageError("--real needs planar points")
        report = normalized_determinant_real(c)
    else:
        report = normalized_determinant(embed_planar(c) if c.dim == 2 else c)
    obj = report.to_json()
    obj["abs_D"] = report.abs_D
    _emit(obj, args.format)
    return EXIT_VIOLATION if report.abs_D < 1.0 - args.tol else EXIT_OK


def _finish_campaign(report, args) -> int:
    if getattr(args, "summary_csv", None):
        write_summary_csv([report], args.summary_csv, append=True)
    _emit(report.summary, args.format)
    return EXIT_VIOLATION if report.confirmed_violations > 0 else EXIT_OK


def cmd_verify(args) -> int:
    target = TARGET_ALIASES.get(args.target, args.target)
    spec = CampaignSpec(
        target=target,
        n=args.n,
        k=args.k,
        sampler=args.sampler,
        sample_count=args.samples,
        seed=args.seed,
        start_index=args.start_index,
        tol_violation=args.tol_violation,
        tol_margin=args.tol_margin,
        tree_kind=args.tree_kind,
        state_kind=args.state_kind,
    )
    report = run_campaign(spec, out=args.out, workers=args.workers or default_workers(), append=args.append)
    return _finish_campaign(report, args)


def cmd_minimize(args) -> int:
    spec = CampaignSpec(
        target="minimize",
        n=args.n,
        dim=args.dim,
        restarts=args.restarts,
        seed=args.seed,
        max_iter=args.max_iter,
        sampler=args.sampler,
    )
    report = run_campaign(spec, out=args.out)
    return _finish_campaign(report, args)


def cmd_compose(args) -> int:
    tree = ClusterTree.from_json(_load_json(args.tree), dim=2 if args.real else 3)
    states = [LabeledState.from_json(_load_json(p), real=args.real) for p in args.states]
    if args.real:
        out = nu_compose_real(tree, states)
    else:
        out = nu_compose(tree, states)
    obj = out.to_json()
    try:
        obj["margin"] = independence_margin(out.labels)
    except DegreeTooHigh:
        obj["margin"] = None
    _emit(obj, args.format)
    return EXIT_OK


COMMANDS = {"det": cmd_det, "verify": cmd_verify, "minimize": cmd_minimize, "compose": cmd_compose}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except DegenerateConfiguration as exc:
        print(f"atiyah: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (UsageError, AtiyahError, ValueError, KeyError, TypeError) as exc:
        print(f"atiyah: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
