"""Command-line front end.

Exit codes: 0 ok, 1 usage error, 2 verification failure, 3 transport failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from .certify import (
    ExternalMap,
    FilePairTransport,
    TransportError,
    certify_discontinuity,
    reference_adapter_command,
)
from .metric import MetricSpec
from .order import OrderSpec, canonical_order, random_order
from .sets import PointSet, RegionSwapMap, SortMap
from .witness import (
    LinePath,
    WitnessError,
    WitnessVerificationError,
    nonsorting_witness,
    random_swap_path,
    sorting_witness,
    verify_certificate,
    witness_sweep,
)

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_TRANSPORT = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _floats(text: Any) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    return [float(v) for v in str(text).split(",") if v.strip()]


def _rows(text: Any) -> list[list[float]]:
    if isinstance(text, (list, tuple)):
        return [_floats(r) for r in text]
    return [_floats(r) for r in str(text).split(";") if r.strip()]


def _dumps(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _emit(args: argparse.Namespace, text: str) -> None:
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _order(args: argparse.Namespace) -> OrderSpec:
    if args.order_file:
        return OrderSpec.from_json(Path(args.order_file).read_text(encoding="utf-8"))
    if args.order_seed is not None:
        return random_order(args.d, args.order_seed)
    return canonical_order(args.d)


def _metric(args: argparse.Namespace, d: int) -> MetricSpec:
    if args.metric_file:
        return MetricSpec.from_dict(json.loads(Path(args.metric_file).read_text(encoding="utf-8")))
    return MetricSpec.identity(d)


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise UsageError(message)


def _cert_csv(certs) -> str:
    lines = ["kind,anchor,delta,epsilon,achieved_gap,ratio"]
    for c in certs:
        anchor = " ".join(repr(float(v)) for v in c.anchor)
        lines.append(f"{c.kind},{anchor},{c.delta!r},{c.epsilon!r},{c.achieved_gap!r},{c.ratio!r}")
    return "\n".join(lines) + "\n"


def cmd_witness_sort(args: argparse.Namespace) -> int:
    _require(args.d >= 2, "d must be >= 2")
    _require(args.n >= 2, "n must be >= 2")
    _require(int(args.j) != 1, "j must exceed 1")
    _require(1 < int(args.j) <= args.d, f"j must be in 2..{args.d}")
    _require(args.eps > 0, "eps must be > 0")
    _require(args.tau is None or args.tau > 0, "tau must be > 0")
    anchor = _floats(args.anchor) if args.anchor is not None else [0.0] * args.d
    _require(len(anchor) == args.d, f"anchor must have {args.d} components")
    order = _order(args)
    filler = _rows(args.filler) if args.filler else None
    cert = sorting_witness(
        order, anchor, filler, args.eps, int(args.j), args.tau, n=args.n, metric=_metric(args, args.d)
    )
    if not verify_certificate(cert, SortMap(order)):
        raise WitnessVerificationError("certificate failed re-verification")
    _emit(args, _cert_csv([cert]) if args.format == "csv" else _dumps(cert.to_dict()))
    return EXIT_OK


def cmd_witness_nonsort(args: argparse.Namespace) -> int:
    _require(args.d >= 2, "d must be >= 2")
    _require(args.n >= 2, "n must be >= 2")
    _require(args.tol > 0, "tol must be > 0")
    order = _order(args)
    set_map = RegionSwapMap(order, args.boundary)
    if args.points:
        pts = _rows(args.points)
        _require(args.end is not None, "--end is required with --points")
        _require(0 <= args.index < len(pts), "--index out of range")
        path = LinePath.between(PointSet(pts), args.index, _floats(args.end))
    else:
        path = random_swap_path(set_map, args.n, args.d, np.random.default_rng(args.seed))
    metric = _metric(args, path.base.d)
    cert = nonsorting_witness(set_map, path, args.t_lo, args.t_hi, args.tol, metric=metric)
    if not verify_certificate(cert, set_map, metric):
        raise WitnessVerificationError("certificate failed re-verification")
    _emit(args, _cert_csv([cert]) if args.format == "csv" else _dumps(cert.to_dict()))
    return EXIT_OK


def cmd_witness_sweep(args: argparse.Namespace) -> int:
    _require(args.count >= 1, "count must be >= 1")
    _require(args.d >= 2, "d must be >= 2")
    _require(args.tau is None or args.tau > 0, "tau must be > 0")
    order = _order(args)
    result = witness_sweep(
        order, args.count, args.seed, args.tau, epsilon_in=args.eps, j=int(args.j), n=args.n, metric=_metric(args, args.d)
    )
    if result.distinct_loci != args.count:
        raise WitnessVerificationError(f"expected {args.count} distinct loci, got {result.distinct_loci}")
    if args.format == "csv":
        text = _cert_csv(result.certificates)
    else:
        payload = {"summary": result.summary()}
        payload["certificates"] = [c.to_dict() for c in result.certificates] if args.certificates else []
        text = _dumps(payload)
    _emit(args, text)
    return EXIT_OK


def cmd_certify(args: argparse.Namespace) -> int:
    sources = [args.self_kind is not None, args.cmd is not None, args.file_pair is not None]
    _require(sum(sources) == 1, "give exactly one of --self, --cmd, --file-pair")
    _require(args.anchors >= 1, "anchors must be >= 1")
    taus = _floats(args.tau_ladder)
    _require(bool(taus) and all(t > 0 for t in taus), "tau ladder entries must be > 0")
    if args.self_kind is not None:
        external = ExternalMap.command(
            reference_adapter_command(args.self_kind, args.d, args.n, args.boundary), args.timeout
        )
    elif args.cmd is not None:
        external = ExternalMap.command(args.cmd, args.timeout)
    else:
        external = ExternalMap(FilePairTransport(args.file_pair, args.timeout))
    with external:
        metric = MetricSpec.from_dict(json.loads(Path(args.metric_file).read_text())) if args.metric_file else None
        report = certify_discontinuity(external, metric, args.anchors, taus, args.seed)
    if args.csv:
        Path(args.csv).write_text(report.ladder_csv(), encoding="utf-8")
    _emit(args, report.ladder_csv() if args.format == "csv" else _dumps(report.to_dict()))
    if report.incomplete:
        print(f"certify: incomplete report: {report.error}", file=sys.stderr)
        return EXIT_TRANSPORT
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    checks = []
    order = canonical_order(2)
    cert = sorting_witness(order, [0.0, 0.0], epsilon_in=1.0, j=2, tau=1e-2)
    checks.append(
        (
            "sorting witness worked example",
            abs(cert.delta - 1e-2) < 1e-9 and abs(cert.epsilon - 1) < 1e-9
            and abs(cert.achieved_gap - math.sqrt(2 + 1e-4)) < 1e-9,
        )
    )
    sweep = witness_sweep(order, 100, args.seed, 1e-4)
    checks.append(("sweep yields distinct loci", sweep.distinct_loci == 100))
    ladder = [1e-2, 1e-3, 1e-4]
    for kind, n in (("sort", 2), ("region-swap", 3)):
        try:
            with ExternalMap.command(reference_adapter_command(kind, 2, n), args.timeout) as ext:
                report = certify_discontinuity(ext, None, 10, ladder, args.seed)
            ok = not report.incomplete and report.detected and len(report.certificates) > 0
        except TransportError:
            ok = False
        checks.append((f"certify reference adapter {kind}", ok))
    with ExternalMap.command(reference_adapter_command("average", 2, 3), args.timeout) as ext:
        report = certify_discontinuity(ext, None, 5, ladder, args.seed)
    checks.append(("faulty adapter rejected", report.membership["in_f"] is False and not report.certificates))
    for name, ok in checks:
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_VERIFY


def build_parser() -> tuple[argparse.ArgumentParser, list[argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default=None, help="write output here instead of stdout")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--config", default=None, help="JSON file of flag values; flags override it")

    order_opts = argparse.ArgumentParser(add_help=False)
    order_opts.add_argument("--d", type=int, default=2)
    order_opts.add_argument("--n", type=int, default=2)
    order_opts.add_argument("--order-seed", type=int, default=None, help="use a random order drawn from this seed")
    order_opts.add_argument("--order-file", default=None, help="OrderSpec JSON")
    order_opts.add_argument("--metric-file", default=None, help="MetricSpec JSON (default: identity encoder, p=2)")

    parser = _Parser(prog="responsibility", description="Discontinuity witnesses for set-to-matrix maps.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    leaves = []

    witness = sub.add_parser("witness", help="construct witness pairs")
    wsub = witness.add_subparsers(dest="witness_command", required=True, parser_class=_Parser)

    p = wsub.add_parser("sort", parents=[common, order_opts], help="witness for a sorting map")
    p.add_argument("--anchor", type=_floats, default=None)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--j", type=int, default=2)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--filler", type=_rows, default=None, help="other elements as 'x,y;x,y'")
    p.set_defaults(func=cmd_witness_sort)
    leaves.append(p)

    p = wsub.add_parser("nonsort", parents=[common, order_opts], help="bisection witness for the region-swap map")
    p.add_argument("--boundary", type=float, default=0.0)
    p.add_argument("--points", type=_rows, default=None, help="base set as 'x,y;x,y;...'")
    p.add_argument("--index", type=int, default=0, help="element moved along the path")
    p.add_argument("--end", type=_floats, default=None, help="where the moved element ends (t=1)")
    p.add_argument("--t-lo", type=float, default=0.0)
    p.add_argument("--t-hi", type=float, default=1.0)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_witness_nonsort, n=3)
    leaves.append(p)

    p = wsub.add_parser("sweep", parents=[common, order_opts], help="sorting witnesses at many anchors")
    p.add_argument("--count", type=int, default=1000)
    p.add_argument("--eps", type=float, default=1.0)
    p.add_argument("--j", type=int, default=2)
    p.add_argument("--tau", type=float, default=1e-4)
    p.add_argument("--certificates", action="store_true", help="include every certificate in JSON output")
    p.set_defaults(func=cmd_witness_sweep)
    leaves.append(p)

    p = sub.add_parser("certify", parents=[common], help="certify an external map over the wire protocol")
    p.add_argument("--self", dest="self_kind", choices=("sort", "region-swap", "average", "constant"), default=None)
    p.add_argument("--cmd", default=None, help="adapter command line")
    p.add_argument("--file-pair", default=None, help="directory for file-pair transport")
    p.add_argument("--d", type=int, default=2, help="dimension for --self adapters")
    p.add_argument("--n", type=int, default=None, help="set size for --self adapters")
    p.add_argument("--boundary", type=float, default=0.0)
    p.add_argument("--anchors", type=int, default=50)
    p.add_argument("--tau-ladder", type=_floats, default=[1e-2, 1e-3, 1e-4])
    p.add_argument("--metric-file", default=None)
    p.add_argument("--csv", default=None, help="also write the (tau, median_ratio, max_ratio) table here")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_certify)
    leaves.append(p)

    p = sub.add_parser("selftest", parents=[common], help="quick end-to-end check")
    p.add_argument("--timeout", type=float, default=10.0)
    p.set_defaults(func=cmd_selftest)
    leaves.append(p)
    return parser, leaves


def _parse(argv: Sequence[str]) -> argparse.Namespace:
    parser, leaves = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        try:
            config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            parser.error(f"cannot read config {args.config}: {exc}")
        if not isinstance(config, dict):
            parser.error("config file must hold a JSON object")
        config = {k.replace("-", "_"): v for k, v in config.items()}
        config.pop("config", None)
        if "self" in config:
            config["self_kind"] = config.pop("self")
        for leaf in leaves:
            leaf.set_defaults(**config)
        args = parser.parse_args(argv)
    return args


def main(argv: Sequence[str] | None = None) -> int:
    args = _parse(sys.argv[1:] if argv is None else list(argv))
    if args.command == "certify" and args.n is None:
        args.n = 3 if args.self_kind in ("region-swap", "average") else 2
    try:
        return args.func(args)
    except (UsageError, WitnessError) as exc:
        print(f"responsibility: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except WitnessVerificationError as exc:
        print(f"responsibility: verification failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY
    except TransportError as exc:
        print(f"responsibility: transport failure: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT
    except (ValueError, OSError) as exc:
        print(f"responsibility: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
