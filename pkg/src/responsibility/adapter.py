"""Reference adapters speaking the line-delimited JSON map protocol.

Run ``python -m responsibility.adapter KIND --d D --n N`` to expose one of
the bundled maps on stdin/stdout:

    -> {"d": D, "n": N, "protocol": 1}          (handshake, first line)
    <- {"id": 0, "points": [[...], ...]}
    -> {"id": 0, "matrix": [[...], ...]}        or {"id": 0, "error": "..."}

Kinds ``sort`` and ``region-swap`` are members of F. ``average`` (first row
replaced by the mean of the two smallest) and ``constant`` are deliberately
not, for exercising the membership probe.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import threading
import time
from pathlib import Path
from typing import Callable, TextIO

import numpy as np

from .order import canonical_order, random_order
from .sets import PointSet, RegionSwapMap, SortMap

PROTOCOL_VERSION = 1
KINDS = ("sort", "region-swap", "average", "constant")

Handler = Callable[[np.ndarray], np.ndarray]


def make_handler(kind: str, d: int, n: int, boundary: float = 0.0, order_seed: int | None = None) -> Handler:
    order = canonical_order(d) if order_seed is None else random_order(d, order_seed)
    if kind == "sort":
        m = SortMap(order)
        return lambda pts: m(PointSet(pts)).rows
    if kind == "region-swap":
        m = RegionSwapMap(order, boundary)
        return lambda pts: m(PointSet(pts)).rows
    if kind == "average":
        m = SortMap(order)

        def average(pts: np.ndarray) -> np.ndarray:
            rows = m(PointSet(pts)).rows.copy()
            rows[0] = 0.5 * (rows[0] + rows[1])
            return rows

        return average
    if kind == "constant":
        fixed = np.arange(n * d, dtype=float).reshape(n, d)
        return lambda pts: fixed.copy()
    raise ValueError(f"unknown adapter kind {kind!r}; choose from {', '.join(KINDS)}")


def handshake(d: int, n: int) -> dict:
    return {"d": d, "n": n, "protocol": PROTOCOL_VERSION}


def respond(message: dict, handler: Handler, d: int, n: int) -> dict:
    """Answer one request message; never raises."""
    req_id = message.get("id")
    try:
        pts = np.array(message["points"], dtype=float)
        if pts.shape != (n, d):
            raise ValueError(f"expected {n}x{d} points, got shape {pts.shape}")
        return {"id": req_id, "matrix": np.asarray(handler(pts), dtype=float).tolist()}
    except Exception as exc:  # reported over the wire, not raised
        return {"id": req_id, "error": f"{type(exc).__name__}: {exc}"}


def serve_lines(handler: Handler, d: int, n: int, stdin: TextIO, stdout: TextIO) -> None:
    stdout.write(json.dumps(handshake(d, n)) + "\n")
    stdout.flush()
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            message = json.loads(line)
        except json.JSONDecodeError as exc:
            reply = {"id": None, "error": f"malformed request: {exc}"}
        else:
            reply = respond(message, handler, d, n)
        stdout.write(json.dumps(reply) + "\n")
        stdout.flush()


def write_json_atomic(path: Path, payload: dict) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(payload), encoding="utf-8")
    os.replace(tmp, path)


def serve_file_pair(
    directory: Path,
    handler: Handler,
    d: int,
    n: int,
    stop: threading.Event,
    poll: float = 0.0005,
) -> None:
    """File-pair responder: answers ``request.json`` with ``response.json`` until ``stop`` is set."""
    directory = Path(directory)
    request = directory / "request.json"
    claimed = directory / "request.claimed"
    write_json_atomic(directory / "handshake.json", handshake(d, n))
    while not stop.is_set():
        try:
            os.replace(request, claimed)
        except FileNotFoundError:
            time.sleep(poll)
            continue
        message = json.loads(claimed.read_text(encoding="utf-8"))
        claimed.unlink()
        write_json_atomic(directory / "response.json", respond(message, handler, d, n))


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="responsibility-adapter", description=__doc__.splitlines()[0])
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--d", type=int, default=2)
    parser.add_argument("--n", type=int, default=2)
    parser.add_argument("--boundary", type=float, default=0.0)
    parser.add_argument("--order-seed", type=int, default=None)
    args = parser.parse_args(argv)
    handler = make_handler(args.kind, args.d, args.n, args.boundary, args.order_seed)
    serve_lines(handler, args.d, args.n, sys.stdin, sys.stdout)
    return 0


if __name__ == "__main__":
    sys.exit(main())
