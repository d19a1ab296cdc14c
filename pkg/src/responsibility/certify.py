"""Black-box discontinuity certification of external set-to-matrix maps.

An external map is any process that answers the line-delimited JSON
protocol in :mod:`responsibility.adapter`, or a directory exchanging
request/response files with the same schemas. The certifier first checks the
map is in F (it returns a permutation of its input), then hunts for witness
pairs and reports how fast the output gap outgrows the input distance.
"""

from __future__ import annotations

import json
import os
import queue
import shlex
import subprocess
import sys
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence, Union

import numpy as np

from .metric import MetricSpec
from .order import OrderSpec, canonical_order
from .sets import OutputMatrix, Permutation, PointSet, SetMap, SortingUnder, classify, random_point_set
from .witness import (
    NoResponsibilityChange,
    WitnessCertificate,
    WitnessError,
    WitnessVerificationError,
    nonsorting_witness,
    random_swap_path,
    sorting_witness,
    verify_certificate,
)

__all__ = [
    "TransportError",
    "HandshakeError",
    "ProtocolError",
    "NotInFError",
    "SubprocessTransport",
    "FilePairTransport",
    "ExternalMap",
    "ExternalSetMap",
    "reference_adapter_command",
    "match_rows",
    "InF",
    "NotInF",
    "probe_membership",
    "CertifyReport",
    "certify_set_map",
    "certify_discontinuity",
    "DETECTION_RATIO",
]

ROW_TOL = 1e-6
DETECTION_RATIO = 1e3
PROTOCOL_VERSION = 1


class TransportError(RuntimeError):
    pass


class HandshakeError(TransportError):
    pass


class ProtocolError(TransportError):
    pass


class NotInFError(ValueError):
    """The map's output is not a row permutation of its input."""

    def __init__(self, theta: PointSet, reason: str):
        super().__init__(reason)
        self.theta = theta
        self.reason = reason


def _check_handshake(message: Any) -> tuple[int, int]:
    if not isinstance(message, dict) or message.get("protocol") != PROTOCOL_VERSION:
        raise HandshakeError(f"bad handshake {message!r}: expected protocol {PROTOCOL_VERSION}")
    try:
        d, n = int(message["d"]), int(message["n"])
    except (KeyError, TypeError, ValueError) as exc:
        raise HandshakeError(f"handshake missing d/n: {message!r}") from exc
    if d < 2 or n < 2:
        raise HandshakeError(f"handshake declares unsupported d={d}, n={n}")
    return d, n


class SubprocessTransport:
    """Talks to a child process over its standard streams, one request at a time."""

    def __init__(self, command: Union[str, Sequence[str]], timeout: float = 10.0):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout
        self._proc: subprocess.Popen | None = None
        self._lines: queue.Queue = queue.Queue()
        self._stderr: deque[str] = deque(maxlen=20)
        self._lock = threading.Lock()

    @property
    def identity(self) -> str:
        return shlex.join(self.command)

    def open(self) -> tuple[int, int]:
        try:
            self._proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
            )
        except OSError as exc:
            raise HandshakeError(f"handshake failed: cannot start adapter {self.identity!r}: {exc}") from exc
        threading.Thread(target=self._pump, args=(self._proc.stdout, self._lines), daemon=True).start()
        threading.Thread(target=self._drain_stderr, daemon=True).start()
        try:
            line = self._next_line("handshake", HandshakeError)
            try:
                message = json.loads(line)
            except json.JSONDecodeError as exc:
                raise HandshakeError(f"handshake is not JSON: {line!r}") from exc
            return _check_handshake(message)
        except HandshakeError:
            self.close()
            raise

    @staticmethod
    def _pump(stream, sink: queue.Queue) -> None:
        for line in stream:
            sink.put(line)
        sink.put(None)

    def _drain_stderr(self) -> None:
        for line in self._proc.stderr:
            self._stderr.append(line.rstrip())

    def _diagnostics(self) -> str:
        code = self._proc.poll() if self._proc else None
        tail = " | ".join(self._stderr) or "<no stderr>"
        return f"exit code {code}; stderr: {tail}"

    def _next_line(self, context: str, error: type[TransportError] = TransportError) -> str:
        try:
            line = self._lines.get(timeout=self.timeout)
        except queue.Empty:
            raise error(f"timed out after {self.timeout}s waiting for {context} from {self.identity!r}") from None
        if line is None:
            # Give the stderr reader a moment to collect the crash message.
            time.sleep(0.05)
            raise error(f"adapter closed its output during {context}; {self._diagnostics()}")
        return line

    def request(self, message: dict) -> dict:
        with self._lock:
            if self._proc is None:
                raise TransportError("transport is not open")
            try:
                self._proc.stdin.write(json.dumps(message) + "\n")
                self._proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"cannot send request: {exc}; {self._diagnostics()}") from exc
            line = self._next_line(f"response {message.get('id')}")
        try:
            return json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not JSON: {line!r}") from exc

    def close(self) -> None:
        if self._proc is None:
            return
        try:
            self._proc.stdin.close()
        except OSError:
            pass
        try:
            self._proc.wait(timeout=2)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None


class FilePairTransport:
    """Exchanges ``request.json`` / ``response.json`` in a shared directory."""

    def __init__(self, directory: Union[str, Path], timeout: float = 10.0, poll: float = 0.0005):
        self.directory = Path(directory)
        self.timeout = timeout
        self.poll = poll

    @property
    def identity(self) -> str:
        return f"file-pair:{self.directory}"

    def _wait_for(self, path: Path, context: str, error: type[TransportError] = TransportError) -> dict:
        deadline = time.monotonic() + self.timeout
        while True:
            try:
                text = path.read_text(encoding="utf-8")
                return json.loads(text)
            except (FileNotFoundError, json.JSONDecodeError):
                if time.monotonic() > deadline:
                    raise error(f"timed out after {self.timeout}s waiting for {context} in {self.directory}") from None
                time.sleep(self.poll)

    def open(self) -> tuple[int, int]:
        return _check_handshake(self._wait_for(self.directory / "handshake.json", "handshake", HandshakeError))

    def request(self, message: dict) -> dict:
        response = self.directory / "response.json"
        tmp = self.directory / "request.json.tmp"
        tmp.write_text(json.dumps(message), encoding="utf-8")
        os.replace(tmp, self.directory / "request.json")
        reply = self._wait_for(response, f"response {message.get('id')}")
        response.unlink()
        return reply

    def close(self) -> None:
        pass


class ExternalMap:
    """An opaque set-to-matrix map behind a transport.

    Use as a context manager, or call :meth:`open` / :meth:`close`.
    """

    def __init__(self, transport: Union[SubprocessTransport, FilePairTransport], tol: float = ROW_TOL):
        self.transport = transport
        self.tol = tol
        self.d: int | None = None
        self.n: int | None = None
        self._next_id = 0

    @classmethod
    def command(cls, command: Union[str, Sequence[str]], timeout: float = 10.0, tol: float = ROW_TOL) -> "ExternalMap":
        return cls(SubprocessTransport(command, timeout), tol)

    @property
    def identity(self) -> str:
        return self.transport.identity

    def open(self) -> "ExternalMap":
        self.d, self.n = self.transport.open()
        return self

    def close(self) -> None:
        self.transport.close()

    def __enter__(self) -> "ExternalMap":
        return self.open()

    def __exit__(self, *exc) -> None:
        self.close()

    def query(self, points: np.ndarray) -> np.ndarray:
        if self.d is None:
            raise TransportError("external map is not open")
        req_id = self._next_id
        self._next_id += 1
        reply = self.transport.request({"id": req_id, "points": np.asarray(points, dtype=float).tolist()})
        if reply.get("id") != req_id:
            raise ProtocolError(f"response id {reply.get('id')!r} does not match request id {req_id}")
        if "error" in reply:
            raise ProtocolError(f"adapter error for request {req_id}: {reply['error']}")
        try:
            matrix = np.array(reply["matrix"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"response {req_id} has no valid matrix") from exc
        if matrix.shape != (self.n, self.d):
            raise ProtocolError(f"response {req_id} has shape {matrix.shape}, expected {(self.n, self.d)}")
        return matrix


def match_rows(points: np.ndarray, matrix: np.ndarray, tol: float = ROW_TOL) -> Permutation | None:
    """Assign each output row to its nearest input point (l2).

    Returns ``None`` unless every row is within ``tol`` per coordinate of
    its match and the assignment is a bijection.
    """
    if matrix.shape != points.shape:
        return None
    dist = np.sum((matrix[:, None, :] - points[None, :, :]) ** 2, axis=2)
    nearest = np.argmin(dist, axis=1)
    if np.max(np.abs(matrix - points[nearest])) > tol:
        return None
    if len(set(nearest.tolist())) != len(nearest):
        return None
    return Permutation(tuple(nearest.tolist()))


class ExternalSetMap(SetMap):
    """Adapts an :class:`ExternalMap` to the :class:`SetMap` interface.

    Output matrices are the raw responses; permutations are inferred by
    nearest-row matching and raise :class:`NotInFError` when the response is
    not a row permutation of the request.
    """

    name = "external"

    def __init__(self, external: ExternalMap):
        self.external = external

    def __call__(self, theta: PointSet) -> OutputMatrix:
        return OutputMatrix(self.external.query(theta.points))

    def permutation(self, theta: PointSet) -> Permutation:
        matrix = self.external.query(theta.points)
        perm = match_rows(theta.points, matrix, self.external.tol)
        if perm is None:
            raise NotInFError(theta, "response rows are not a permutation of the request points")
        return perm


def reference_adapter_command(
    kind: str, d: int, n: int, boundary: float = 0.0, order_seed: int | None = None
) -> list[str]:
    """Command line that launches a bundled reference adapter."""
    cmd = [sys.executable, "-m", "responsibility.adapter", kind, "--d", str(d), "--n", str(n)]
    cmd += ["--boundary", repr(float(boundary))]
    if order_seed is not None:
        cmd += ["--order-seed", str(order_seed)]
    return cmd


@dataclass(frozen=True)
class InF:
    samples: int
    in_f = True

    def to_dict(self) -> dict[str, Any]:
        return {"in_f": True, "samples": self.samples}


@dataclass(frozen=True)
class NotInF:
    theta: PointSet
    reason: str
    in_f = False

    def to_dict(self) -> dict[str, Any]:
        return {"in_f": False, "reason": self.reason, "theta": self.theta.to_dict()}


def probe_membership(external: ExternalMap, samples: int = 100, seed: int = 0) -> Union[InF, NotInF]:
    """Check row-multiset preservation on random sets; transport errors propagate."""
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        theta = random_point_set(external.n, external.d, rng)
        matrix = external.query(theta.points)
        if match_rows(theta.points, matrix, external.tol) is None:
            return NotInF(theta, "response rows are not a permutation of the request points")
    return InF(samples)


@dataclass
class CertifyReport:
    map_identity: str
    membership: dict[str, Any]
    classification: dict[str, Any] | None = None
    certificates: list[WitnessCertificate] = field(default_factory=list)
    ladder: list[dict[str, Any]] = field(default_factory=list)
    max_ratio: float | None = None
    detected: bool = False
    incomplete: bool = False
    error: str | None = None
    seed: int = 0

    def to_dict(self) -> dict[str, Any]:
        return {
            "map": self.map_identity,
            "seed": self.seed,
            "membership": self.membership,
            "classification": self.classification,
            "certificates": [c.to_dict() for c in self.certificates],
            "ladder": self.ladder,
            "max_ratio": self.max_ratio,
            "detected": self.detected,
            "detection_threshold": DETECTION_RATIO,
            "incomplete": self.incomplete,
            "error": self.error,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, allow_nan=False)

    def ladder_csv(self) -> str:
        lines = ["tau,median_ratio,max_ratio"]
        for row in self.ladder:
            lines.append(f"{row['tau']!r},{row['median_ratio']!r},{row['max_ratio']!r}")
        return "\n".join(lines) + "\n"


def _ladder_rows(taus: Sequence[float], ratios: dict[float, list[float]]) -> list[dict[str, Any]]:
    rows = []
    for tau in taus:
        r = ratios.get(tau, [])
        rows.append(
            {
                "tau": tau,
                "count": len(r),
                "median_ratio": float(np.median(r)) if r else None,
                "max_ratio": float(np.max(r)) if r else None,
            }
        )
    return rows


def certify_set_map(
    set_map: SetMap,
    d: int,
    n: int,
    metric: MetricSpec,
    anchors: int,
    tau_ladder: Sequence[float],
    seed: int,
    *,
    identity: str = "in-process",
    membership: dict[str, Any] | None = None,
    order: OrderSpec | None = None,
    classify_samples: int = 200,
    path_attempts: int = 1000,
) -> CertifyReport:
    """Certification core shared by in-process and external maps.

    Sorting-like maps get one sorting witness per anchor and rung; others
    get a bisection witness per random swap path, with each rung used as
    the bisection tolerance. Certificates kept in the report are the ones at
    the smallest rung, each re-verified by fresh evaluations.
    """
    taus = sorted((float(t) for t in tau_ladder), reverse=True)
    if not taus:
        raise ValueError("tau_ladder must not be empty")
    order = order or canonical_order(d)
    report = CertifyReport(identity, membership or {"in_f": True}, seed=seed)
    rng = np.random.default_rng(seed)
    ratios: dict[float, list[float]] = {t: [] for t in taus}
    try:
        verdict = classify(set_map, order, classify_samples, seed, n=n)
        report.classification = verdict.to_dict()
        for _ in range(anchors):
            if isinstance(verdict, SortingUnder):
                a = rng.uniform(-1.0, 1.0, d)

                def make(tau: float) -> WitnessCertificate:
                    return sorting_witness(order, a, tau=tau, n=n, metric=metric, set_map=set_map)

            else:
                try:
                    path = random_swap_path(set_map, n, d, rng, attempts=path_attempts)
                except NoResponsibilityChange:
                    break

                def make(tau: float) -> WitnessCertificate:
                    return nonsorting_witness(set_map, path, 0.0, 1.0, tau, metric=metric)

            cert = None
            for tau in taus:
                try:
                    cert = make(tau)
                except (WitnessError, WitnessVerificationError):
                    cert = None
                    continue
                ratios[tau].append(cert.ratio)
            if cert is not None and verify_certificate(cert, set_map, metric):
                report.certificates.append(cert)
    except (TransportError, NotInFError) as exc:
        report.incomplete = True
        report.error = f"{type(exc).__name__}: {exc}"
    report.ladder = _ladder_rows(taus, ratios)
    smallest = ratios[taus[-1]]
    if smallest:
        report.max_ratio = float(np.max(smallest))
        report.detected = report.max_ratio > DETECTION_RATIO
    return report


def certify_discontinuity(
    external: ExternalMap,
    metric: MetricSpec | None,
    anchors: int,
    tau_ladder: Sequence[float],
    seed: int,
    *,
    membership_samples: int = 100,
    classify_samples: int = 200,
) -> CertifyReport:
    """Probe membership in F, classify, then hunt for witnesses on an open external map."""
    metric = metric or MetricSpec.identity(external.d)
    try:
        membership = probe_membership(external, membership_samples, seed)
    except TransportError as exc:
        return CertifyReport(
            external.identity, {"in_f": None}, incomplete=True, error=f"{type(exc).__name__}: {exc}", seed=seed
        )
    if not membership.in_f:
        return CertifyReport(external.identity, membership.to_dict(), seed=seed)
    return certify_set_map(
        ExternalSetMap(external),
        external.d,
        external.n,
        metric,
        anchors,
        tau_ladder,
        seed,
        identity=external.identity,
        membership=membership.to_dict(),
        classify_samples=classify_samples,
    )
