"""Concurrent-load benchmark harness for the gateway endpoints.

Reproduces the scaling experiment: for each operation and each request
count n, fire n simultaneously in-flight requests, record the wall time
until the whole batch completes, take the best over interleaved trials,
and fit a least-squares line to the (n, wall_time) series. Throughput is
1/slope. Local-hash (lh) vs server-hash (sh) variants differ only in
where canonical hashing runs.
"""

from __future__ import annotations

import asyncio
import json
import threading
import time
import uuid
from dataclasses import dataclass, field

import httpx

from .. import credential, crypto
from ..credential import Certificate, Claim
from ..encoding import b64url_encode
from ..errors import BenchAborted, InsufficientData
from ..qrcodec import KIND_PRESENTATION, QrPayload, encode

ALL_OPERATIONS = ("ping", "upload", "issue_lh", "issue_sh", "verify_lh", "verify_sh")
DEFAULT_N_VALUES = (1, 10, 25, 50, 75, 100)

BENCH_CLAIMS = [
    ("test_type", "serology-IgG"),
    ("result", "positive"),
    ("antibody_type", "IgG"),
    ("antibody_level", "7.2"),
]

# stand-in ID photo; issuance uploads it inside the certificate record,
# while presentations keep it committed-but-unrevealed (QR size limit)
BENCH_PHOTO = bytes(range(256)) * 16


@dataclass(frozen=True)
class TimingSample:
    operation: str
    parallel_requests: int
    trial: int
    wall_time: float


@dataclass
class LinearFit:
    slope: float
    intercept: float
    r_squared: float
    zero_variance: bool = False


def fit_linear(series: list[tuple[float, float]]) -> LinearFit:
    """Ordinary least squares over (n, wall_time) pairs."""
    if len(series) < 3:
        raise InsufficientData("linear fit needs at least 3 points")
    xs = [p[0] for p in series]
    ys = [p[1] for p in series]
    n = len(series)
    mean_x = sum(xs) / n
    mean_y = sum(ys) / n
    sxx = sum((x - mean_x) ** 2 for x in xs)
    sxy = sum((x - mean_x) * (y - mean_y) for x, y in series)
    syy = sum((y - mean_y) ** 2 for y in ys)
    if sxx == 0:
        raise InsufficientData("x values are all identical")
    slope = sxy / sxx
    intercept = mean_y - slope * mean_x
    if syy == 0:
        # constant series: perfect (flat) fit by definition
        return LinearFit(slope=0.0, intercept=mean_y, r_squared=1.0, zero_variance=True)
    ss_res = sum((y - (slope * x + intercept)) ** 2 for x, y in series)
    return LinearFit(slope=slope, intercept=intercept, r_squared=1.0 - ss_res / syy)


@dataclass
class BenchReport:
    samples: list[TimingSample] = field(default_factory=list)
    series: dict[str, list[tuple[int, float]]] = field(default_factory=dict)
    fits: dict[str, LinearFit] = field(default_factory=dict)
    ops_per_sec: dict[str, float] = field(default_factory=dict)
    relative_differences: dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "series": {op: [[n, t] for n, t in pts] for op, pts in self.series.items()},
            "fits": {
                op: {
                    "slope": f.slope,
                    "intercept": f.intercept,
                    "r_squared": f.r_squared,
                    "zero_variance": f.zero_variance,
                }
                for op, f in self.fits.items()
            },
            "ops_per_sec": self.ops_per_sec,
            "relative_differences": self.relative_differences,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_csv(self) -> str:
        lines = ["operation,n,trial,wall_time_s"]
        for s in self.samples:
            lines.append(
                f"{s.operation},{s.parallel_requests},{s.trial},{s.wall_time:.6f}"
            )
        return "\n".join(lines) + "\n"


class BenchClient:
    """Drives one gateway instance through the six benchmark operations."""

    def __init__(self, base_url: str, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.http = httpx.Client(
            base_url=self.base_url,
            timeout=timeout,
            limits=httpx.Limits(max_connections=150, max_keepalive_connections=150),
        )
        self.loop = asyncio.new_event_loop()
        self.ahttp = httpx.AsyncClient(
            base_url=self.base_url,
            timeout=timeout,
            limits=httpx.Limits(max_connections=150, max_keepalive_connections=150),
        )
        self._cert_pool: list[tuple[Certificate, list[Claim]]] = []
        self._pool_lock = threading.Lock()
        self._verify_qr: str | None = None
        self._verify_digest: bytes | None = None
        self._issuer_key: crypto.KeyPair | None = None
        self._holder_key: crypto.KeyPair | None = None
        self._issuer_did: crypto.Did | None = None
        self._holder_did: crypto.Did | None = None

    # -- fixtures ------------------------------------------------------

    def setup(self, expected_issues: int, warmup_n: int = 0) -> None:
        try:
            self.http.get("/ping").raise_for_status()
        except (httpx.HTTPError, OSError) as exc:
            raise BenchAborted(f"gateway unreachable at {self.base_url}: {exc}") from exc

        if warmup_n:
            # open the connection pool up front so the first timed batch
            # does not pay per-connection setup costs
            for _ in range(2):
                self.timed_batch("ping", warmup_n)

        self._issuer_key = crypto.generate_keypair()
        self._holder_key = crypto.generate_keypair()
        self._issuer_did = crypto.fresh_did()
        self._holder_did = crypto.fresh_did()
        for did, key in (
            (self._issuer_did, self._issuer_key),
            (self._holder_did, self._holder_key),
        ):
            self.http.post(
                "/api/register-key",
                json={"did": str(did), "public_key_hex": key.public_key.hex()},
            ).raise_for_status()
        self.http.post("/api/pods", json={"owner_did": str(self._holder_did)}).raise_for_status()

        # one pre-signed certificate per issue request, plus one for verify
        for _ in range(expected_issues + 1):
            self._cert_pool.append(self._make_certificate())

        # anchor one certificate so verify has a confirmed fixture
        cert, claims = self._cert_pool.pop()
        resp = self.http.post(
            "/issue", params={"hash": "server"}, json={"certificate": cert.to_dict()}
        )
        resp.raise_for_status()
        anchor_url = resp.json()["anchor_url"]
        self._wait_confirmed(str(cert.id))
        import dataclasses

        cert = dataclasses.replace(cert, anchor_url=anchor_url)
        pres = credential.make_presentation(
            cert, claims, {name for name, _ in BENCH_CLAIMS}
        )
        self._verify_qr = encode(
            QrPayload(kind=KIND_PRESENTATION, body=pres.to_dict(), anchor_url=anchor_url)
        )
        self._verify_digest = credential.certificate_digest(cert)

    def _wait_confirmed(self, cert_id: str, timeout: float = 10.0) -> None:
        deadline = time.monotonic() + timeout
        while time.monotonic() < deadline:
            if self.http.get(f"/anchor/{cert_id}").status_code == 200:
                return
            time.sleep(0.05)
        raise BenchAborted(f"anchor for {cert_id} never confirmed")

    def _make_certificate(self) -> tuple[Certificate, list[Claim]]:
        cert, claims = credential.new_certificate(
            self._issuer_did, self._holder_did, list(BENCH_CLAIMS), photo=BENCH_PHOTO
        )
        cert = credential.issuer_sign(cert, self._issuer_key)
        cert = credential.holder_countersign(cert, self._holder_key)
        return cert, claims

    def _next_cert(self) -> tuple[Certificate, list[Claim]]:
        with self._pool_lock:
            if not self._cert_pool:
                self._cert_pool.append(self._make_certificate())
            return self._cert_pool.pop()

    # -- one request per operation -------------------------------------

    async def do_ping(self) -> None:
        (await self.ahttp.get("/ping")).raise_for_status()

    async def do_upload(self) -> None:
        resp = await self.ahttp.put(
            "/upload",
            json={
                "owner_did": str(self._holder_did),
                "path": f"bench/{uuid.uuid4().hex}",
                "data": b64url_encode(b"\x42" * 2048),
            },
        )
        resp.raise_for_status()

    async def do_issue(self, local_hash: bool) -> None:
        cert, claims = self._next_cert()
        body: dict = {
            "certificate": cert.to_dict(),
            "record": {
                "certificate": cert.to_dict(),
                "claims": [c.to_dict() for c in claims],
            },
        }
        params = {"hash": "server"}
        if local_hash:
            body["digest_hex"] = credential.certificate_digest(cert).hex()
            params = {"hash": "local"}
        (await self.ahttp.post("/issue", params=params, json=body)).raise_for_status()

    async def do_verify(self, local_hash: bool) -> None:
        body: dict = {"qr_text": self._verify_qr}
        params = {"hash": "server"}
        if local_hash:
            body["local_digest_hex"] = self._verify_digest.hex()
            params = {"hash": "local"}
        (await self.ahttp.post("/verify", params=params, json=body)).raise_for_status()

    def request_fn(self, operation: str):
        return {
            "ping": self.do_ping,
            "upload": self.do_upload,
            "issue_lh": lambda: self.do_issue(local_hash=True),
            "issue_sh": lambda: self.do_issue(local_hash=False),
            "verify_lh": lambda: self.do_verify(local_hash=True),
            "verify_sh": lambda: self.do_verify(local_hash=False),
        }[operation]

    # -- batch timing --------------------------------------------------

    def timed_batch(self, operation: str, n: int) -> float:
        """Wall time for n simultaneously in-flight requests."""
        fn = self.request_fn(operation)

        async def one() -> None:
            try:
                await fn()
            except httpx.TransportError:
                # one retry for stale keep-alive connections
                await fn()

        async def batch() -> float:
            start = time.perf_counter()
            await asyncio.gather(*(one() for _ in range(n)))
            return time.perf_counter() - start

        try:
            return self.loop.run_until_complete(batch())
        except httpx.HTTPError as exc:
            raise BenchAborted(f"batch of {n} {operation} failed: {exc}") from exc

    def close(self) -> None:
        self.http.close()
        self.loop.run_until_complete(self.ahttp.aclose())
        self.loop.close()


def bench_run(
    base_url: str,
    operations: tuple[str, ...] = ALL_OPERATIONS,
    n_values: tuple[int, ...] = DEFAULT_N_VALUES,
    trials: int = 3,
) -> BenchReport:
    bad = [op for op in operations if op not in ALL_OPERATIONS]
    if bad:
        raise ValueError(f"unknown operations: {bad}")
    if any(n < 1 or n > 100 for n in n_values):
        raise ValueError("n values must lie in [1, 100]")
    if trials < 1:
        raise ValueError("at least one trial required")

    issue_ops = [op for op in operations if op.startswith("issue")]
    expected_issues = len(issue_ops) * sum(n_values) * trials
    client = BenchClient(base_url)
    report = BenchReport()
    try:
        client.setup(expected_issues, warmup_n=max(n_values))
        # trials are interleaved across operations and n values (each trial
        # is one full sweep) so a transient load spike cannot skew every
        # measurement of any single operation or n; best-of-trials then
        # estimates intrinsic cost, as in timeit
        walls: dict[str, dict[int, list[float]]] = {
            op: {n: [] for n in n_values} for op in operations
        }
        for trial in range(trials):
            for operation in operations:
                for n in sorted(n_values):
                    wall = client.timed_batch(operation, n)
                    walls[operation][n].append(wall)
                    report.samples.append(TimingSample(operation, n, trial, wall))
        for operation in operations:
            points = [(n, min(walls[operation][n])) for n in sorted(n_values)]
            report.series[operation] = points
            fit = fit_linear([(float(n), t) for n, t in points])
            report.fits[operation] = fit
            report.ops_per_sec[operation] = (
                1.0 / fit.slope if fit.slope > 0 else float("inf")
            )
    finally:
        client.close()

    def slope(op: str) -> float | None:
        fit = report.fits.get(op)
        return fit.slope if fit else None

    for fast, slow, label in (
        ("issue_lh", "issue_sh", "issue_sh_vs_lh"),
        ("verify_lh", "verify_sh", "verify_sh_vs_lh"),
    ):
        a, b = slope(fast), slope(slow)
        if a and b:
            report.relative_differences[label] = (b - a) / a
    return report
