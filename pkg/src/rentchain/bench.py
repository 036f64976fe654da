"""Closed-loop load-testing harness for the two heaviest platform processes.

Each virtual user is a thread issuing one scenario iteration after another
(request, await, repeat) for a fixed duration. Levels run the configured VU
counts in increasing order, each repeated and averaged, producing one CSV row
per level plus a four-column summary (requests sent, throughput, response
time, error rate). Failures are classified, with connection-reset errors
counted separately from other transport and HTTP failures.
"""

from __future__ import annotations

import csv
import errno
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional
from uuid import uuid4

import httpx

PUBLISH_ADVERTISEMENT = "PUBLISH_ADVERTISEMENT"
SUBMIT_PROPOSAL = "SUBMIT_PROPOSAL"

# gateway functions each scenario drives, in the measured order
SCENARIO_STEPS = {
    PUBLISH_ADVERTISEMENT: (
        "CreateContractAsset",
        "CreatePropertyAsset",
        "registerPropertyPhoto",
        "getUserById",
        "registerAdvertise",
    ),
    SUBMIT_PROPOSAL: (
        "CreateProposal",
        "updateUserById",
        "updateAdvertiseById",
    ),
}

CONNECTION_RESET = "connection_reset"


class BenchError(Exception):
    pass


class EmptyRun(BenchError):
    pass


class PlatformUnreachable(BenchError):
    pass


@dataclass
class RunConfig:
    vu_levels: list[int] = field(default_factory=lambda: [1, 10, 20, 40, 60, 80, 100])
    repeats: int = 10
    duration: float = 60.0  # seconds per run; desk-scale default is 5

    def __post_init__(self):
        if not self.vu_levels or any(
            b <= a for a, b in zip(self.vu_levels, self.vu_levels[1:])
        ):
            raise BenchError("vu_levels must be non-empty and strictly increasing")
        if self.repeats < 1 or self.duration <= 0:
            raise BenchError("repeats must be >= 1 and duration positive")


@dataclass
class MetricsRow:
    scenario: str
    vu: int
    requests_sent: float
    avg_response_ms: float
    throughput_rps: float
    error_rate_pct: float
    error_classes: dict[str, int] = field(default_factory=dict)

    @property
    def connection_resets(self) -> int:
        return self.error_classes.get(CONNECTION_RESET, 0)


def classify_failure(exc: Exception) -> str:
    """Name the failure class; connection resets get their own bucket."""
    cause: Optional[BaseException] = exc
    while cause is not None:
        if isinstance(cause, ConnectionResetError):
            return CONNECTION_RESET
        if isinstance(cause, OSError) and cause.errno == errno.ECONNRESET:
            return CONNECTION_RESET
        cause = cause.__cause__ or cause.__context__
    if isinstance(exc, httpx.TimeoutException):
        return "timeout"
    if isinstance(exc, httpx.TransportError):
        return "transport_error"
    return type(exc).__name__


class Scenario:
    """One benchmarked process: a setup phase and a repeatable iteration."""

    def __init__(self, name: str):
        if name not in SCENARIO_STEPS:
            raise BenchError(f"unknown scenario: {name} (choose from {sorted(SCENARIO_STEPS)})")
        self.name = name
        self.steps = SCENARIO_STEPS[name]
        self._ad_id: Optional[str] = None

    # -- seeding ------------------------------------------------------------------

    @staticmethod
    def _register(client: httpx.Client, user_id: str) -> dict:
        token = client.post("/auth/token", json={"user_id": user_id}).json()["token"]
        headers = {"Authorization": f"Bearer {token}"}
        client.post("/signup", headers=headers)  # 409 on reruns is fine
        client.put(
            "/me",
            headers=headers,
            json={
                "personal": {
                    "name": f"Bench {user_id}",
                    "email": f"{user_id}@bench.local",
                    "contact": "+000",
                    "identification": f"BENCH-{user_id}",
                }
            },
        )
        return headers

    @staticmethod
    def _publish_body() -> dict:
        return {
            "property": {
                "kind": "APARTMENT",
                "typology": "T2",
                "address_details": f"Bench Street {uuid4().hex}",
            },
            "contract": {
                "term": "FIXED_TERM",
                "initial_date": "2024-03-01",
                "final_date": "2024-09-01",
                "conditions": "bench contract",
                "rent_amount": 750_000000,
            },
            "photos": [],
        }

    def setup(self, base_url: str, max_vus: int) -> list[dict]:
        """Create one platform user per VU; proposals also need a shared ad."""
        with httpx.Client(base_url=base_url, timeout=30.0) as client:
            try:
                client.post("/auth/token", json={"user_id": "bench-probe"}).raise_for_status()
            except httpx.HTTPError as exc:
                raise PlatformUnreachable(f"platform not reachable at {base_url}: {exc}")
            role = "landlord" if self.name == PUBLISH_ADVERTISEMENT else "tenant"
            headers = [
                self._register(client, f"bench-{role}-{i}") for i in range(max_vus)
            ]
            if self.name == SUBMIT_PROPOSAL:
                seed = self._register(client, "bench-seed-landlord")
                response = client.post("/advertisements", headers=seed, json=self._publish_body())
                response.raise_for_status()
                self._ad_id = response.json()["advertise_id"]
            return headers

    # -- one closed-loop iteration ---------------------------------------------------

    def iterate(self, client: httpx.Client, headers: dict, vu_index: int, seq: int) -> None:
        if self.name == PUBLISH_ADVERTISEMENT:
            response = client.post("/advertisements", headers=headers, json=self._publish_body())
        else:
            response = client.post(
                f"/advertisements/{self._ad_id}/proposals",
                headers=headers,
                json={"amount": 500_000000 + vu_index * 1000 + seq},
            )
        if response.status_code >= 400:
            raise httpx.HTTPStatusError(
                f"http_{response.status_code}", request=response.request, response=response
            )


def _vu_loop(
    scenario: Scenario,
    base_url: str,
    headers: dict,
    vu_index: int,
    deadline: float,
    results: list,
    lock: threading.Lock,
):
    latencies: list[float] = []
    failures: dict[str, int] = {}
    seq = 0
    with httpx.Client(base_url=base_url, timeout=30.0) as client:
        while time.perf_counter() < deadline:
            started = time.perf_counter()
            try:
                scenario.iterate(client, headers, vu_index, seq)
                latencies.append((time.perf_counter() - started) * 1000.0)
            except httpx.HTTPStatusError as exc:
                failures[f"http_{exc.response.status_code}"] = (
                    failures.get(f"http_{exc.response.status_code}", 0) + 1
                )
            except Exception as exc:
                name = classify_failure(exc)
                failures[name] = failures.get(name, 0) + 1
            seq += 1
    with lock:
        results.append((latencies, failures))


def _run_once(scenario: Scenario, base_url: str, headers: list[dict], vus: int, duration: float):
    results: list = []
    lock = threading.Lock()
    deadline = time.perf_counter() + duration
    threads = [
        threading.Thread(
            target=_vu_loop,
            args=(scenario, base_url, headers[i], i, deadline, results, lock),
            daemon=True,
        )
        for i in range(vus)
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    latencies = [ms for lats, _ in results for ms in lats]
    failures: dict[str, int] = {}
    for _, fl in results:
        for name, count in fl.items():
            failures[name] = failures.get(name, 0) + count
    failed = sum(failures.values())
    sent = len(latencies) + failed
    return {
        "sent": sent,
        "failed": failed,
        "avg_ms": statistics.fmean(latencies) if latencies else 0.0,
        "throughput": sent / duration,
        "error_rate": (failed / sent * 100.0) if sent else 0.0,
        "failures": failures,
    }


def run_scenario(
    scenario_name: str, config: RunConfig, base_url: str
) -> tuple[list[MetricsRow], MetricsRow]:
    """Run every VU level `repeats` times; per-level averages plus a summary row."""
    scenario = Scenario(scenario_name)
    headers = scenario.setup(base_url, max(config.vu_levels))
    rows: list[MetricsRow] = []
    for vus in config.vu_levels:
        runs = [
            _run_once(scenario, base_url, headers, vus, config.duration)
            for _ in range(config.repeats)
        ]
        error_classes: dict[str, int] = {}
        for r in runs:
            for name, count in r["failures"].items():
                error_classes[name] = error_classes.get(name, 0) + count
        rows.append(
            MetricsRow(
                scenario=scenario_name,
                vu=vus,
                requests_sent=statistics.fmean(r["sent"] for r in runs),
                avg_response_ms=statistics.fmean(r["avg_ms"] for r in runs),
                throughput_rps=statistics.fmean(r["throughput"] for r in runs),
                error_rate_pct=statistics.fmean(r["error_rate"] for r in runs),
                error_classes=error_classes,
            )
        )
    summary_classes: dict[str, int] = {}
    for row in rows:
        for name, count in row.error_classes.items():
            summary_classes[name] = summary_classes.get(name, 0) + count
    summary = MetricsRow(
        scenario=scenario_name,
        vu=0,
        requests_sent=statistics.fmean(r.requests_sent for r in rows),
        avg_response_ms=statistics.fmean(r.avg_response_ms for r in rows),
        throughput_rps=statistics.fmean(r.throughput_rps for r in rows),
        error_rate_pct=statistics.fmean(r.error_rate_pct for r in rows),
        error_classes=summary_classes,
    )
    return rows, summary


def export_report(
    rows: list[MetricsRow], summaries: list[MetricsRow], out_dir: Path
) -> tuple[Path, Path]:
    """Write metrics.csv (one row per scenario and VU level) and summary.txt."""
    if not rows:
        raise EmptyRun("no metrics rows to export")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "metrics.csv"
    with csv_path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "scenario",
                "vu",
                "requests_sent",
                "avg_response_ms",
                "throughput_rps",
                "error_rate_pct",
                "connection_resets",
            ]
        )
        for row in rows:
            writer.writerow(
                [
                    row.scenario,
                    row.vu,
                    f"{row.requests_sent:.2f}",
                    f"{row.avg_response_ms:.2f}",
                    f"{row.throughput_rps:.2f}",
                    f"{row.error_rate_pct:.2f}",
                    row.connection_resets,
                ]
            )
    lines = []
    for summary in summaries:
        lines.append(f"{summary.scenario} - performance summary")
        header = (
            f"{'Avg. Req. Sent':>16} | {'Avg. Throughput':>16} | "
            f"{'Avg. Resp. Time':>16} | {'Avg. Error Rate':>16}"
        )
        lines.append(header)
        lines.append("-" * len(header))
        lines.append(
            f"{summary.requests_sent:>16.0f} | {summary.throughput_rps:>10.2f} req/s | "
            f"{summary.avg_response_ms:>13.2f} ms | {summary.error_rate_pct:>14.2f} %"
        )
        if summary.error_classes:
            detail = ", ".join(f"{k}={v}" for k, v in sorted(summary.error_classes.items()))
            lines.append(f"failures by class: {detail}")
        lines.append("")
    summary_path = out_dir / "summary.txt"
    summary_path.write_text("\n".join(lines))
    return csv_path, summary_path
