"""Harness mechanics plus one live smoke run against a self-hosted gateway."""

from __future__ import annotations

import csv
import errno

import httpx
import pytest

from rentchain.bench import (
    CONNECTION_RESET,
    SCENARIO_STEPS,
    BenchError,
    EmptyRun,
    MetricsRow,
    PlatformUnreachable,
    RunConfig,
    Scenario,
    classify_failure,
    export_report,
    run_scenario,
)

PAPER_PUBLISH_ORDER = (
    "CreateContractAsset",
    "CreatePropertyAsset",
    "registerPropertyPhoto",
    "getUserById",
    "registerAdvertise",
)
PAPER_PROPOSAL_ORDER = ("CreateProposal", "updateUserById", "updateAdvertiseById")


def test_scenario_step_order_matches_measured_processes():
    assert SCENARIO_STEPS["PUBLISH_ADVERTISEMENT"] == PAPER_PUBLISH_ORDER
    assert SCENARIO_STEPS["SUBMIT_PROPOSAL"] == PAPER_PROPOSAL_ORDER
    assert Scenario("PUBLISH_ADVERTISEMENT").steps == PAPER_PUBLISH_ORDER


def test_unknown_scenario_rejected():
    with pytest.raises(BenchError):
        Scenario("WARP_SPEED")


def test_run_config_requires_increasing_levels():
    RunConfig(vu_levels=[1, 5, 10], repeats=1, duration=1.0)
    with pytest.raises(BenchError):
        RunConfig(vu_levels=[5, 5], repeats=1, duration=1.0)
    with pytest.raises(BenchError):
        RunConfig(vu_levels=[10, 1], repeats=1, duration=1.0)
    with pytest.raises(BenchError):
        RunConfig(vu_levels=[], repeats=1, duration=1.0)


def test_classify_failure_detects_connection_reset():
    assert classify_failure(ConnectionResetError()) == CONNECTION_RESET
    assert classify_failure(OSError(errno.ECONNRESET, "reset by peer")) == CONNECTION_RESET
    wrapped = httpx.ConnectError("boom")
    wrapped.__cause__ = ConnectionResetError()
    assert classify_failure(wrapped) == CONNECTION_RESET
    assert classify_failure(httpx.ConnectError("refused")) == "transport_error"
    assert classify_failure(ValueError("x")) == "ValueError"


def _rows():
    row = MetricsRow(
        scenario="PUBLISH_ADVERTISEMENT",
        vu=1,
        requests_sent=10.0,
        avg_response_ms=12.5,
        throughput_rps=5.0,
        error_rate_pct=0.0,
        error_classes={},
    )
    summary = MetricsRow(
        scenario="PUBLISH_ADVERTISEMENT",
        vu=0,
        requests_sent=10.0,
        avg_response_ms=12.5,
        throughput_rps=5.0,
        error_rate_pct=0.0,
        error_classes={CONNECTION_RESET: 1},
    )
    return [row], [summary]


def test_export_report_shape_and_reproducibility(tmp_path):
    rows, summaries = _rows()
    csv_path, summary_path = export_report(rows, summaries, tmp_path / "out")
    with csv_path.open() as fh:
        parsed = list(csv.reader(fh))
    assert parsed[0] == [
        "scenario",
        "vu",
        "requests_sent",
        "avg_response_ms",
        "throughput_rps",
        "error_rate_pct",
        "connection_resets",
    ]
    assert len(parsed) == 2
    text = summary_path.read_text()
    for column in ("Avg. Req. Sent", "Avg. Throughput", "Avg. Resp. Time", "Avg. Error Rate"):
        assert column in text
    assert "connection_reset=1" in text
    first = (csv_path.read_bytes(), summary_path.read_bytes())
    export_report(rows, summaries, tmp_path / "out")
    assert (csv_path.read_bytes(), summary_path.read_bytes()) == first


def test_export_report_empty_run(tmp_path):
    with pytest.raises(EmptyRun):
        export_report([], [], tmp_path / "out")


def test_unreachable_platform(tmp_path):
    config = RunConfig(vu_levels=[1], repeats=1, duration=0.5)
    with pytest.raises(PlatformUnreachable):
        run_scenario("PUBLISH_ADVERTISEMENT", config, "http://127.0.0.1:1")


@pytest.mark.slow
def test_single_vu_smoke_run_zero_errors(tmp_path):
    """One VU on an idle platform: every iteration succeeds end to end."""
    from rentchain.gateway import Platform, PlatformConfig
    from rentchain.server import BackgroundServer

    platform = Platform(PlatformConfig(data_dir=str(tmp_path / "plat")))
    with BackgroundServer(platform) as server:
        config = RunConfig(vu_levels=[1], repeats=1, duration=1.0)
        rows, summary = run_scenario("SUBMIT_PROPOSAL", config, server.base_url)
    assert len(rows) == 1
    assert rows[0].error_rate_pct == 0.0
    assert rows[0].throughput_rps > 0
    assert rows[0].requests_sent > 0
    # request accounting: sent = successes + failures, and throughput = sent/duration
    failures = sum(rows[0].error_classes.values())
    assert failures == 0
    assert rows[0].throughput_rps == pytest.approx(rows[0].requests_sent / 1.0)
    assert summary.error_classes == {}
