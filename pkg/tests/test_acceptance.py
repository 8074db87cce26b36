"""Acceptance criteria, one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s`. The end-to-end demo test
is tick-driven and takes about 30 seconds of wall clock by design.
"""
import csv
import hashlib
import json
import random
import signal
import socket
import subprocess
import sys
import time
from contextlib import contextmanager
from pathlib import Path

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cardiotel.gateway import GatewayClient, GatewayConfig, GatewayServer
from cardiotel.model import ThresholdConfig, VitalStatus, classify_spo2
from cardiotel.recorder import WorkbookConfig, open_workbook, parse_export
from cardiotel.simulator import DeviceRunner, ScenarioEvent, ScenarioScript

from .conftest import TABLE3_CSV, sample_from_row
from .test_model import EXPECTED_DIFFERENCES, EXPECTED_SUMMARY
from .test_simulator import BASELINE

TABLE3_SHA256 = "ef5e52dda2b04644c3102b377b8d3b86da1a9d2a79cbb2eb6eac49e4e985898f"


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"\nACCEPTANCE {name}: FAIL")
        raise
    print(f"\nACCEPTANCE {name}: PASS")


def test_golden_table_reproduction(tmp_path):
    with criterion("golden-table-reproduction"):
        assert hashlib.sha256(TABLE3_CSV.read_bytes()).hexdigest() == TABLE3_SHA256

        out = tmp_path / "out"
        started = time.perf_counter()
        proc = subprocess.run(
            [sys.executable, "-m", "cardiotel.cli", "validate",
             "--pairs", str(TABLE3_CSV), "--out", str(out)],
            capture_output=True, text=True,
        )
        elapsed = time.perf_counter() - started
        assert proc.returncode == 0, proc.stderr
        assert elapsed < 1.0, f"validate took {elapsed:.2f}s"

        with open(out / "differences.csv", newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["ID", "SpO2", "Temp", "S_BP", "D_BP", "HR", "ECG", "P", "Q", "R", "S", "T"]
        assert len(rows) == 21
        checked = 0
        for cells in rows[1:]:
            expected = EXPECTED_DIFFERENCES[cells[0]]
            assert tuple(int(c) for c in cells[1:]) == expected, f"patient {cells[0]}"
            checked += len(cells) - 1
        assert checked == 220  # every difference integer matched exactly

        with open(out / "summary.csv", newline="") as fh:
            summary_rows = list(csv.reader(fh))
        assert summary_rows[0] == ["Metric", "Total", "Exact", "Incorrect", "Near"]
        assert len(summary_rows) == 7
        count_checked = 0
        for label, total, exact, incorrect, near in summary_rows[1:]:
            assert (int(total), int(exact), int(incorrect), int(near)) == EXPECTED_SUMMARY[label], label
            count_checked += 3
        assert count_checked == 18


def test_spo2_branch_equivalence():
    with criterion("spo2-branch-equivalence"):
        cfg = ThresholdConfig()
        started = time.perf_counter()
        for x in range(1, 100):
            got = classify_spo2(x, cfg)
            if x > 94 and x < 100:
                assert got is VitalStatus.NORMAL, x
            elif x > 0 and x < 95:
                assert got is VitalStatus.ABNORMAL, x
            else:
                raise AssertionError(f"{x} matched neither firmware branch")
        elapsed = time.perf_counter() - started
        assert classify_spo2(0, cfg) is VitalStatus.FAULT
        assert classify_spo2(100, cfg) is VitalStatus.NORMAL
        assert elapsed < 0.001, f"exhaustive check took {elapsed * 1000:.3f}ms"


def test_alert_byte_exactness(tmp_path, table3_pairs):
    with criterion("alert-byte-exactness"):
        server = GatewayServer(GatewayConfig(data_dir=tmp_path / "data", port=0)).start()
        try:
            token = server.devices.provision("devx")
            host, port = server.address
            client = GatewayClient(host, port)
            client.register("Op", "op@example.com", "1", "password1", "password1")
            utok = client.login("op@example.com", "password1")["token"]
            path = "/deviceData/devx/Notification/Oxygen_Level"

            _, kit, _ = table3_pairs[0]
            low = sample_from_row("Kit", kit.patient_id, [90, 100, 120, 90, 70, 254, 450, 119, 701, 88, 76])
            client.ingest(low, token)
            value = client.get(path, utok)["value"]
            assert value.encode("utf-8") == b"AB_Normal"

            high = sample_from_row("Kit", kit.patient_id, [96, 100, 120, 90, 70, 254, 450, 119, 701, 88, 76])
            client.ingest(high, token)
            value = client.get(path, utok)["value"]
            assert value.encode("utf-8") == b"Normal"
            client.close()
        finally:
            server.stop()


def test_end_to_end_demo(tmp_path):
    with criterion("end-to-end-demo"):
        ticks = 200
        out = tmp_path / "demo"
        proc = subprocess.run(
            [sys.executable, "-m", "cardiotel.cli", "demo",
             "--ticks", str(ticks), "--tick-ms", "150", "--out", str(out)],
            capture_output=True, text=True, timeout=120,
        )
        assert proc.returncode == 0, proc.stderr + proc.stdout

        with open(out / "alerts.csv", newline="") as fh:
            alerts = list(csv.DictReader(fh))
        assert any(a["metric"] == "Oxygen_Level" for a in alerts), "no SpO2 alert logged"

        header, rows = parse_export(out / "workbook.csv")
        assert header == ["ts"] + [f"ch{i}" for i in range(1, 11)]
        assert len(rows) == min(ticks, 2000)
        assert all(len(r.channels) == 10 for r in rows)
        deltas = [b.row_ts - a.row_ts for a, b in zip(rows, rows[1:])]
        assert all(0 <= d <= 300 for d in deltas), f"tick deltas out of band: {sorted(set(deltas))[:5]}..."
        assert rows[-1].row_ts == max(r.row_ts for r in rows)  # newest last


def _start_gateway_proc(data_dir: Path) -> tuple[subprocess.Popen, str, int]:
    config_path = data_dir / "gateway.json"
    config_path.write_text(json.dumps({
        "host": "127.0.0.1", "port": 0, "data_dir": str(data_dir / "store"),
    }))
    proc = subprocess.Popen(
        [sys.executable, "-m", "cardiotel.cli", "serve", "--config", str(config_path)],
        stdout=subprocess.PIPE, stderr=subprocess.PIPE, text=True,
    )
    line = proc.stdout.readline().strip()
    host, _, port = line.rpartition(" ")[2].rpartition(":")
    return proc, host, int(port)


def test_durability_under_kill(tmp_path):
    with criterion("durability-under-kill"):
        for run in range(10):
            rng = random.Random(1000 + run)
            run_dir = tmp_path / f"run{run}"
            run_dir.mkdir()
            from cardiotel.gateway.auth import DeviceTokenStore

            token = DeviceTokenStore(run_dir / "store" / "tokens.json").provision("dev1")

            proc, host, port = _start_gateway_proc(run_dir)
            try:
                client = GatewayClient(host, port)
                n_writes = rng.randint(50, 80)
                acked: dict[str, object] = {}
                max_seq = 0
                for i in range(n_writes):
                    path = f"/deviceData/dev1/vitals/m{rng.randint(0, 15)}"
                    value = rng.choice([rng.randint(-999, 999), f"v{rng.randint(0, 10**6)}"])
                    ack = client.set(path, value, token)
                    acked[path] = value
                    max_seq = ack["seq"]
                client.close()
            finally:
                proc.kill()  # SIGKILL mid-stream: no cleanup, no snapshot
                proc.wait(timeout=10)

            proc2, host2, port2 = _start_gateway_proc(run_dir)
            try:
                client2 = GatewayClient(host2, port2)
                for path, value in acked.items():
                    got = client2.get(path, token)
                    assert got.get("value") == value, f"run {run}: lost {path}"
                new_ack = client2.set("/deviceData/dev1/vitals/post", 1, token)
                assert new_ack["seq"] > max_seq, "seq watermark regressed"
                client2.close()
            finally:
                proc2.send_signal(signal.SIGTERM)
                proc2.wait(timeout=10)


def test_simulator_determinism():
    with criterion("simulator-determinism"):
        script = ScenarioScript(
            patient_id="p1", seed=424242, baseline=dict(BASELINE),
            jitter={"hr": 3, "spo2": 1, "temp": 0.3},
            events=(ScenarioEvent(onset_ms=1000, duration_ms=30_000, metric="spo2",
                                  target=88, ramp_ms=1500),),
        )

        class Endpoint:
            def __init__(self):
                self.lines = []

            def factory(self):
                return self

            def send_line(self, line):
                self.lines.append(line)
                return {"ok": True}

            def close(self):
                pass

        transcripts = []
        for _ in range(2):
            endpoint = Endpoint()
            DeviceRunner(script, endpoint.factory, token="t", tick_ms=150,
                         realtime=False).run(50)
            transcripts.append(b"".join(endpoint.lines))
        assert transcripts[0] == transcripts[1]
        assert len(transcripts[0]) > 0


@settings(max_examples=100, deadline=None)
@given(
    n=st.integers(min_value=0, max_value=70),
    capacity=st.integers(min_value=1, max_value=25),
    data=st.data(),
)
def _ring_law_property(tmp_path_factory, n, capacity, data):
    tmp = tmp_path_factory.mktemp("accept-ring")
    wb = open_workbook(WorkbookConfig(data_rows=capacity, data_channels=2), tmp / "w")
    from cardiotel.recorder import WorkbookRow

    appended = []
    for i in range(n):
        cells = (data.draw(st.integers(-100, 100)), data.draw(st.one_of(st.none(), st.integers(0, 9))))
        row = WorkbookRow(i * 150, cells)
        wb.append_row(row)
        appended.append(row)
    out = tmp / "out.csv"
    wb.export_csv(out)
    _, exported = parse_export(out)
    assert exported == appended[-min(n, capacity):] if n else exported == []
    wb.close()


def test_ring_buffer_law(tmp_path_factory):
    with criterion("ring-buffer-law"):
        _ring_law_property(tmp_path_factory)
