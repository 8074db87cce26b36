"""Single-process demo: gateway + scripted device + live recording.

Brings up every moving part against a desaturating patient scenario,
records ten vitals channels into a workbook, and dumps the alert log.
Each stage is tagged so a failure names what broke.
"""
from __future__ import annotations

import json
import time
from importlib import resources
from pathlib import Path

from .alerts import NOTIFICATION_LEAF
from .model import Metric
from .errors import CardiotelError, OrchestrationError
from .gateway import GatewayClient, GatewayConfig, GatewayServer
from .gateway.server import vitals_path
from .recorder import RecordingSession, Workbook, WorkbookConfig
from .simulator import DeviceRunner, ScenarioScript

DEMO_DEVICE = "dev1"

# ten recorded channels; ecg_base is the one vitals metric left out
DEMO_CHANNELS = ("spo2", "temp", "sbp", "dbp", "hr", "p", "q", "r", "s", "t")


def builtin_scenario() -> ScenarioScript:
    raw = resources.files("cardiotel").joinpath("scenarios/desaturation.json").read_text()
    return ScenarioScript.from_dict(json.loads(raw))


def orchestrate_demo(
    out_dir: str | Path,
    ticks: int = 200,
    tick_ms: int = 150,
    port: int = 0,
    scenario: ScenarioScript | None = None,
    realtime: bool = True,
    log=print,
) -> dict:
    """Run the full pipeline; returns a result summary. Raises
    OrchestrationError tagged with the failing stage."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    scenario = scenario or builtin_scenario()

    stage = "gateway"
    try:
        config = GatewayConfig(host="127.0.0.1", port=port, data_dir=out / "gateway-data",
                               subscriber_buffer=4096)
        server = GatewayServer(config).start()
    except OSError as exc:
        raise OrchestrationError(stage, f"cannot listen on port {port}: {exc}") from exc
    host, bound_port = server.address
    log(f"demo: [gateway] listening on {host}:{bound_port}")

    session = None
    workbook = None
    clients: list[GatewayClient] = []
    try:
        stage = "provision"
        device_token = server.devices.provision(DEMO_DEVICE)
        log(f"demo: [provision] device token issued for {DEMO_DEVICE}")

        stage = "recorder"
        sub_client = GatewayClient(host, bound_port)
        clients.append(sub_client)
        operator = _demo_operator(sub_client)
        stream = sub_client.subscribe(f"/deviceData/{DEMO_DEVICE}/vitals", operator)
        workbook = Workbook(
            WorkbookConfig(data_interval_ms=tick_ms, data_rows=2000, data_channels=10),
            out / "stream",
        )
        channel_map = {
            vitals_path(DEMO_DEVICE, metric): i for i, metric in enumerate(DEMO_CHANNELS)
        }
        session = RecordingSession(workbook, stream, channel_map, trigger="group").start()
        log(f"demo: [recorder] wired {len(channel_map)} channels")

        stage = "device"
        runner = DeviceRunner(
            scenario,
            transport_factory=lambda: _track(clients, GatewayClient(host, bound_port)),
            token=device_token,
            tick_ms=tick_ms,
            realtime=realtime,
        )
        stats = runner.run(ticks)
        log(f"demo: [device] sent {stats.ticks_sent} ticks ({stats.retries} retries)")

        stage = "recorder"
        deadline = time.monotonic() + 10
        while ticks and session.rows_emitted < ticks - 1 and time.monotonic() < deadline:
            time.sleep(0.05)
        session.stop()
        session = None
        export_path = out / "workbook.csv"
        row_count = workbook.export_csv(export_path)
        log(f"demo: [recorder] exported {row_count} rows to {export_path}")

        stage = "alerts"
        events = server.engine.events()
        alerts_path = out / "alerts.csv"
        server.engine.export_csv(alerts_path)
        log(f"demo: [alerts] {len(events)} event(s) logged -> {alerts_path}")
        for event in events:
            log(
                f"demo: [alerts]   #{event.alert_id} {event.device_id}/{event.metric} "
                f"{event.status.name} value={event.value} "
                f"first={event.first_ts}ms last={event.last_ts}ms"
            )
        spo2_alerts = [e for e in events if e.metric == NOTIFICATION_LEAF[Metric.SPO2]]
        return {
            "port": bound_port,
            "ticks": ticks,
            "rows": row_count,
            "alerts": len(events),
            "spo2_alerts": len(spo2_alerts),
            "workbook": str(export_path),
            "alert_log": str(alerts_path),
        }
    except OrchestrationError:
        raise
    except (CardiotelError, OSError, ConnectionError, TimeoutError) as exc:
        raise OrchestrationError(stage, str(exc)) from exc
    finally:
        if session is not None:
            session.stop()
        if workbook is not None:
            workbook.close()
        for client in clients:
            client.close()
        server.stop()


def _track(clients: list, client: GatewayClient) -> GatewayClient:
    clients.append(client)
    return client


def _demo_operator(client: GatewayClient) -> str:
    """Register-or-login the demo operator account; returns a session token."""
    email = "operator@demo.local"
    password = "demo-operator-pw"
    try:
        client.register("Demo Operator", email, "000", password, password)
    except CardiotelError:
        pass  # already registered from a previous run against the same data dir
    return client.login(email, password)["token"]
