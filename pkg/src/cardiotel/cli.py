"""Operator command line: validation study, gateway service, device and
recorder runs, the end-to-end demo and token provisioning.

Exit codes are stable for scripting: 0 success, 2 validation/parse
errors, 3 pairing errors, 4 I/O errors, 5 orchestration failures.
"""
from __future__ import annotations

import json
import signal
import sys
import threading
from pathlib import Path

import click

from .errors import CardiotelError
from .model import DEFAULT_NEAR_TOLERANCE


def _run(body):
    try:
        return body()
    except CardiotelError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(exc.exit_code)
    except OSError as exc:
        click.echo(f"i/o error: {exc}", err=True)
        sys.exit(4)


@click.group()
def main():
    """Remote cardiovascular telemetry toolkit."""


@main.command()
@click.option("--pairs", required=True, type=click.Path(exists=True, dir_okay=False),
              help="Paired Kit/Clinic readings CSV.")
@click.option("--tolerance", default=DEFAULT_NEAR_TOLERANCE, show_default=True,
              help="Difference band counted as 'near'.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False),
              help="Directory for differences.csv, summary.csv and charts.")
def validate(pairs, tolerance, out_dir):
    """Reproduce the kit-vs-clinic agreement tables from a pairs CSV."""
    from .validation import emit_report, load_paired_csv, run_validation

    def body():
        pset = load_paired_csv(pairs)
        report = run_validation(pset, near_tolerance=tolerance)
        written = emit_report(report, out_dir)
        click.echo(f"validated {len(pset)} pair(s), tolerance {tolerance}")
        for label in ("Oxygen Saturation", "Body Temperature", "Systolic BP",
                      "Diastolic BP", "Heart Rate", "ECG"):
            c = report.summary.row(label)
            click.echo(f"  {label}: total={c.total} exact={c.exact} "
                       f"incorrect={c.incorrect} near={c.near}")
        for path in written:
            click.echo(f"  wrote {path}")

    _run(body)


@main.command()
@click.option("--config", "config_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Gateway config JSON.")
def serve(config_path):
    """Run the telemetry gateway in the foreground."""
    from .gateway import GatewayConfig, GatewayServer

    def body():
        config = GatewayConfig.from_file(config_path)
        server = GatewayServer(config).start()
        host, port = server.address
        click.echo(f"gateway listening on {host}:{port}", nl=True)
        sys.stdout.flush()
        stop = threading.Event()

        def shutdown(_signo, _frame):
            stop.set()

        signal.signal(signal.SIGTERM, shutdown)
        signal.signal(signal.SIGINT, shutdown)
        try:
            while not stop.wait(timeout=0.5):
                pass
        finally:
            server.stop()
            click.echo("gateway stopped")

    _run(body)


@main.group()
def device():
    """Simulated device operations."""


@device.command("run")
@click.option("--scenario", "scenario_path", required=True,
              type=click.Path(exists=True, dir_okay=False), help="Scenario script JSON.")
@click.option("--endpoint", required=True, help="Gateway host:port.")
@click.option("--token", required=True, help="Device token.")
@click.option("--ticks", required=True, type=int)
@click.option("--tick-ms", default=150, show_default=True)
@click.option("--fast", is_flag=True, help="Do not pace ticks in real time.")
def device_run(scenario_path, endpoint, token, ticks, tick_ms, fast):
    """Stream a scripted device against a gateway."""
    from .gateway import GatewayClient
    from .simulator import DeviceRunner, ScenarioScript

    def body():
        host, _, port = endpoint.rpartition(":")
        script = ScenarioScript.from_file(scenario_path)
        runner = DeviceRunner(
            script,
            transport_factory=lambda: GatewayClient(host, int(port)),
            token=token,
            tick_ms=tick_ms,
            realtime=not fast,
            on_status=lambda kind, detail: click.echo(f"device: {kind} {detail}".rstrip())
            if kind != "tick" else None,
        )
        stats = runner.run(ticks)
        click.echo(f"device: sent {stats.ticks_sent} tick(s), {stats.retries} retr(ies)")

    _run(body)


@main.command()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
              help="Workbook settings JSON (defaults to the standard geometry).")
@click.option("--map", "channel_map_spec", required=True,
              help="Comma-separated path=chN assignments.")
@click.option("--out", "out_name", required=True, type=click.Path(), help="Workbook base name.")
@click.option("--endpoint", required=True, help="Gateway host:port.")
@click.option("--token", required=True, help="Token with read access to the mapped paths.")
@click.option("--prefix", required=True, help="Subscription prefix covering the mapped paths.")
@click.option("--duration-s", default=30.0, show_default=True, help="Recording length.")
@click.option("--trigger", type=click.Choice(["interval", "group"]), default="interval",
              show_default=True)
@click.option("--rotate", is_flag=True, help="Archive completed workbooks to timestamped files.")
def record(config_path, channel_map_spec, out_name, endpoint, token, prefix, duration_s,
           trigger, rotate):
    """Record live channels from a gateway subscription into a workbook."""
    import time as _time

    from .errors import ValidationError
    from .gateway import GatewayClient
    from .recorder import RecordingSession, Workbook, WorkbookConfig

    def body():
        if config_path:
            with open(config_path, encoding="utf-8") as fh:
                cfg = WorkbookConfig.from_dict(json.load(fh))
        else:
            cfg = WorkbookConfig()
        channel_map = {}
        for part in channel_map_spec.split(","):
            path, _, chan = part.partition("=")
            if not chan.startswith("ch"):
                raise ValidationError(f"bad channel assignment {part!r}")
            channel_map[path.strip()] = int(chan[2:]) - 1
        host, _, port = endpoint.rpartition(":")
        client = GatewayClient(host, int(port))
        try:
            stream = client.subscribe(prefix, token)
            workbook = Workbook(cfg, out_name, rotate=rotate)
            session = RecordingSession(workbook, stream, channel_map, trigger=trigger).start()
            click.echo(f"recording {len(channel_map)} channel(s) for {duration_s}s")
            _time.sleep(duration_s)
            session.stop()
            export = Path(out_name).with_suffix(".export.csv")
            rows = workbook.export_csv(export)
            workbook.close()
            click.echo(f"recorded {rows} row(s) -> {export}")
        finally:
            client.close()

    _run(body)


@main.command()
@click.option("--ticks", default=200, show_default=True)
@click.option("--tick-ms", default=150, show_default=True)
@click.option("--out", "out_dir", default="demo-out", show_default=True,
              type=click.Path(file_okay=False))
@click.option("--port", default=0, show_default=True, help="Gateway port (0 = any free).")
@click.option("--scenario", "scenario_path", type=click.Path(exists=True, dir_okay=False),
              help="Override the built-in desaturation scenario.")
@click.option("--fast", is_flag=True, help="Do not pace ticks in real time.")
def demo(ticks, tick_ms, out_dir, port, scenario_path, fast):
    """Gateway + scripted device + recorder + alert log, end to end."""
    from .demo import orchestrate_demo
    from .simulator import ScenarioScript

    def body():
        scenario = ScenarioScript.from_file(scenario_path) if scenario_path else None
        result = orchestrate_demo(
            out_dir, ticks=ticks, tick_ms=tick_ms, port=port,
            scenario=scenario, realtime=not fast, log=click.echo,
        )
        click.echo(
            f"demo: ok rows={result['rows']} alerts={result['alerts']} "
            f"spo2_alerts={result['spo2_alerts']}"
        )

    _run(body)


@main.group()
def token():
    """Device credential management."""


@token.command("new")
@click.option("--device", "device_id", required=True, help="Device identifier.")
@click.option("--store", "store_path", default="cardiotel-data/tokens.json",
              show_default=True, type=click.Path(dir_okay=False),
              help="Token store JSON shared with the gateway.")
def token_new(device_id, store_path):
    """Provision a static token for a device."""
    from .gateway.auth import DeviceTokenStore

    def body():
        issued = DeviceTokenStore(store_path).provision(device_id)
        click.echo(issued)

    _run(body)


@main.group()
def thresholds():
    """Alert threshold management."""


@thresholds.command("reload")
@click.option("--endpoint", required=True, help="Gateway host:port.")
@click.option("--token", "session_token", required=True, help="User session token.")
def thresholds_reload(endpoint, session_token):
    """Tell a running gateway to re-read its thresholds file."""
    from .gateway import GatewayClient

    def body():
        host, _, port = endpoint.rpartition(":")
        client = GatewayClient(host, int(port))
        try:
            reply = client.reload_thresholds(session_token)
            click.echo(f"thresholds now: {json.dumps(reply['thresholds'], sort_keys=True)}")
        finally:
            client.close()

    _run(body)


if __name__ == "__main__":
    main()
