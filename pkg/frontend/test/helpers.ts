import { Connection } from "../src/gateway.js";
import { AlertRecord, GatewayEvent, PathValue, Reply } from "../src/protocol.js";

/** Scriptable in-memory gateway standing in for the WebSocket connection. */
export class FakeConnection implements Connection {
  onEvent: (ev: GatewayEvent) => void = () => {};
  onStatus: (status: "connecting" | "open" | "closed") => void = () => {};
  sent: Record<string, unknown>[] = [];
  alerts: AlertRecord[] = [];
  private seq = 0;

  async request(msg: Record<string, unknown>): Promise<Reply> {
    this.sent.push(msg);
    switch (msg.op) {
      case "register":
        return { ok: true, user_id: "uid-1" };
      case "login":
        return { ok: true, token: "tok-1", user_id: "uid-1", expiry_ts: 9e12 };
      case "sub":
        return { ok: true, prefix: msg.prefix };
      case "set": {
        this.seq += 1;
        // the caller is subscribed to its own records: echo the put event
        this.push(String(msg.path), msg.value as PathValue, Date.now());
        return { ok: true, seq: this.seq, server_ts: Date.now() };
      }
      case "alerts":
        return { ok: true, alerts: this.alerts };
      case "ack": {
        const found = this.alerts.find((a) => a.alert_id === msg.alert_id);
        if (!found) return { ok: false, error: "not_found" };
        found.ack_user = "uid-1";
        return { ok: true, alert: found };
      }
      default:
        return { ok: false, error: "validation", message: `unknown op ${msg.op}` };
    }
  }

  push(path: string, value: PathValue, serverTs: number, snapshot = false): void {
    this.seq += 1;
    const ev: GatewayEvent = {
      event: "put", path, value, server_ts: serverTs, seq: this.seq, group: this.seq,
      ...(snapshot ? { snapshot: true } : {}),
    };
    this.onEvent(ev);
  }

  pushReady(): void {
    this.onEvent({ event: "ready", seq: this.seq });
  }

  openAlert(metric: string, value: PathValue, ts: number): AlertRecord {
    const alert: AlertRecord = {
      alert_id: this.alerts.length + 1, device: "dev1", metric, status: "ABNORMAL",
      value, first_ts: ts, last_ts: ts, recovered: false, ack_user: null, ack_ts: null,
    };
    this.alerts.push(alert);
    return alert;
  }

  close(): void {}
}

export function vitalsGroup(
  conn: FakeConnection,
  serverTs: number,
  overrides: Partial<Record<string, PathValue>> = {},
  device = "dev1",
): void {
  const values: Record<string, PathValue> = {
    spo2: 97, temp: 98.6, sbp: 120, dbp: 80, hr: 72,
    ecg_base: 254, p: 450, q: 119, r: 701, s: 88, t: 76,
    ...overrides,
  };
  for (const [leaf, value] of Object.entries(values)) {
    if (["spo2", "temp", "sbp", "dbp", "hr", "ecg_base", "p", "q", "r", "s", "t"].includes(leaf)) {
      conn.push(`/deviceData/${device}/vitals/${leaf}`, value, serverTs);
    }
  }
  const spo2 = Number(values.spo2);
  const oxygen = spo2 > 94 && spo2 <= 100 ? "Normal" : "AB_Normal";
  conn.push(`/deviceData/${device}/Notification/Oxygen_Level`, oxygen, serverTs);
  conn.push(`/deviceData/${device}/Notification/Temperature`, "Normal", serverTs);
  conn.push(`/deviceData/${device}/Notification/Systolic_BP`, "Normal", serverTs);
  conn.push(`/deviceData/${device}/Notification/Diastolic_BP`, "Normal", serverTs);
  conn.push(`/deviceData/${device}/Notification/Heart_Rate`, "Normal", serverTs);
  conn.push(`/deviceData/${device}/Notification/Fault`, spo2 === 0 ? "1" : "0", serverTs);
}
