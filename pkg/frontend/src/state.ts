/**
 * All dashboard state lives in one immutable store evolved by a pure
 * reducer over gateway events, clock ticks and UI actions. Replaying the
 * same action sequence always rebuilds the same state, which is what the
 * tests lean on.
 */
import {
  ABNORMAL,
  GatewayEvent,
  PathValue,
  PutEvent,
  parsePath,
} from "./protocol.js";

export const VITAL_INTERVAL_MS = 150;
export const STALE_AFTER_INTERVALS = 3;
export const BANNER_COLLAPSE_MS = 1000;
const SPARKLINE_POINTS = 80;

export type ConnectionState = "connecting" | "open" | "closed";

export interface MetricCell {
  value: PathValue;
  serverTs: number;
  seq: number;
}

export interface Banner {
  metric: string;
  value: PathValue;
  raisedAtTs: number;   // server timeline
  raises: number;       // how often the condition re-fired
  recovered: boolean;   // metric went back to Normal but nobody acked yet
}

export interface RecordedSample {
  ts: number;
  values: Record<string, PathValue>;
}

export interface AppState {
  connection: ConnectionState;
  session: { token: string; userId: string } | null;
  device: string;
  vitals: Record<string, MetricCell>;
  notifications: Record<string, MetricCell>;
  banners: Banner[];
  history: RecordedSample[];
  sparkline: number[];
  /** highest server_ts seen plus local time elapsed since it arrived */
  latestServerTs: number;
  elapsedSinceEventMs: number;
  snapshotComplete: boolean;
}

export type Action =
  | { type: "connection"; status: ConnectionState }
  | { type: "logged_in"; token: string; userId: string }
  | { type: "logged_out" }
  | { type: "device_selected"; device: string }
  | { type: "gateway_event"; ev: GatewayEvent }
  | { type: "tick"; deltaMs: number }
  | { type: "banner_acked"; metric: string };

export function initialState(device = "dev1"): AppState {
  return {
    connection: "connecting",
    session: null,
    device,
    vitals: {},
    notifications: {},
    banners: [],
    history: [],
    sparkline: [],
    latestServerTs: 0,
    elapsedSinceEventMs: 0,
    snapshotComplete: false,
  };
}

/** Server-timeline age of a cell; Infinity before any data arrives. */
export function ageMs(state: AppState, cell: MetricCell | undefined): number {
  if (!cell) return Infinity;
  return state.latestServerTs + state.elapsedSinceEventMs - cell.serverTs;
}

export function isStale(state: AppState, cell: MetricCell | undefined): boolean {
  if (state.connection !== "open") return true;
  return ageMs(state, cell) > STALE_AFTER_INTERVALS * VITAL_INTERVAL_MS;
}

/** The live view is usable only while connected and reasonably fresh. */
export function viewFresh(state: AppState): boolean {
  return (
    state.connection === "open" &&
    !isStale(state, state.vitals["spo2"]) &&
    Object.keys(state.vitals).length > 0
  );
}

function applyPut(state: AppState, ev: PutEvent): AppState {
  const segments = parsePath(ev.path);
  const cell: MetricCell = { value: ev.value, serverTs: ev.server_ts, seq: ev.seq };
  const next: AppState = {
    ...state,
    latestServerTs: Math.max(state.latestServerTs, ev.server_ts),
    elapsedSinceEventMs: 0,
  };

  // /deviceData/<device>/vitals/<leaf>
  if (
    segments[0] === "deviceData" && segments[1] === state.device &&
    segments[2] === "vitals" && segments.length === 4
  ) {
    const leaf = segments[3];
    next.vitals = { ...state.vitals, [leaf]: cell };
    if (leaf === "hr" && typeof ev.value === "number") {
      next.sparkline = [...state.sparkline, ev.value].slice(-SPARKLINE_POINTS);
    }
    return next;
  }

  // /deviceData/<device>/Notification/<Metric>
  if (
    segments[0] === "deviceData" && segments[1] === state.device &&
    segments[2] === "Notification" && segments.length === 4
  ) {
    const metric = segments[3];
    next.notifications = { ...state.notifications, [metric]: cell };
    const abnormal =
      metric === "Fault" ? ev.value === "1" : ev.value === ABNORMAL;
    const existing = state.banners.find((b) => b.metric === metric);
    if (abnormal) {
      const reading =
        metric === "Fault" ? "probe fault" : state.vitals[vitalLeafFor(metric)]?.value ?? ev.value;
      if (!existing) {
        next.banners = [
          ...state.banners,
          { metric, value: reading, raisedAtTs: ev.server_ts, raises: 1, recovered: false },
        ];
      } else if (ev.server_ts - existing.raisedAtTs >= BANNER_COLLAPSE_MS) {
        // the condition keeps firing: re-raise, but at most once a second
        next.banners = state.banners.map((b) =>
          b.metric === metric
            ? { ...b, value: reading, raisedAtTs: ev.server_ts, raises: b.raises + 1, recovered: false }
            : b,
        );
      } else {
        next.banners = state.banners.map((b) =>
          b.metric === metric ? { ...b, value: reading, recovered: false } : b,
        );
      }
    } else if (existing && !existing.recovered && metric !== "Fault") {
      // back to Normal: keep the banner until a human acknowledges
      next.banners = state.banners.map((b) =>
        b.metric === metric ? { ...b, recovered: true } : b,
      );
    }
    return next;
  }

  // /users/<uid>/records/<ts>
  if (
    segments[0] === "users" && segments[2] === "records" && segments.length === 4 &&
    state.session && segments[1] === state.session.userId
  ) {
    const ts = Number(segments[3]);
    if (state.history.some((h) => h.ts === ts)) {
      return next; // reconnect snapshot replay: no duplicate entries
    }
    let values: Record<string, PathValue> = {};
    try {
      values = JSON.parse(String(ev.value));
    } catch {
      return next;
    }
    const history = [...state.history, { ts, values }];
    history.sort((a, b) => b.ts - a.ts); // newest first, by record time not arrival
    next.history = history;
    return next;
  }

  return next;
}

export function vitalLeafFor(notificationMetric: string): string {
  switch (notificationMetric) {
    case "Oxygen_Level": return "spo2";
    case "Temperature": return "temp";
    case "Systolic_BP": return "sbp";
    case "Diastolic_BP": return "dbp";
    case "Heart_Rate": return "hr";
    default: return notificationMetric;
  }
}

export function reducer(state: AppState, action: Action): AppState {
  switch (action.type) {
    case "connection": {
      const next = { ...state, connection: action.status };
      if (action.status !== "open") next.snapshotComplete = false;
      return next;
    }
    case "logged_in":
      return { ...state, session: { token: action.token, userId: action.userId } };
    case "logged_out":
      return { ...initialState(state.device), connection: state.connection };
    case "device_selected":
      return {
        ...state,
        device: action.device,
        vitals: {},
        notifications: {},
        banners: [],
        sparkline: [],
        snapshotComplete: false,
      };
    case "tick":
      return { ...state, elapsedSinceEventMs: state.elapsedSinceEventMs + action.deltaMs };
    case "gateway_event": {
      const ev = action.ev;
      if (ev.event === "put") return applyPut(state, ev);
      if (ev.event === "ready") return { ...state, snapshotComplete: true };
      if (ev.event === "overflow") return { ...state, connection: "closed" };
      return state;
    }
    case "banner_acked":
      return { ...state, banners: state.banners.filter((b) => b.metric !== action.metric) };
    default:
      return state;
  }
}
