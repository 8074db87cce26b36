/**
 * Gateway wire types: one JSON object per WebSocket text frame.
 * Replies carry `ok`; pushed subscription events carry `event`.
 */

export type PathValue = string | number;

export interface PutEvent {
  event: "put";
  path: string;
  value: PathValue;
  server_ts: number;
  seq: number;
  group: number;
  snapshot?: boolean;
}

export interface ReadyEvent {
  event: "ready";
  seq: number;
}

export interface OverflowEvent {
  event: "overflow";
}

export type GatewayEvent = PutEvent | ReadyEvent | OverflowEvent;

export interface OkReply {
  ok: true;
  [key: string]: unknown;
}

export interface ErrorReply {
  ok: false;
  error: "auth" | "validation" | "conflict" | "overflow" | "not_found";
  message?: string;
}

export type Reply = OkReply | ErrorReply;

export interface AlertRecord {
  alert_id: number;
  device: string;
  metric: string;
  status: string;
  value: PathValue;
  first_ts: number;
  last_ts: number;
  recovered: boolean;
  ack_user: string | null;
  ack_ts: number | null;
}

export function isEvent(msg: unknown): msg is GatewayEvent {
  return typeof msg === "object" && msg !== null && "event" in msg;
}

/** Split "/deviceData/dev1/vitals/spo2" into its namespace parts. */
export function parsePath(path: string): string[] {
  return path.split("/").filter((s) => s.length > 0);
}

export const VITAL_LEAVES = [
  "spo2", "temp", "sbp", "dbp", "hr",
  "ecg_base", "p", "q", "r", "s", "t",
] as const;

export const NOTIFICATION_LEAVES = [
  "Oxygen_Level", "Temperature", "Systolic_BP", "Diastolic_BP", "Heart_Rate", "Fault",
] as const;

export const ABNORMAL = "AB_Normal";
export const NORMAL = "Normal";
