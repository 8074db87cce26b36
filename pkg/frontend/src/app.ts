/**
 * Dashboard controller and renderer. Gateway events and UI actions flow
 * through the reducer; every dispatch re-renders the tree from state, so
 * what is on screen is always a pure function of the action history.
 */
import { Connection } from "./gateway.js";
import {
  AlertRecord,
  ErrorReply,
  NOTIFICATION_LEAVES,
  PathValue,
  Reply,
  VITAL_LEAVES,
} from "./protocol.js";
import {
  Action,
  AppState,
  ageMs,
  initialState,
  isStale,
  reducer,
  viewFresh,
  vitalLeafFor,
} from "./state.js";

const VITAL_LABELS: Record<string, string> = {
  spo2: "SpO2 (%)",
  temp: "Temp (°F)",
  sbp: "Systolic (mmHg)",
  dbp: "Diastolic (mmHg)",
  hr: "Heart rate (bpm)",
};

const ECG_LEAVES = ["ecg_base", "p", "q", "r", "s", "t"] as const;

function errText(reply: Reply): string {
  const err = reply as ErrorReply;
  switch (err.error) {
    case "conflict": return "email already registered";
    case "auth": return "invalid credentials";
    default: return err.message || err.error;
  }
}

export class Dashboard {
  state: AppState;
  notice = "";

  constructor(private conn: Connection, private root: HTMLElement, device = "dev1") {
    this.state = initialState(device);
    conn.onEvent = (ev) => this.dispatch({ type: "gateway_event", ev });
    conn.onStatus = (status) => this.dispatch({ type: "connection", status });
    this.render();
  }

  dispatch(action: Action): void {
    this.state = reducer(this.state, action);
    this.render();
  }

  // -- gateway interactions -------------------------------------------------

  async register(name: string, email: string, contact: string,
                 password: string, cPassword: string): Promise<boolean> {
    if (password !== cPassword) {
      this.notice = "passwords do not match";      // blocked before any request
      this.render();
      return false;
    }
    const reply = await this.conn.request({
      op: "register", name, email, contact, password, c_password: cPassword,
    });
    this.notice = reply.ok ? "registered; sign in below" : errText(reply);
    this.render();
    return reply.ok;
  }

  async login(email: string, password: string): Promise<boolean> {
    const reply = await this.conn.request({ op: "login", email, password });
    if (!reply.ok) {
      this.notice = errText(reply);
      this.render();
      return false;
    }
    this.notice = "";
    this.dispatch({
      type: "logged_in",
      token: String(reply.token),
      userId: String(reply.user_id),
    });
    await this.subscribeAll();
    return true;
  }

  /** (Re)subscribe the live view and the history feed; safe on reconnect. */
  async subscribeAll(): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    await this.conn.request({
      op: "sub", prefix: `/deviceData/${this.state.device}`, token: session.token,
    });
    await this.conn.request({
      op: "sub", prefix: `/users/${session.userId}/records`, token: session.token,
    });
  }

  async selectDevice(device: string): Promise<void> {
    this.dispatch({ type: "device_selected", device });
    await this.subscribeAll();
  }

  async recordSample(): Promise<boolean> {
    const session = this.state.session;
    if (!session || !viewFresh(this.state)) return false;  // disabled while stale
    const values: Record<string, PathValue> = {};
    for (const leaf of VITAL_LEAVES) {
      const cell = this.state.vitals[leaf];
      if (cell) values[leaf] = cell.value;
    }
    for (const leaf of NOTIFICATION_LEAVES) {
      const cell = this.state.notifications[leaf];
      if (cell) values[`status_${leaf}`] = cell.value;
    }
    const baseTs = this.state.latestServerTs + this.state.elapsedSinceEventMs;
    const taken = new Set(this.state.history.map((h) => h.ts));
    let ts = baseTs;
    while (taken.has(ts)) ts += 1;                      // rapid clicks stay distinct
    const reply = await this.conn.request({
      op: "set",
      path: `/users/${session.userId}/records/${ts}`,
      value: JSON.stringify(values),
      token: session.token,
    });
    if (!reply.ok) {
      this.notice = `record failed (${errText(reply)}); try again`;
      this.render();
      return false;
    }
    return true;
  }

  async acknowledge(metric: string): Promise<void> {
    const session = this.state.session;
    if (!session) return;
    const listReply = await this.conn.request({ op: "alerts", token: session.token });
    if (listReply.ok) {
      const alerts = (listReply.alerts as AlertRecord[]) ?? [];
      const open = alerts.find(
        (a) => a.device === this.state.device && a.metric === metric && a.ack_user === null,
      );
      if (open) {
        await this.conn.request({ op: "ack", alert_id: open.alert_id, token: session.token });
      }
    }
    // an already-closed alert still clears the banner
    this.dispatch({ type: "banner_acked", metric });
  }

  startClock(stepMs = 100): () => void {
    const id = setInterval(() => this.dispatch({ type: "tick", deltaMs: stepMs }), stepMs);
    return () => clearInterval(id);
  }

  // -- rendering --------------------------------------------------------------

  private el(tag: string, attrs: Record<string, string> = {}, text?: string): HTMLElement {
    const node = document.createElement(tag);
    for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
    if (text !== undefined) node.textContent = text;
    return node;
  }

  render(): void {
    const root = this.root;
    root.textContent = "";
    root.appendChild(this.renderHeader());
    if (this.notice) {
      root.appendChild(this.el("p", { class: "notice", "data-testid": "notice" }, this.notice));
    }
    if (!this.state.session) {
      root.appendChild(this.renderAuth());
      return;
    }
    root.appendChild(this.renderBanners());
    root.appendChild(this.renderLive());
    root.appendChild(this.renderHistory());
  }

  private renderHeader(): HTMLElement {
    const header = this.el("header");
    header.appendChild(this.el("h1", {}, "cardiotel"));
    const conn = this.state.connection;
    header.appendChild(
      this.el("span", { class: `conn conn-${conn}`, "data-testid": "connection" }, conn),
    );
    if (this.state.session) {
      header.appendChild(this.el("span", { class: "device" }, `device ${this.state.device}`));
    }
    return header;
  }

  private renderAuth(): HTMLElement {
    const wrap = this.el("section", { class: "auth" });
    const loginForm = this.el("form", { "data-testid": "login-form" });
    loginForm.appendChild(this.el("h2", {}, "Sign in"));
    const email = this.el("input", { name: "email", placeholder: "email" }) as HTMLInputElement;
    const password = this.el("input", { name: "password", type: "password", placeholder: "password" }) as HTMLInputElement;
    const submit = this.el("button", { type: "submit" }, "Login");
    loginForm.append(email, password, submit);
    loginForm.addEventListener("submit", (e) => {
      e.preventDefault();
      void this.login(email.value, password.value);
    });

    const regForm = this.el("form", { "data-testid": "register-form" });
    regForm.appendChild(this.el("h2", {}, "Register"));
    const fields = ["name", "email", "contact", "password", "c_password"].map((name) => {
      const input = this.el("input", {
        name, placeholder: name.replace("_", " "),
        type: name.includes("password") ? "password" : "text",
      }) as HTMLInputElement;
      regForm.appendChild(input);
      return input;
    });
    regForm.appendChild(this.el("button", { type: "submit" }, "Create account"));
    regForm.addEventListener("submit", (e) => {
      e.preventDefault();
      const [name, email2, contact, pw, cpw] = fields.map((f) => f.value);
      void this.register(name, email2, contact, pw, cpw);
    });

    wrap.append(loginForm, regForm);
    return wrap;
  }

  private renderBanners(): HTMLElement {
    const zone = this.el("section", { class: "banners", "data-testid": "banners" });
    for (const banner of this.state.banners) {
      const cls = banner.recovered ? "banner banner-recovered" : "banner banner-active";
      const node = this.el("div", { class: cls, "data-testid": `banner-${banner.metric}` });
      node.appendChild(this.el("strong", {}, banner.metric.replace(/_/g, " ")));
      node.appendChild(
        this.el("span", {},
          ` abnormal (reading ${banner.value})${banner.recovered ? " — recovered, unacknowledged" : ""}` +
          (banner.raises > 1 ? ` ×${banner.raises}` : "")),
      );
      const ack = this.el("button", { "data-testid": `ack-${banner.metric}` }, "Acknowledge");
      ack.addEventListener("click", () => void this.acknowledge(banner.metric));
      node.appendChild(ack);
      zone.appendChild(node);
    }
    return zone;
  }

  private renderLive(): HTMLElement {
    const live = this.el("section", { class: "live" });
    const grid = this.el("div", { class: "grid" });
    for (const [leaf, label] of Object.entries(VITAL_LABELS)) {
      const cell = this.state.vitals[leaf];
      const card = this.el("div", { class: "metric", "data-testid": `metric-${leaf}` });
      card.appendChild(this.el("div", { class: "label" }, label));
      card.appendChild(
        this.el("div", { class: "value", "data-testid": `value-${leaf}` },
          cell ? String(cell.value) : "—"),
      );
      const notifMetric = Object.keys(VITAL_LABELS).length
        ? this.notificationFor(leaf) : undefined;
      if (notifMetric) {
        const status = this.state.notifications[notifMetric];
        if (status) {
          card.appendChild(
            this.el("div", { class: "status", "data-testid": `status-${leaf}` },
              String(status.value)),
          );
        }
      }
      if (isStale(this.state, cell)) {
        card.appendChild(this.el("span", { class: "stale", "data-testid": `stale-${leaf}` }, "stale"));
      } else {
        card.appendChild(
          this.el("span", { class: "age" }, `${Math.max(0, Math.round(ageMs(this.state, cell)))} ms`),
        );
      }
      grid.appendChild(card);
    }
    live.appendChild(grid);
    live.appendChild(this.renderEcg());

    const record = this.el("button", { "data-testid": "record-sample" }, "Record sample");
    if (!viewFresh(this.state)) record.setAttribute("disabled", "disabled");
    record.addEventListener("click", () => void this.recordSample());
    live.appendChild(record);
    return live;
  }

  private notificationFor(leaf: string): string | undefined {
    for (const metric of NOTIFICATION_LEAVES) {
      if (vitalLeafFor(metric) === leaf) return metric;
    }
    return undefined;
  }

  private renderEcg(): HTMLElement {
    const strip = this.el("div", { class: "ecg", "data-testid": "ecg-strip" });
    for (const leaf of ECG_LEAVES) {
      const cell = this.state.vitals[leaf];
      const item = this.el("span", { class: "ecg-feature" });
      item.appendChild(this.el("b", {}, leaf === "ecg_base" ? "base" : leaf.toUpperCase()));
      item.appendChild(document.createTextNode(` ${cell ? cell.value : "—"}`));
      strip.appendChild(item);
    }
    strip.appendChild(this.renderSparkline());
    return strip;
  }

  private renderSparkline(): SVGSVGElement {
    const svgNs = "http://www.w3.org/2000/svg";
    const svg = document.createElementNS(svgNs, "svg");
    svg.setAttribute("width", "160");
    svg.setAttribute("height", "40");
    svg.setAttribute("data-testid", "sparkline");
    const points = this.state.sparkline;
    if (points.length >= 2) {
      const min = Math.min(...points);
      const max = Math.max(...points);
      const span = Math.max(1, max - min);
      const path = points
        .map((v, i) => {
          const x = (i / (points.length - 1)) * 158 + 1;
          const y = 38 - ((v - min) / span) * 36;
          return `${x.toFixed(1)},${y.toFixed(1)}`;
        })
        .join(" ");
      const line = document.createElementNS(svgNs, "polyline");
      line.setAttribute("points", path);
      line.setAttribute("fill", "none");
      line.setAttribute("stroke", "#c62828");
      svg.appendChild(line);
    }
    return svg;
  }

  private renderHistory(): HTMLElement {
    const section = this.el("section", { class: "history" });
    section.appendChild(this.el("h2", {}, "Recorded samples"));
    const list = this.el("ol", { "data-testid": "history" });
    for (const entry of this.state.history) {
      const item = this.el("li", { "data-testid": `record-${entry.ts}` });
      const vitals = VITAL_LEAVES
        .filter((leaf) => leaf in entry.values)
        .map((leaf) => `${leaf}=${entry.values[leaf]}`)
        .join(" ");
      item.textContent = `t+${entry.ts}ms ${vitals}`;
      list.appendChild(item);
    }
    section.appendChild(list);
    return section;
  }
}
