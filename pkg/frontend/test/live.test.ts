// Live-view behavior against a scripted gateway, at the DOM level.
import { beforeEach, describe, expect, it } from "vitest";

import { Dashboard } from "../src/app.js";
import { FakeConnection, vitalsGroup } from "./helpers.js";

function mount(): { conn: FakeConnection; dash: Dashboard; root: HTMLElement } {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.appendChild(root);
  const conn = new FakeConnection();
  const dash = new Dashboard(conn, root);
  conn.onStatus("open");
  return { conn, dash, root };
}

async function loginAs(dash: Dashboard): Promise<void> {
  const ok = await dash.login("op@example.com", "password1");
  expect(ok).toBe(true);
}

describe("live view fidelity", () => {
  let conn: FakeConnection;
  let dash: Dashboard;
  let root: HTMLElement;

  beforeEach(async () => {
    ({ conn, dash, root } = mount());
    await loginAs(dash);
  });

  it("subscribes to the device and the user's records", () => {
    const prefixes = conn.sent.filter((m) => m.op === "sub").map((m) => m.prefix);
    expect(prefixes).toEqual(["/deviceData/dev1", "/users/uid-1/records"]);
  });

  it("renders pushed values and status strings verbatim", () => {
    vitalsGroup(conn, 1000, { spo2: 96 });
    expect(root.querySelector('[data-testid="value-spo2"]')?.textContent).toBe("96");
    expect(root.querySelector('[data-testid="status-spo2"]')?.textContent).toBe("Normal");
  });

  it("raises the alert banner as soon as an abnormal write is delivered", () => {
    const deliveredAt = performance.now();
    vitalsGroup(conn, 2000, { spo2: 90 });
    const banner = root.querySelector('[data-testid="banner-Oxygen_Level"]');
    const renderedWithin = performance.now() - deliveredAt;
    expect(banner).not.toBeNull();
    expect(banner?.textContent).toContain("abnormal");
    expect(renderedWithin).toBeLessThan(500); // rendering is synchronous with delivery
  });

  it("acknowledge clears the banner and a later abnormal write re-raises it", async () => {
    vitalsGroup(conn, 2000, { spo2: 90 });
    conn.openAlert("Oxygen_Level", 90, 2000);
    expect(root.querySelector('[data-testid="banner-Oxygen_Level"]')).not.toBeNull();

    (root.querySelector('[data-testid="ack-Oxygen_Level"]') as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve(); // drain the ack round trips
    await Promise.resolve();
    expect(root.querySelector('[data-testid="banner-Oxygen_Level"]')).toBeNull();
    expect(conn.sent.some((m) => m.op === "ack" && m.alert_id === 1)).toBe(true);

    vitalsGroup(conn, 4000, { spo2: 89 });
    const banner = root.querySelector('[data-testid="banner-Oxygen_Level"]');
    expect(banner).not.toBeNull();
    expect(banner?.textContent).toContain("89");
  });

  it("acknowledging an already-closed alert still clears the banner", async () => {
    vitalsGroup(conn, 2000, { spo2: 90 });
    // no open alert scripted: the alerts reply is empty
    (root.querySelector('[data-testid="ack-Oxygen_Level"]') as HTMLButtonElement).click();
    await Promise.resolve();
    await Promise.resolve();
    await Promise.resolve();
    expect(root.querySelector('[data-testid="banner-Oxygen_Level"]')).toBeNull();
  });

  it("shows stale badges once the stream goes quiet", () => {
    vitalsGroup(conn, 1000);
    expect(root.querySelector('[data-testid="stale-spo2"]')).toBeNull();
    dash.dispatch({ type: "tick", deltaMs: 500 });
    expect(root.querySelector('[data-testid="stale-spo2"]')).not.toBeNull();
    expect(
      (root.querySelector('[data-testid="record-sample"]') as HTMLButtonElement).disabled,
    ).toBe(true);
  });

  it("reflects disconnection in the connection badge", () => {
    conn.onStatus("closed");
    expect(root.querySelector('[data-testid="connection"]')?.textContent).toBe("closed");
  });
});
