import { Dashboard } from "./app.js";
import { WsConnection, gatewayUrl } from "./gateway.js";

const root = document.getElementById("app");
if (!root) throw new Error("missing #app element");

const conn = new WsConnection(gatewayUrl());
const dashboard = new Dashboard(conn, root);
conn.onOpen = () => {
  // resubscribe after reconnect so the snapshot refreshes the view
  void dashboard.subscribeAll();
};
conn.connect();
dashboard.startClock();
