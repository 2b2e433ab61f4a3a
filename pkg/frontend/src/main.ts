// Bootstrap: connect to the gateway, build the UI for the declared role.
// Endpoint and role come from the query string:
//   index.html?server=ws://127.0.0.1:7602&role=Manipulator

import { Role } from "./protocol.js";
import { ConsoleSession } from "./session.js";
import { ConsoleUi } from "./ui.js";

function main(): void {
  const params = new URLSearchParams(window.location.search);
  const server = params.get("server") ?? "ws://127.0.0.1:7602";
  const role = (params.get("role") ?? "Manipulator") as Role;
  const status = document.getElementById("conn-status")!;
  status.textContent = `connecting to ${server} as ${role}…`;

  const ws = new WebSocket(server);
  let ui: ConsoleUi | null = null;

  ws.addEventListener("open", () => {
    const session = new ConsoleSession(
      { send: (d) => ws.send(d), close: () => ws.close() },
      role,
      {
        onWelcome: (welcome) => {
          status.textContent = `station #${welcome.station_id} connected`;
          ui = new ConsoleUi(session);
          ui.wireScene(welcome.scene);
        },
        onSummary: (summary) => ui?.onSummary(summary),
        onAck: (result) => ui?.onAck(result),
        onError: (error) => {
          status.textContent = `server refused: ${error}`;
        },
      },
    );
    ws.addEventListener("message", (ev) => session.receive(String(ev.data)));
  });

  ws.addEventListener("close", () => {
    // reconnecting starts a fresh station (new hello, new id)
    status.textContent = "disconnected — reload to reconnect";
  });
  ws.addEventListener("error", () => {
    status.textContent = "connection failed";
  });
}

main();
