"""WebSocket gateway between the console and the stage server.

Messages are JSON objects ``{"topic": str, "seq": number, "payload": {...}}``
in both directions, a one-to-one mirror of bus envelopes (maps become
objects, float32 arrays become number lists). A connection starts with a
``console/hello`` declaring the station role; the gateway registers the
station, answers with ``console/welcome`` carrying the station id plus a
scene summary for the stage map, then streams ``tick/frame`` summaries every
Nth tick and ``console/ack`` results for each command.
"""

import json
import logging
import threading
from typing import Optional

import numpy as np

from . import packetlog
from .eventbus import StationRole
from .server import StageServer, _command_from_event

logger = logging.getLogger(__name__)


def value_to_json(value):
    if isinstance(value, dict):
        return {k: value_to_json(v) for k, v in value.items()}
    if isinstance(value, np.ndarray):
        return [float(v) for v in value]
    return value


class _ConsoleConnection:
    def __init__(self, ws, station, role: StationRole):
        self.ws = ws
        self.station = station
        self.role = role
        self.lock = threading.Lock()
        self.seq = 0
        self.alive = True

    def send(self, topic: str, payload: dict):
        if not self.alive:
            return
        with self.lock:
            self.seq += 1
            message = json.dumps(
                {"topic": topic, "seq": self.seq, "payload": value_to_json(payload)}
            )
        try:
            self.ws.send(message)
        except Exception:
            self.alive = False


class ConsoleGateway:
    """Accepts console sockets and fans out frame summaries.

    Stateless by design: every quantity a console displays comes from the
    latest frame summary, and each inbound command is acknowledged once the
    tick that consumed it resolves.
    """

    def __init__(self, server: StageServer, bind: tuple[str, int], decimation: int = 6):
        from websockets.sync.server import serve

        self.server = server
        self.decimation = max(1, decimation)
        self._conns: list[_ConsoleConnection] = []
        self._conns_lock = threading.Lock()
        self._ws_server = serve(self._handle, bind[0], bind[1])
        self.address = self._ws_server.socket.getsockname()
        self._thread = threading.Thread(
            target=self._ws_server.serve_forever, name="console-ws", daemon=True
        )
        server.on_packet.append(self._on_packet)

    def start(self):
        self._thread.start()

    def stop(self):
        self._ws_server.shutdown()
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.alive = False

    def _scene_summary(self) -> dict:
        scene = self.server.scene
        return {
            "name": scene.name,
            "stage": {
                "x0": scene.stage_bounds.x0,
                "z0": scene.stage_bounds.z0,
                "x1": scene.stage_bounds.x1,
                "z1": scene.stage_bounds.z1,
            },
            "obstacles": [
                {"x0": o.x0, "z0": o.z0, "x1": o.x1, "z1": o.z1} for o in scene.obstacles
            ],
            "zones": [
                {
                    "id": z.id,
                    "d": {"x0": z.rect_d.x0, "z0": z.rect_d.z0, "x1": z.rect_d.x1, "z1": z.rect_d.z1},
                    "yaw": z.release_yaw_deg,
                }
                for z in scene.zones.zones
            ],
            "presets": [
                {"name": p.name, "x": float(p.position[0]), "z": float(p.position[1]), "yaw": p.yaw_deg}
                for p in scene.presets.values()
            ],
            "lights": sorted(self.server.lights.keys()),
            "decimation": self.decimation,
        }

    def _handle(self, ws):
        conn: Optional[_ConsoleConnection] = None
        try:
            for raw in ws:
                try:
                    message = json.loads(raw)
                    topic = str(message["topic"])
                    seq = int(message.get("seq", 0))
                    payload = message.get("payload") or {}
                except (ValueError, KeyError, TypeError) as exc:
                    logger.warning("malformed console message: %s", exc)
                    continue
                if conn is None:
                    if topic != "console/hello":
                        ws.send(json.dumps({
                            "topic": "console/error", "seq": 0,
                            "payload": {"error": "first message must be console/hello"},
                        }))
                        continue
                    conn = self._hello(ws, seq, payload)
                    continue
                self._command(conn, topic, seq, payload)
        except Exception as exc:  # connection died; sync server raises on close
            logger.debug("console connection closed: %s", exc)
        finally:
            if conn is not None:
                conn.alive = False
                with self._conns_lock:
                    if conn in self._conns:
                        self._conns.remove(conn)

    def _hello(self, ws, seq: int, payload: dict) -> Optional[_ConsoleConnection]:
        role_name = str(payload.get("role", "Console"))
        try:
            role = StationRole(role_name)
        except ValueError:
            ws.send(json.dumps({
                "topic": "console/error", "seq": 0,
                "payload": {"error": f"unknown role {role_name}", "for_seq": seq},
            }))
            return None
        try:
            station = self.server.register_station(role, "ws")
        except Exception as exc:
            ws.send(json.dumps({
                "topic": "console/error", "seq": 0,
                "payload": {"error": str(exc), "for_seq": seq},
            }))
            return None
        conn = _ConsoleConnection(ws, station, role)
        with self._conns_lock:
            self._conns.append(conn)
        conn.send(
            "console/welcome",
            {"station_id": station.id, "role": role.value, "scene": self._scene_summary()},
        )
        return conn

    def _command(self, conn: _ConsoleConnection, topic: str, seq: int, payload: dict):
        try:
            command = _command_from_event(topic, payload)
        except (KeyError, TypeError, ValueError) as exc:
            conn.send("console/ack", {"for_seq": seq, "ok": False, "error": str(exc)})
            return
        if command is None:
            conn.send(
                "console/ack",
                {"for_seq": seq, "ok": False, "error": f"unknown command topic {topic}"},
            )
            return

        def ack(ok: bool, detail: str = ""):
            conn.send("console/ack", {"for_seq": seq, "ok": ok, "error": detail})

        self.server.enqueue(command, conn.role, ack)

    def _on_packet(self, packet):
        if packet.tick % self.decimation != 0:
            return
        summary = packetlog.summary_value(packet)
        with self._conns_lock:
            conns = list(self._conns)
        for conn in conns:
            conn.send("tick/frame", summary)
