"""Decentralized typed event bus connecting the work stations.

Every station holds one reliable ordered byte-stream connection to each
peer (a full mesh; casts are small, so O(n^2) links stay tiny). There is no
broker and no wait queue: a published envelope goes straight to every peer
that subscribes to its topic, local subscribers run synchronously inside
publish, and received envelopes dispatch immediately on receipt. Transports
buffer, the bus does not.

Wire format, little-endian, one frame per envelope:

    u32 length | u16 topic len + topic bytes | u32 sender | u64 seq |
    f64 timestamp | boxed payload (see values)

The encoded envelope body is capped at 10,240 bytes. Bus housekeeping
(hello, subscription tables, ping) rides reserved "_bus/..." topics that are
never delivered to user handlers.
"""

import logging
import socket
import struct
import threading
import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Optional

from . import values

logger = logging.getLogger(__name__)

ENVELOPE_CAP = 10_240

_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_HEAD = struct.Struct("<IQd")  # sender, seq, timestamp


class BusError(Exception):
    pass


class PayloadTooLarge(BusError):
    pass


class NotJoined(BusError):
    pass


class MalformedPattern(BusError):
    pass


class StationRole(Enum):
    Mocaptor = "Mocaptor"
    Manipulator = "Manipulator"
    DigitalArtist = "DigitalArtist"
    Director = "Director"
    Server = "Server"
    Console = "Console"


@dataclass(frozen=True)
class Station:
    id: int
    role: StationRole
    address: str  # "host:port" of the station's bus listener ("" = none)


@dataclass(frozen=True)
class EventEnvelope:
    topic: str
    sender: int
    seq: int
    timestamp: float
    payload: object

    def __post_init__(self):
        _check_topic(self.topic)


def _check_topic(topic: str):
    if not topic or not topic.isascii():
        raise BusError(f"topic must be non-empty ASCII, got {topic!r}")


def encode_envelope(env: EventEnvelope) -> bytes:
    raw_topic = env.topic.encode("ascii")
    payload = values.encode_value(env.payload)
    body = (
        _U16.pack(len(raw_topic))
        + raw_topic
        + _HEAD.pack(env.sender, env.seq, env.timestamp)
        + payload
    )
    if len(body) > ENVELOPE_CAP:
        raise PayloadTooLarge(
            f"envelope encodes to {len(body)} bytes, cap is {ENVELOPE_CAP}"
        )
    return _U32.pack(len(body)) + body


def decode_envelope(body: bytes) -> EventEnvelope:
    if len(body) > ENVELOPE_CAP:
        raise PayloadTooLarge(f"envelope body of {len(body)} bytes exceeds {ENVELOPE_CAP}")
    if len(body) < 2:
        raise BusError("envelope too short for topic length")
    tlen = _U16.unpack_from(body, 0)[0]
    if len(body) < 2 + tlen + _HEAD.size:
        raise BusError("envelope truncated")
    topic = body[2 : 2 + tlen].decode("ascii")
    sender, seq, timestamp = _HEAD.unpack_from(body, 2 + tlen)
    payload = values.decode_value(body[2 + tlen + _HEAD.size :])
    return EventEnvelope(topic, sender, seq, timestamp, payload)


def topic_matches(pattern: str, topic: str) -> bool:
    if pattern.endswith("/*"):
        return topic.startswith(pattern[:-1])
    return topic == pattern


def validate_pattern(pattern: str):
    if not pattern or not pattern.isascii():
        raise MalformedPattern(f"pattern must be non-empty ASCII, got {pattern!r}")
    star = pattern.find("*")
    if star != -1 and (star != len(pattern) - 1 or not pattern.endswith("/*")):
        raise MalformedPattern(
            f"only a trailing '/*' wildcard is supported, got {pattern!r}"
        )
    if pattern == "/*":
        raise MalformedPattern("pattern has an empty prefix")


@dataclass
class Subscription:
    pattern: str
    handler: Callable[[EventEnvelope], None]
    token: int


class _PeerLink:
    def __init__(self, sock: socket.socket, initiated: bool):
        self.sock = sock
        self.initiated = initiated
        self.station: Optional[Station] = None
        self.patterns: set[str] = set()
        self.write_lock = threading.Lock()
        self.alive = True
        self.rtt: Optional[float] = None

    def send_bytes(self, frame: bytes):
        with self.write_lock:
            self.sock.sendall(frame)

    def close(self):
        self.alive = False
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


def _recv_exact(sock: socket.socket, n: int) -> Optional[bytes]:
    buf = b""
    while len(buf) < n:
        chunk = sock.recv(n - len(buf))
        if not chunk:
            return None
        buf += chunk
    return buf


def _read_frame(sock: socket.socket) -> Optional[bytes]:
    head = _recv_exact(sock, 4)
    if head is None:
        return None
    length = _U32.unpack(head)[0]
    if length > ENVELOPE_CAP:
        raise BusError(f"frame length {length} exceeds cap")
    return _recv_exact(sock, length)


class BusSession:
    """One station's connection to the mesh.

    Handlers never run concurrently with each other on one station (a single
    dispatch lock serializes them) and must not block: anything slower than
    ~1 ms is reported when the watchdog is enabled.
    """

    def __init__(
        self,
        station: Station,
        listen: bool = True,
        watchdog_ms: Optional[float] = None,
    ):
        self.station = station
        self._subs: list[Subscription] = []
        self._subs_lock = threading.Lock()
        self._next_token = 1
        self._seq_lock = threading.Lock()
        self._seq = 0
        self._peers: dict[int, _PeerLink] = {}
        self._pending: list[_PeerLink] = []
        self._peers_lock = threading.Lock()
        self._dispatch_lock = threading.RLock()
        self._watchdog_s = None if watchdog_ms is None else watchdog_ms / 1000.0
        self._closed = False
        self.unreachable: list[str] = []
        self._pong_events: dict[int, threading.Event] = {}
        self._listener: Optional[socket.socket] = None
        self._threads: list[threading.Thread] = []
        if listen and station.address:
            host, port = _split_addr(station.address)
            self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
            self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
            self._listener.bind((host, port))
            self._listener.listen(16)
            actual = self._listener.getsockname()
            self.listen_address = f"{actual[0]}:{actual[1]}"
            t = threading.Thread(target=self._accept_loop, name="bus-accept", daemon=True)
            t.start()
            self._threads.append(t)
        else:
            self.listen_address = ""

    # -- session lifecycle ---------------------------------------------------

    @classmethod
    def join_session(
        cls,
        peer_addresses: list[str],
        station: Station,
        listen: bool = True,
        watchdog_ms: Optional[float] = None,
    ) -> "BusSession":
        """Connect to every reachable peer; unreachable ones are reported in
        .unreachable and the session proceeds without them."""
        session = cls(station, listen=listen, watchdog_ms=watchdog_ms)
        for addr in peer_addresses:
            session.connect_peer(addr)
        return session

    def connect_peer(self, address: str) -> bool:
        if self._closed:
            raise NotJoined("session is closed")
        try:
            host, port = _split_addr(address)
            sock = socket.create_connection((host, port), timeout=2.0)
        except OSError as exc:
            logger.warning("peer %s unreachable: %s", address, exc)
            self.unreachable.append(address)
            return False
        link = _PeerLink(sock, initiated=True)
        with self._peers_lock:
            self._pending.append(link)
        self._send_hello(link)
        t = threading.Thread(
            target=self._reader_loop, args=(link,), name=f"bus-read-{address}", daemon=True
        )
        t.start()
        self._threads.append(t)
        return True

    def close(self):
        self._closed = True
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._peers_lock:
            links = list(self._peers.values()) + list(self._pending)
            self._peers.clear()
            self._pending.clear()
        for link in links:
            link.close()

    # -- pub/sub ---------------------------------------------------------------

    def subscribe(self, pattern: str, handler) -> int:
        validate_pattern(pattern)
        with self._subs_lock:
            token = self._next_token
            self._next_token += 1
            self._subs.append(Subscription(pattern, handler, token))
        self._broadcast_subs()
        return token

    def unsubscribe(self, token: int):
        with self._subs_lock:
            self._subs = [s for s in self._subs if s.token != token]
        self._broadcast_subs()

    def publish(self, topic: str, payload) -> EventEnvelope:
        if self._closed:
            raise NotJoined("session is closed")
        _check_topic(topic)
        env = EventEnvelope(topic, self.station.id, self._next_seq(), time.time(), payload)
        frame = encode_envelope(env)  # raises PayloadTooLarge before anything is sent
        self._dispatch_local(env)
        for link in self._links():
            if link.station is None:
                continue
            if any(topic_matches(p, topic) for p in link.patterns):
                self._safe_send(link, frame)
        return env

    def sync(self, timeout: float = 2.0) -> dict[int, float]:
        """Ping every connected peer and wait for the pongs.

        Pending handshakes are allowed to settle first, then because streams
        are ordered, any subscription update sent before the ping is
        guaranteed processed once the pong arrives; returns per-peer
        round-trip seconds (also kept in link stats).
        """
        deadline = time.time() + timeout
        while time.time() < deadline:
            with self._peers_lock:
                if not self._pending:
                    break
            time.sleep(0.005)
        events = []
        for link in self._links():
            if link.station is None:
                continue
            nonce = self._next_seq()
            ev = threading.Event()
            self._pong_events[nonce] = ev
            env = EventEnvelope(
                "_bus/ping", self.station.id, nonce, time.time(), {"nonce": nonce}
            )
            self._safe_send(link, encode_envelope(env))
            events.append((link, ev, time.time()))
        out = {}
        for link, ev, _t0 in events:
            if ev.wait(timeout) and link.station is not None:
                out[link.station.id] = link.rtt
        return out

    def link_stats(self) -> dict[int, dict]:
        stats = {}
        for link in self._links():
            if link.station is not None:
                stats[link.station.id] = {
                    "address": link.station.address,
                    "role": link.station.role.value,
                    "rtt_s": link.rtt,
                    "patterns": sorted(link.patterns),
                }
        return stats

    def peers(self) -> list[Station]:
        return [link.station for link in self._links() if link.station is not None]

    # -- internals -------------------------------------------------------------

    def _links(self) -> list[_PeerLink]:
        with self._peers_lock:
            return [l for l in self._peers.values() if l.alive]

    def _next_seq(self) -> int:
        with self._seq_lock:
            self._seq += 1
            return self._seq

    def _sub_patterns(self) -> list[str]:
        with self._subs_lock:
            return sorted({s.pattern for s in self._subs})

    def _send_hello(self, link: _PeerLink):
        payload = {
            "id": self.station.id,
            "role": self.station.role.value,
            "address": self.listen_address or self.station.address,
            "patterns": {p: True for p in self._sub_patterns()},
        }
        env = EventEnvelope("_bus/hello", self.station.id, self._next_seq(), time.time(), payload)
        self._safe_send(link, encode_envelope(env))

    def _broadcast_subs(self):
        payload = {"patterns": {p: True for p in self._sub_patterns()}}
        for link in self._links():
            env = EventEnvelope(
                "_bus/subs", self.station.id, self._next_seq(), time.time(), payload
            )
            self._safe_send(link, encode_envelope(env))

    def _safe_send(self, link: _PeerLink, frame: bytes):
        try:
            link.send_bytes(frame)
        except OSError as exc:
            logger.warning("send to peer failed, dropping link: %s", exc)
            self._drop_link(link)

    def _drop_link(self, link: _PeerLink):
        link.alive = False
        with self._peers_lock:
            if link in self._pending:
                self._pending.remove(link)
            if link.station is not None:
                current = self._peers.get(link.station.id)
                if current is link:
                    del self._peers[link.station.id]
        link.close()

    def _accept_loop(self):
        while not self._closed:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                break
            link = _PeerLink(sock, initiated=False)
            with self._peers_lock:
                self._pending.append(link)
            self._send_hello(link)
            t = threading.Thread(target=self._reader_loop, args=(link,), daemon=True)
            t.start()
            self._threads.append(t)

    def _reader_loop(self, link: _PeerLink):
        while link.alive and not self._closed:
            try:
                body = _read_frame(link.sock)
            except (OSError, BusError):
                break
            if body is None:
                break
            try:
                env = decode_envelope(body)
            except (BusError, values.CodecError) as exc:
                logger.warning("dropping undecodable envelope: %s", exc)
                continue
            if env.topic.startswith("_bus/"):
                self._handle_control(link, env)
            else:
                self._dispatch_local(env)
        self._drop_link(link)

    def _handle_control(self, link: _PeerLink, env: EventEnvelope):
        if env.topic == "_bus/hello":
            station = Station(
                int(env.payload["id"]),
                StationRole(env.payload["role"]),
                str(env.payload.get("address", "")),
            )
            link.patterns = set(env.payload.get("patterns", {}).keys())
            with self._peers_lock:
                if link in self._pending:
                    self._pending.remove(link)
                existing = self._peers.get(station.id)
                if existing is not None and existing.alive and existing is not link:
                    # Simultaneous connect in both directions: keep the link
                    # initiated by the lower station id, deterministically.
                    keep_mine = (
                        existing.initiated
                        if self.station.id < station.id
                        else not existing.initiated
                    )
                    if keep_mine:
                        link.alive = False
                        link.close()
                        return
                    existing.alive = False
                    existing.close()
                link.station = station
                self._peers[station.id] = link
            # push our current table: subscriptions made while the handshake
            # was in flight would otherwise never reach this peer
            subs = EventEnvelope(
                "_bus/subs",
                self.station.id,
                self._next_seq(),
                time.time(),
                {"patterns": {p: True for p in self._sub_patterns()}},
            )
            self._safe_send(link, encode_envelope(subs))
        elif env.topic == "_bus/subs":
            link.patterns = set(env.payload.get("patterns", {}).keys())
        elif env.topic == "_bus/ping":
            reply = EventEnvelope(
                "_bus/pong",
                self.station.id,
                self._next_seq(),
                time.time(),
                {"nonce": env.payload["nonce"], "t": env.timestamp},
            )
            self._safe_send(link, encode_envelope(reply))
        elif env.topic == "_bus/pong":
            nonce = int(env.payload["nonce"])
            link.rtt = time.time() - float(env.payload["t"])
            ev = self._pong_events.pop(nonce, None)
            if ev is not None:
                ev.set()

    def _dispatch_local(self, env: EventEnvelope):
        with self._subs_lock:
            matches = [s for s in self._subs if topic_matches(s.pattern, env.topic)]
        with self._dispatch_lock:
            for sub in matches:
                start = time.perf_counter()
                try:
                    sub.handler(env)
                except Exception:
                    logger.exception("subscriber for %r failed on %s", sub.pattern, env.topic)
                if self._watchdog_s is not None:
                    elapsed = time.perf_counter() - start
                    if elapsed > self._watchdog_s:
                        logger.warning(
                            "handler for %r blocked dispatch for %.2f ms",
                            sub.pattern,
                            elapsed * 1e3,
                        )


def _split_addr(address: str) -> tuple[str, int]:
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise BusError(f"address must be host:port, got {address!r}")
    return host, int(port)
