import { describe, expect, it } from "vitest";

import { roleAllows } from "../src/protocol.js";
import { ACK_SUMMARY_BUDGET, AckResult, ConsoleSession, SocketLike } from "../src/session.js";

class FakeSocket implements SocketLike {
  sent: { topic: string; seq: number; payload: Record<string, unknown> }[] = [];
  closed = false;
  send(data: string): void {
    this.sent.push(JSON.parse(data));
  }
  close(): void {
    this.closed = true;
  }
}

const WELCOME = JSON.stringify({
  topic: "console/welcome",
  seq: 1,
  payload: {
    station_id: 1001,
    role: "Manipulator",
    scene: {
      name: "t", stage: { x0: 0, z0: 0, x1: 10, z1: 10 },
      obstacles: [], zones: [], presets: [], lights: [], decimation: 6,
    },
  },
});

function summary(tick: number, owner = "MocaptorFull", mode = "Fixed"): string {
  return JSON.stringify({
    topic: "tick/frame",
    seq: tick,
    payload: {
      tick, owner, mode,
      disposition: { x: 1, z: 2, yaw: 30 },
      camera: { pos: [0, 0, 0], yaw: 0, pitch: 0, fov: 60 },
      lights: {}, health: { replayA: "fresh" }, regions: {}, pose: { joints: 40 },
    },
  });
}

function ack(forSeq: number, ok: boolean, error = ""): string {
  return JSON.stringify({
    topic: "console/ack", seq: 0, payload: { for_seq: forSeq, ok, error },
  });
}

describe("ConsoleSession", () => {
  it("opens with a hello declaring the role", () => {
    const sock = new FakeSocket();
    new ConsoleSession(sock, "Manipulator");
    expect(sock.sent[0].topic).toBe("console/hello");
    expect(sock.sent[0].payload.role).toBe("Manipulator");
  });

  it("stores the welcome and scene", () => {
    const sock = new FakeSocket();
    const session = new ConsoleSession(sock, "Manipulator");
    session.receive(WELCOME);
    expect(session.stationId).toBe(1001);
    expect(session.scene?.stage.x1).toBe(10);
  });

  it("displays only what the latest summary says", () => {
    const sock = new FakeSocket();
    const session = new ConsoleSession(sock, "Manipulator");
    session.receive(WELCOME);
    expect(session.ownerBadge()).toBe("—");
    session.receive(summary(6));
    expect(session.ownerBadge()).toBe("Mocaptor");
    session.receive(summary(12, "PathfinderLocomotion"));
    expect(session.ownerBadge()).toBe("Pathfinder");
    expect(session.latest?.tick).toBe(12);
  });

  it("matches acks to pending commands", () => {
    const acks: AckResult[] = [];
    const sock = new FakeSocket();
    const session = new ConsoleSession(sock, "Manipulator", {
      onAck: (r) => acks.push(r),
    });
    session.receive(WELCOME);
    const seq = session.sendTakeover({ x: 9, z: 9 });
    expect(session.pendingCount()).toBe(1);
    session.receive(ack(seq, true));
    expect(acks).toEqual([
      { seq, topic: "pathfind/takeover", ok: true, error: "", timedOut: false },
    ]);
    expect(session.pendingCount()).toBe(0);
  });

  it("surfaces server refusals inline", () => {
    const acks: AckResult[] = [];
    const sock = new FakeSocket();
    const session = new ConsoleSession(sock, "Manipulator", { onAck: (r) => acks.push(r) });
    const seq = session.sendTakeover({ x: 5, z: 5 });
    session.receive(ack(seq, false, "NoPath: goal unreachable"));
    expect(acks[0].ok).toBe(false);
    expect(acks[0].error).toContain("NoPath");
  });

  it("times a command out after two frame summaries without an ack", () => {
    const acks: AckResult[] = [];
    const sock = new FakeSocket();
    const session = new ConsoleSession(sock, "Manipulator", { onAck: (r) => acks.push(r) });
    session.sendRelease();
    session.receive(summary(1));
    expect(acks).toHaveLength(0);
    session.receive(summary(2));
    expect(acks).toHaveLength(1);
    expect(acks[0].timedOut).toBe(true);
    expect(ACK_SUMMARY_BUDGET).toBe(2);
  });

  it("refuses commands outside the role's capability table", () => {
    const sock = new FakeSocket();
    const manipulator = new ConsoleSession(sock, "Manipulator");
    expect(() => manipulator.setMode("Fixed")).toThrow(/may not send/);
    expect(() => manipulator.moveCamera({ dyaw: 5 })).toThrow(/may not send/);
    const artist = new ConsoleSession(new FakeSocket(), "DigitalArtist");
    expect(() => artist.sendTakeover({ x: 1, z: 1 })).toThrow(/may not send/);
    // nothing beyond the hello ever reached the wire
    expect(sock.sent.filter((m) => m.topic !== "console/hello")).toHaveLength(0);
  });

  it("role capability table matches the server's gates", () => {
    expect(roleAllows("Manipulator", "pathfind/takeover")).toBe(true);
    expect(roleAllows("Manipulator", "composition/mode")).toBe(false);
    expect(roleAllows("Director", "composition/mode")).toBe(true);
    expect(roleAllows("DigitalArtist", "composition/camera")).toBe(true);
    expect(roleAllows("DigitalArtist", "pathfind/release")).toBe(false);
  });

  it("sliders enable only in Manipulated mode for composition roles", () => {
    const artist = new ConsoleSession(new FakeSocket(), "DigitalArtist");
    artist.receive(summary(1, "MocaptorFull", "Fixed"));
    expect(artist.slidersEnabled()).toBe(false);
    artist.receive(summary(2, "MocaptorFull", "Manipulated"));
    expect(artist.slidersEnabled()).toBe(true);
    const manipulator = new ConsoleSession(new FakeSocket(), "Manipulator");
    manipulator.receive(summary(2, "MocaptorFull", "Manipulated"));
    expect(manipulator.slidersEnabled()).toBe(false);
  });

  it("ignores malformed frames", () => {
    const session = new ConsoleSession(new FakeSocket(), "Manipulator");
    session.receive("not json");
    session.receive('{"nope": 1}');
    expect(session.latest).toBeNull();
  });
});
