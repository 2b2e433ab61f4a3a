// Console session: hello handshake, command acknowledgments, and the live
// frame-summary stream. The console holds no truth of its own — every
// displayed quantity comes from the newest summary, and each command is
// tracked until the server acks it (or two summaries pass, which the UI
// surfaces as a timeout).

import {
  Ack,
  FrameSummary,
  Message,
  Role,
  SceneSummary,
  Welcome,
  parseMessage,
  roleAllows,
} from "./protocol.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
}

export type AckResult = {
  seq: number;
  topic: string;
  ok: boolean;
  error: string;
  timedOut: boolean;
};

export type SessionEvents = {
  onWelcome?: (welcome: Welcome) => void;
  onSummary?: (summary: FrameSummary) => void;
  onAck?: (result: AckResult) => void;
  onError?: (error: string) => void;
};

type Pending = { topic: string; atSummary: number };

export const ACK_SUMMARY_BUDGET = 2;

export class ConsoleSession {
  readonly role: Role;
  stationId: number | null = null;
  scene: SceneSummary | null = null;
  latest: FrameSummary | null = null;
  summaryCount = 0;

  private socket: SocketLike;
  private events: SessionEvents;
  private seq = 0;
  private pending = new Map<number, Pending>();

  constructor(socket: SocketLike, role: Role, events: SessionEvents = {}) {
    this.socket = socket;
    this.role = role;
    this.events = events;
    this.rawSend("console/hello", { role });
  }

  /** Feed one raw frame from the transport. */
  receive(raw: string): void {
    const msg = parseMessage(raw);
    if (!msg) return;
    switch (msg.topic) {
      case "console/welcome": {
        const welcome = msg.payload as unknown as Welcome;
        this.stationId = welcome.station_id;
        this.scene = welcome.scene;
        this.events.onWelcome?.(welcome);
        break;
      }
      case "console/error": {
        this.events.onError?.(String(msg.payload["error"] ?? "unknown error"));
        break;
      }
      case "console/ack": {
        const ack = msg.payload as unknown as Ack;
        const pending = this.pending.get(ack.for_seq);
        if (pending) {
          this.pending.delete(ack.for_seq);
          this.events.onAck?.({
            seq: ack.for_seq,
            topic: pending.topic,
            ok: ack.ok,
            error: ack.error ?? "",
            timedOut: false,
          });
        }
        break;
      }
      case "tick/frame": {
        this.latest = msg.payload as unknown as FrameSummary;
        this.summaryCount += 1;
        this.expirePending();
        this.events.onSummary?.(this.latest);
        break;
      }
    }
  }

  /** Commands still waiting for an acknowledgment. */
  pendingCount(): number {
    return this.pending.size;
  }

  // -- commands (role checked; the UI additionally hides what it may not send)

  sendTakeover(goal: { x: number; z: number }, speed?: number): number {
    const payload: Record<string, unknown> = { x: goal.x, z: goal.z };
    if (speed !== undefined) payload["speed"] = speed;
    return this.command("pathfind/takeover", payload);
  }

  sendRelease(preset?: string): number {
    return this.command("pathfind/release", preset ? { preset } : {});
  }

  applyPreset(name: string): number {
    return this.command("preset/apply", { name });
  }

  sendNudge(dx: number, dz: number, dyaw: number): number {
    return this.command("puppeteer/refmove", { dx, dz, dyaw });
  }

  setMode(mode: "Fixed" | "Manipulated"): number {
    return this.command("composition/mode", { mode });
  }

  moveCamera(deltas: Partial<Record<"dx" | "dy" | "dz" | "dyaw" | "dpitch" | "dfov", number>>): number {
    return this.command("composition/camera", deltas);
  }

  adjustLight(id: string, dintensity: number): number {
    return this.command("composition/light", { id, dintensity });
  }

  canSend(topic: string): boolean {
    return roleAllows(this.role, topic);
  }

  // -- derived view state ----------------------------------------------------

  ownerBadge(): string {
    if (!this.latest) return "—";
    return this.latest.owner === "PathfinderLocomotion" ? "Pathfinder" : "Mocaptor";
  }

  slidersEnabled(): boolean {
    return (
      this.latest?.mode === "Manipulated" &&
      (this.canSend("composition/camera") || this.canSend("composition/light"))
    );
  }

  close(): void {
    this.socket.close();
  }

  private command(topic: string, payload: Record<string, unknown>): number {
    if (!this.canSend(topic)) {
      throw new Error(`role ${this.role} may not send ${topic}`);
    }
    return this.rawSend(topic, payload);
  }

  private rawSend(topic: string, payload: Record<string, unknown>): number {
    this.seq += 1;
    const message: Message = { topic, seq: this.seq, payload };
    this.socket.send(JSON.stringify(message));
    if (topic !== "console/hello") {
      this.pending.set(this.seq, { topic, atSummary: this.summaryCount });
    }
    return this.seq;
  }

  private expirePending(): void {
    for (const [seq, entry] of [...this.pending]) {
      if (this.summaryCount - entry.atSummary >= ACK_SUMMARY_BUDGET) {
        this.pending.delete(seq);
        this.events.onAck?.({
          seq,
          topic: entry.topic,
          ok: false,
          error: `no acknowledgment within ${ACK_SUMMARY_BUDGET} frame summaries`,
          timedOut: true,
        });
      }
    }
  }
}
