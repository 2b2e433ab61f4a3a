// Nudge streaming: pointer pads and gamepad axes arrive at whatever rate the
// browser produces; the server sees at most `maxHz` reference-move events,
// with the deltas accumulated in between. Axis values inside the dead zone
// contribute nothing, so an idle stick emits no events at all.

export type NudgeSender = (dx: number, dz: number, dyaw: number) => void;

export class NudgeStreamer {
  readonly maxHz: number;
  readonly deadZone: number;

  private send: NudgeSender;
  private accX = 0;
  private accZ = 0;
  private accYaw = 0;
  private lastEmit = 0;
  private stopped = false;

  constructor(send: NudgeSender, maxHz = 30, deadZone = 0.1) {
    this.send = send;
    this.maxHz = maxHz;
    this.deadZone = deadZone;
  }

  /** Feed axis values in [-1, 1] plus the time since the last poll. */
  input(axisX: number, axisZ: number, axisYaw: number, dtSeconds: number, nowSeconds: number): void {
    if (this.stopped) return;
    const dz = (v: number) => (Math.abs(v) < this.deadZone ? 0 : v);
    this.accX += dz(axisX) * dtSeconds;
    this.accZ += dz(axisZ) * dtSeconds;
    this.accYaw += dz(axisYaw) * 60 * dtSeconds; // degrees at 60 deg/s full tilt
    this.maybeEmit(nowSeconds);
  }

  /** Feed an absolute delta (on-screen nudge buttons). */
  impulse(dx: number, dz: number, dyaw: number, nowSeconds: number): void {
    if (this.stopped) return;
    this.accX += dx;
    this.accZ += dz;
    this.accYaw += dyaw;
    this.maybeEmit(nowSeconds);
  }

  /** Gamepad unplugged or pad released: stop cleanly, no trailing events. */
  stop(): void {
    this.stopped = true;
    this.accX = this.accZ = this.accYaw = 0;
  }

  resume(): void {
    this.stopped = false;
  }

  private maybeEmit(nowSeconds: number): void {
    if (this.accX === 0 && this.accZ === 0 && this.accYaw === 0) return;
    if (nowSeconds - this.lastEmit < 1 / this.maxHz) return;
    this.send(this.accX, this.accZ, this.accYaw);
    this.accX = this.accZ = this.accYaw = 0;
    this.lastEmit = nowSeconds;
  }
}
