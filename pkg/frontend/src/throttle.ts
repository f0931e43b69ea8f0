// Drag throttling: intermediate poses at most maxPerSecond, the release pose
// always sent exactly.

export class DragThrottle<T> {
  private lastSent = -Infinity;
  private pending: T | null = null;
  private readonly interval: number;

  constructor(
    private send: (value: T) => void,
    maxPerSecond = 30,
    private clock: () => number = () => performance.now(),
  ) {
    this.interval = 1000 / maxPerSecond;
  }

  /** Called on every pointer-move during a drag. */
  update(value: T): void {
    const now = this.clock();
    if (now - this.lastSent >= this.interval) {
      this.lastSent = now;
      this.pending = null;
      this.send(value);
    } else {
      this.pending = value;
    }
  }

  /** Called on release: the exact final value always goes out. */
  finish(value: T): void {
    this.pending = null;
    this.lastSent = this.clock();
    this.send(value);
  }
}
