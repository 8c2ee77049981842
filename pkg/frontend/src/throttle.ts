// Mid-stroke live preview batching: during a long paint gesture the pending
// points are flushed at most once per interval, plus a final flush on
// pointer-up, so the service sees at most one wand request per 250 ms.

export type FlushFn = (points: [number, number][], final: boolean) => void;

export class StrokeBatcher {
  private pending: [number, number][] = [];
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private queuedFlush: { points: [number, number][]; final: boolean } | null = null;

  constructor(
    private flush: FlushFn,
    private intervalMs: number = 250
  ) {}

  start(): void {
    this.pending = [];
    if (this.timer === null) {
      this.timer = setInterval(() => this.flushPending(false), this.intervalMs);
    }
  }

  add(x: number, y: number): void {
    this.pending.push([x, y]);
  }

  end(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.flushPending(true);
  }

  /** One in-flight request at a time; later flushes merge into one queued batch. */
  notifyDone(): void {
    this.inFlight = false;
    if (this.queuedFlush) {
      const { points, final } = this.queuedFlush;
      this.queuedFlush = null;
      this.dispatch(points, final);
    }
  }

  private flushPending(final: boolean): void {
    if (this.pending.length === 0) {
      if (final && this.queuedFlush) this.queuedFlush.final = true;
      return;
    }
    const points = this.pending;
    this.pending = [];
    this.dispatch(points, final);
  }

  private dispatch(points: [number, number][], final: boolean): void {
    if (this.inFlight) {
      if (this.queuedFlush) {
        this.queuedFlush.points.push(...points);
        this.queuedFlush.final = this.queuedFlush.final || final;
      } else {
        this.queuedFlush = { points, final };
      }
      return;
    }
    this.inFlight = true;
    this.flush(points, final);
  }
}
