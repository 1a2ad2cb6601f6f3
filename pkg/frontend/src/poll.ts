// Polling with coalescing: if a tick is still in flight when the next
// interval fires, the new tick is skipped (server state wins, no pile-up).

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;

  constructor(
    private tick: () => Promise<void>,
    private intervalMs = 2000,
  ) {}

  start(): void {
    this.stop();
    this.timer = setInterval(() => {
      void this.run();
    }, this.intervalMs);
  }

  async run(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      await this.tick();
    } catch {
      // transient polling errors are ignored; the next tick retries
    } finally {
      this.inFlight = false;
    }
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }
}
