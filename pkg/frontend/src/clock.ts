/** Server-aligned clock.
 *
 * Countdowns compare the server-declared deadline against server time, so
 * client clock skew cannot keep a countdown alive past the real deadline.
 * The offset is re-estimated from the timestamp on every received event.
 */
export class ServerClock {
  private offsetMs = 0;

  constructor(private readonly localNow: () => number = () => Date.now()) {}

  /** Record that the server considered `serverTs` to be "now-ish". */
  observe(serverTs: number): void {
    const skew = serverTs - this.localNow();
    // only move forward: a stale event must not drag server time backwards
    if (skew > this.offsetMs) this.offsetMs = skew;
  }

  now(): number {
    return this.localNow() + this.offsetMs;
  }

  /** Milliseconds until `deadlineTs`, clamped at zero. */
  remaining(deadlineTs: number): number {
    return Math.max(0, deadlineTs - this.now());
  }
}
