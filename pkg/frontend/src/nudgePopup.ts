/** Student nudge popup: live countdown with a hard deadline.
 *
 * The countdown renders max(0, deadline - serverNow) and never goes
 * negative. If the student does nothing, the popup sends exactly one
 * automatic decline when the countdown reaches zero — the server's own
 * expiry remains authoritative, so a raced duplicate is rejected there.
 */
import type { ApiError } from "./api.js";
import type { TicketJson, UiNudgeOffer } from "./types.js";

export type PopupState =
  | "counting"
  | "accepted"
  | "declined"
  | "timed_out"
  | "retracted"
  | "expired";

export interface PopupApi {
  respondNudge(nudgeId: string, response: "ACCEPT" | "DECLINE"): Promise<TicketJson>;
}

export interface PopupClock {
  remaining(deadlineTs: number): number;
}

export interface PopupOptions {
  api: PopupApi;
  clock: PopupClock;
  /** Called with the session id after a successful accept. */
  onNavigateToSession: (sessionId: string) => void;
  /** Called whenever the popup should repaint (state or countdown change). */
  onRender?: (popup: NudgePopup) => void;
  tickMs?: number;
}

export class NudgePopup {
  state: PopupState = "counting";
  remainingMs: number;
  private declinesSent = 0;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(
    readonly offer: UiNudgeOffer,
    private readonly opts: PopupOptions,
  ) {
    this.remainingMs = opts.clock.remaining(offer.deadlineTs);
    this.timer = setInterval(() => this.tick(), opts.tickMs ?? 250);
    this.tick();
  }

  /** For tests: how many DECLINEs this popup has posted. */
  get declineCount(): number {
    return this.declinesSent;
  }

  get open(): boolean {
    return this.state === "counting";
  }

  private tick(): void {
    if (this.state !== "counting") return;
    this.remainingMs = this.opts.clock.remaining(this.offer.deadlineTs);
    if (this.remainingMs <= 0) {
      this.resolve("timed_out");
      this.postDecline();
    }
    this.opts.onRender?.(this);
  }

  async accept(): Promise<void> {
    if (this.state !== "counting") return;
    this.resolve("accepted");
    try {
      const ticket = await this.opts.api.respondNudge(this.offer.nudgeId, "ACCEPT");
      if (ticket.session_id) this.opts.onNavigateToSession(ticket.session_id);
    } catch (err) {
      // the server expired the offer while the click was in flight
      if ((err as ApiError).status === 410) {
        this.state = "expired";
        this.opts.onRender?.(this);
        return;
      }
      throw err;
    }
  }

  decline(): void {
    if (this.state !== "counting") return;
    this.resolve("declined");
    this.postDecline();
  }

  /** The offer was withdrawn (ticket cancelled); close without responding. */
  retract(): void {
    if (this.state !== "counting") return;
    this.resolve("retracted");
  }

  private resolve(state: PopupState): void {
    this.state = state;
    this.remainingMs = 0;
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
    this.opts.onRender?.(this);
  }

  private postDecline(): void {
    if (this.declinesSent > 0) return;
    this.declinesSent += 1;
    // fire and forget: a 409/410 just means the server already resolved it
    void this.opts.api.respondNudge(this.offer.nudgeId, "DECLINE").catch(() => undefined);
  }
}
