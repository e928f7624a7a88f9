/** Per-user event stream with resume.
 *
 * Wraps a server-sent-events source; every frame carries the global seq, so
 * after a disconnect the stream reconnects with ?last_seq=<highest seen> and
 * the server replays anything missed. Frames at or below the cursor are
 * dropped, making delivery to subscribers exactly-once in seq order.
 */
import type { EventRecord } from "./types.js";

export interface StreamSource {
  onRecord(handler: (record: EventRecord) => void): void;
  onDisconnect(handler: () => void): void;
  close(): void;
}

/** Opens one physical connection; called again with the cursor on reconnect. */
export type SourceFactory = (lastSeq: number) => StreamSource;

export class EventStream {
  private lastSeq: number;
  private source: StreamSource | null = null;
  private subscribers: Array<(record: EventRecord) => void> = [];
  private closed = false;

  constructor(
    private readonly connect: SourceFactory,
    startSeq = 0,
  ) {
    this.lastSeq = startSeq;
  }

  get cursor(): number {
    return this.lastSeq;
  }

  subscribe(handler: (record: EventRecord) => void): void {
    this.subscribers.push(handler);
  }

  open(): void {
    if (this.closed) return;
    this.source = this.connect(this.lastSeq);
    this.source.onRecord((record) => this.deliver(record));
    this.source.onDisconnect(() => {
      this.source = null;
      // resume from the cursor; server backlog fills the gap
      this.open();
    });
  }

  close(): void {
    this.closed = true;
    this.source?.close();
    this.source = null;
  }

  private deliver(record: EventRecord): void {
    if (record.seq <= this.lastSeq) return; // duplicate across reconnects
    this.lastSeq = record.seq;
    for (const handler of this.subscribers) handler(record);
  }
}
