import type { ProgressEvent } from "./types.js";

/** Minimal slice of EventSource we rely on, so tests can inject a fake. */
export interface EventSourceLike {
  addEventListener(type: string, cb: (ev: { data: string }) => void): void;
  close(): void;
}

export type EventSourceFactory = (
  url: string,
  lastEventId: number | null
) => EventSourceLike;

/** Default factory: native EventSource. Resume position travels as a query
 * parameter, which the server treats the same as a Last-Event-ID header. */
export const nativeEventSource: EventSourceFactory = (url, lastEventId) => {
  const resumed =
    lastEventId === null ? url : `${url}?last_event_id=${lastEventId}`;
  return new EventSource(resumed) as unknown as EventSourceLike;
};

export interface JobStreamHandlers {
  onEvent: (event: ProgressEvent) => void;
  onEnd?: () => void;
}

/**
 * Subscribes to a job's SSE stream and survives disconnects: on error it
 * reopens from the last sequence seen and drops replayed duplicates, so
 * handlers observe each sequence exactly once, gap-free and in order.
 */
export class JobStream {
  private source: EventSourceLike | null = null;
  private lastSequence: number | null = null;
  private closed = false;

  constructor(
    private url: string,
    private handlers: JobStreamHandlers,
    private factory: EventSourceFactory = nativeEventSource,
    private reconnectDelayMs = 500
  ) {
    this.connect();
  }

  private connect(): void {
    if (this.closed) return;
    const source = this.factory(this.url, this.lastSequence);
    this.source = source;
    source.addEventListener("progress", (ev) => {
      let event: ProgressEvent;
      try {
        event = JSON.parse(ev.data);
      } catch {
        return; // torn frame; reconnect replay will re-deliver it intact
      }
      if (this.lastSequence !== null && event.sequence <= this.lastSequence) {
        return; // duplicate from replay overlap
      }
      this.lastSequence = event.sequence;
      this.handlers.onEvent(event);
    });
    source.addEventListener("end", () => {
      this.close();
      this.handlers.onEnd?.();
    });
    source.addEventListener("error", () => this.restart());
  }

  private restart(): void {
    if (this.closed) return;
    this.source?.close();
    this.source = null;
    setTimeout(() => this.connect(), this.reconnectDelayMs);
  }

  close(): void {
    this.closed = true;
    this.source?.close();
    this.source = null;
  }
}
