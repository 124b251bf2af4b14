import { afterEach, beforeEach, describe, expect, it, vi } from "vitest";

import { AlertStream } from "../src/alerts.js";
import { MockEventSource, installMockEventSource, loadSession, recordedStreamEvents } from "./helpers.js";

const events = recordedStreamEvents(loadSession());

beforeEach(() => {
  installMockEventSource();
  vi.useFakeTimers();
});

afterEach(() => {
  vi.useRealTimers();
});

describe("stream reconnect behavior", () => {
  it("reports the connection drop and resubscribes from the last cursor", () => {
    const stream = new AlertStream("", 500);
    const status: boolean[] = [];
    stream.onStatus = (ok) => status.push(ok);
    stream.connect();

    const first = MockEventSource.instances[0];
    expect(first.url).toContain("cursor=0");
    first.open();
    first.message(JSON.stringify(events[0].alert), events[0].id);
    first.fail();

    expect(status).toEqual([true, false]); // reconnect indicator state
    expect(first.closed).toBe(true);
    expect(MockEventSource.instances.length).toBe(1);

    vi.advanceTimersByTime(500);
    expect(MockEventSource.instances.length).toBe(2);
    const second = MockEventSource.instances[1];
    expect(second.url).toContain(`cursor=${events[0].id}`);
    second.open();
    expect(status).toEqual([true, false, true]);
  });

  it("does not reconnect after an explicit close", () => {
    const stream = new AlertStream("", 500);
    stream.connect();
    const first = MockEventSource.instances[0];
    stream.close();
    first.fail();
    vi.advanceTimersByTime(5000);
    expect(MockEventSource.instances.length).toBe(1);
  });

  it("keeps advancing the cursor across deliveries", () => {
    const stream = new AlertStream("", 500);
    stream.onAlert = () => {};
    stream.connect();
    const es = MockEventSource.instances[0];
    for (const e of events) {
      es.message(JSON.stringify(e.alert), e.id);
    }
    expect(stream.cursor).toBe(parseInt(events[events.length - 1].id, 10));
  });
});
