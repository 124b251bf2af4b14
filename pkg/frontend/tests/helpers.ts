// Shared test scaffolding: the recorded API session and an EventSource
// substitute (jsdom ships none) that tests drive by hand.

import { readFileSync } from "node:fs";
import { resolve } from "node:path";
import type { AlertMsg, AssistantResponse } from "../src/types.js";

// vitest runs with the frontend directory as its root
const fixturePath = resolve("tests/fixtures/recorded_session.json");

export interface RecordedSession {
  patients: { patients: { patient_id: string; name: string }[] };
  chat_plot: AssistantResponse;
  chat_instant: AssistantResponse;
  chat_recognition: AssistantResponse;
  latest: Record<string, unknown>;
  alert_stream_lines: string[];
  alerts_log: { alerts: AlertMsg[] };
}

export function loadSession(): RecordedSession {
  return JSON.parse(readFileSync(fixturePath, "utf-8")) as RecordedSession;
}

/** The recorded SSE lines, parsed back into (id, alert) pairs. */
export function recordedStreamEvents(session: RecordedSession): { id: string; alert: AlertMsg }[] {
  const events: { id: string; alert: AlertMsg }[] = [];
  let id = "";
  for (const line of session.alert_stream_lines) {
    if (line.startsWith("id: ")) id = line.slice(4).trim();
    if (line.startsWith("data: ")) events.push({ id, alert: JSON.parse(line.slice(6)) });
  }
  return events;
}

export class MockEventSource {
  static instances: MockEventSource[] = [];
  static reset(): void {
    MockEventSource.instances = [];
  }

  onopen: ((e: Event) => void) | null = null;
  onmessage: ((e: MessageEvent) => void) | null = null;
  onerror: ((e: Event) => void) | null = null;
  closed = false;

  constructor(public url: string) {
    MockEventSource.instances.push(this);
  }

  open(): void {
    this.onopen?.(new Event("open"));
  }

  message(data: string, lastEventId = ""): void {
    this.onmessage?.({ data, lastEventId } as MessageEvent);
  }

  fail(): void {
    this.onerror?.(new Event("error"));
  }

  close(): void {
    this.closed = true;
  }
}

export function installMockEventSource(): void {
  MockEventSource.reset();
  (globalThis as Record<string, unknown>).EventSource = MockEventSource;
}
