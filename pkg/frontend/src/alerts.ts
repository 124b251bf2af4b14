// Live alert subscription and its two surfaces: a prominent banner for
// falls and a feed row per vital-sign violation. Acknowledging a banner
// only dims it locally; the feed itself is read-only.

import type { AlertMsg } from "./types.js";

const RETRY_MS = 2000;

export class AlertStream {
  onAlert: (alert: AlertMsg) => void = () => {};
  onStatus: (connected: boolean) => void = () => {};
  cursor = 0;

  private es: EventSource | null = null;
  private stopped = false;
  private retryTimer: ReturnType<typeof setTimeout> | null = null;

  constructor(private base = "", private retryMs = RETRY_MS) {}

  connect(): void {
    this.stopped = false;
    this.es = new EventSource(`${this.base}/alerts/stream?cursor=${this.cursor}`);
    this.es.onopen = () => this.onStatus(true);
    this.es.onmessage = (event: MessageEvent) => {
      if (event.lastEventId) {
        this.cursor = parseInt(event.lastEventId, 10);
      }
      this.onAlert(JSON.parse(event.data) as AlertMsg);
    };
    this.es.onerror = () => {
      this.onStatus(false);
      this.es?.close();
      if (!this.stopped) {
        // resubscribe from the last seen cursor after a short backoff
        this.retryTimer = setTimeout(() => this.connect(), this.retryMs);
      }
    };
  }

  close(): void {
    this.stopped = true;
    if (this.retryTimer) clearTimeout(this.retryTimer);
    this.es?.close();
  }
}

function describe(alert: AlertMsg): string {
  if (alert.kind === "fall") {
    const p = alert.detail["probability"];
    const score = typeof p === "number" ? ` (score ${p.toFixed(2)})` : "";
    return `FALL detected for patient ${alert.patient_id}${score}`;
  }
  const sign = String(alert.detail["sign"] ?? "?");
  const value = alert.detail["value"];
  const lo = alert.detail["healthy_lo"];
  const hi = alert.detail["healthy_hi"];
  const range = hi == null ? `>= ${lo}` : `${lo}-${hi}`;
  return `${alert.patient_id}: ${sign} ${value} outside healthy ${range}`;
}

export class AlertsView {
  readonly banner: HTMLDivElement;
  readonly feed: HTMLUListElement;
  readonly status: HTMLSpanElement;

  constructor(root: HTMLElement) {
    this.banner = document.createElement("div");
    this.banner.className = "alert-banner";
    this.banner.hidden = true;

    this.status = document.createElement("span");
    this.status.className = "stream-status";
    this.status.textContent = "connecting…";

    this.feed = document.createElement("ul");
    this.feed.className = "alert-feed";

    const header = document.createElement("div");
    header.className = "alerts-header";
    header.append("Live alerts ", this.status);
    root.append(this.banner, header, this.feed);
  }

  setConnected(connected: boolean): void {
    this.status.textContent = connected ? "live" : "reconnecting…";
    this.status.classList.toggle("disconnected", !connected);
  }

  render(alert: AlertMsg): void {
    // feed rows appear strictly in delivery order
    const row = document.createElement("li");
    row.className = `alert-row alert-${alert.kind}`;
    row.dataset.alertId = alert.alert_id;
    row.textContent = `${new Date(alert.t_detected).toISOString().slice(11, 19)}  ${describe(alert)}`;
    this.feed.appendChild(row);

    if (alert.kind === "fall") {
      this.banner.hidden = false;
      this.banner.className = "alert-banner active";
      this.banner.replaceChildren();
      this.banner.append(describe(alert) + " ");
      const ack = document.createElement("button");
      ack.textContent = "Acknowledge";
      ack.onclick = () => this.banner.classList.add("acknowledged");
      this.banner.appendChild(ack);
    }
  }
}
