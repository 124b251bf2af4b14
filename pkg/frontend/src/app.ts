// Single-page clinician UI: patient selector, chat panel, live alerts,
// vitals chart pane and snapshot pane, all backed by the cloud API only.

import { Api } from "./api.js";
import { AlertStream, AlertsView } from "./alerts.js";
import { ChatPanel } from "./chat.js";
import { renderPlotSpec } from "./chart.js";
import type { SnapshotJson } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(tag: K, cls: string): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  node.className = cls;
  return node;
}

export function boot(root: HTMLElement, api = new Api()): void {
  const alertsPane = el("section", "pane alerts-pane");
  const chatPane = el("section", "pane chat-pane");
  const sidePane = el("section", "pane side-pane");

  const selector = document.createElement("select");
  selector.className = "patient-selector";
  const selectorLabel = el("label", "selector-label");
  selectorLabel.append("Patient: ", selector);

  const snapshotPane = el("div", "snapshot-pane");
  const chartPane = el("div", "vitals-chart-pane");
  const plotButton = document.createElement("button");
  plotButton.textContent = "Chart today's vitals";
  sidePane.append(selectorLabel, plotButton, chartPane, snapshotPane);

  root.append(alertsPane, chatPane, sidePane);

  const alertsView = new AlertsView(alertsPane);
  const stream = new AlertStream();
  stream.onAlert = (alert) => alertsView.render(alert);
  stream.onStatus = (ok) => alertsView.setConnected(ok);
  stream.connect();

  const chat = new ChatPanel(chatPane, api);

  async function refreshSnapshot(): Promise<void> {
    snapshotPane.replaceChildren();
    try {
      const latest = await api.latest(selector.value);
      const snap = latest["snapshot"] as SnapshotJson | null;
      if (snap) {
        const img = document.createElement("img");
        img.src = `data:${snap.mime};base64,${snap.media_b64}`;
        img.alt = `latest snapshot of ${selector.value}`;
        snapshotPane.appendChild(img);
      } else {
        snapshotPane.textContent = "no snapshot yet";
      }
    } catch (err) {
      snapshotPane.textContent = `latest data unavailable: ${err}`;
    }
  }

  plotButton.onclick = async () => {
    chartPane.replaceChildren();
    try {
      const response = await api.chat(`Plot all vitals of patient ${selector.value} today.`);
      chartPane.appendChild(
        response.plot
          ? renderPlotSpec(response.plot)
          : Object.assign(document.createElement("div"), { textContent: response.answer_text }),
      );
    } catch (err) {
      chartPane.textContent = String(err);
    }
  };

  selector.onchange = () => void refreshSnapshot();

  void api
    .patients()
    .then((patients) => {
      for (const p of patients) {
        const option = document.createElement("option");
        option.value = p.patient_id;
        option.textContent = `${p.name} (${p.patient_id})`;
        selector.appendChild(option);
      }
      if (patients.length) void refreshSnapshot();
    })
    .catch(() => {
      selectorLabel.append(" (patient list unavailable)");
    });

  // expose for debugging in the console
  (window as unknown as Record<string, unknown>).remoni = { api, stream, chat };
}

if (typeof document !== "undefined" && document.getElementById("app")) {
  boot(document.getElementById("app") as HTMLElement);
}
