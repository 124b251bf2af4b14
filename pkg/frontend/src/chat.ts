// Chat panel: posts questions, renders each turn in submission order
// (text answer, chart built from the server's plot spec, snapshot image).

import type { Api } from "./api.js";
import type { AssistantResponse } from "./types.js";
import { renderPlotSpec } from "./chart.js";

export function renderTurn(question: string, response: AssistantResponse): HTMLElement {
  const turn = document.createElement("div");
  turn.className = "chat-turn";

  const q = document.createElement("div");
  q.className = "chat-question";
  q.textContent = question;

  const a = document.createElement("div");
  a.className = "chat-answer";
  a.textContent = response.answer_text;
  turn.append(q, a);

  if (response.plot) {
    turn.appendChild(renderPlotSpec(response.plot));
  }
  if (response.image) {
    const img = document.createElement("img");
    img.className = "chat-snapshot";
    img.src = `data:${response.image.mime};base64,${response.image.media_b64}`;
    img.alt = `snapshot of patient ${response.image.patient_id}`;
    turn.appendChild(img);
  }

  const total = response.timings_ms["total_ms"];
  const timing = document.createElement("div");
  timing.className = "chat-timing";
  timing.textContent =
    (total !== undefined ? `${total.toFixed(0)} ms` : "") +
    (response.data_source ? ` · source: ${response.data_source}` : "");
  turn.appendChild(timing);
  return turn;
}

export class ChatPanel {
  readonly log: HTMLDivElement;
  readonly form: HTMLFormElement;
  readonly input: HTMLInputElement;

  constructor(root: HTMLElement, private api: Api) {
    this.log = document.createElement("div");
    this.log.className = "chat-log";

    this.form = document.createElement("form");
    this.form.className = "chat-form";
    this.input = document.createElement("input");
    this.input.placeholder = "Ask about a patient, e.g. \"Plot patient p7's spo2 today\"";
    const send = document.createElement("button");
    send.textContent = "Ask";
    this.form.append(this.input, send);
    root.append(this.log, this.form);

    this.form.onsubmit = (e) => {
      e.preventDefault();
      void this.submit();
    };
  }

  async submit(): Promise<void> {
    const question = this.input.value.trim();
    if (!question) return;
    this.input.value = "";
    this.input.disabled = true; // one request in flight per tab
    try {
      const response = await this.api.chat(question);
      this.log.appendChild(renderTurn(question, response));
    } catch (err) {
      const failed = document.createElement("div");
      failed.className = "chat-error";
      failed.textContent = String(err);
      this.log.appendChild(failed);
    } finally {
      this.input.disabled = false;
      this.log.scrollTop = this.log.scrollHeight;
    }
  }
}
