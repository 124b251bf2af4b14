import type { AssistantResponse, PatientJson } from "./types.js";

export class Api {
  constructor(private base = "") {}

  private async get<T>(path: string): Promise<T> {
    const resp = await fetch(`${this.base}${path}`);
    if (!resp.ok) throw new Error(`${path}: ${resp.status}`);
    return resp.json() as Promise<T>;
  }

  async patients(): Promise<PatientJson[]> {
    const body = await this.get<{ patients: PatientJson[] }>("/patients");
    return body.patients;
  }

  async latest(patientId: string): Promise<Record<string, unknown>> {
    return this.get(`/patients/${encodeURIComponent(patientId)}/latest`);
  }

  async chat(question: string): Promise<AssistantResponse> {
    const resp = await fetch(`${this.base}/chat`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ question }),
    });
    if (!resp.ok) {
      const detail = await resp.text();
      throw new Error(`chat failed (${resp.status}): ${detail}`);
    }
    return resp.json() as Promise<AssistantResponse>;
  }
}
