// Wire types mirroring the cloud API's canonical JSON.

export interface Series {
  sign: string;
  points: [number, number][];
}

export interface PlotSpec {
  title: string;
  x_label: string;
  y_label: string;
  series: Series[];
}

export interface SnapshotJson {
  t: number;
  patient_id: string;
  mime: string;
  media_b64: string;
}

export interface IntentJson {
  patient_id: string;
  list_date: string[];
  list_time: [string, string][];
  vital_sign: string[];
  is_plot: boolean;
  is_recognition: boolean;
  is_image: boolean;
}

export interface AssistantResponse {
  answer_text: string;
  intent: IntentJson;
  timings_ms: Record<string, number>;
  plot: PlotSpec | null;
  image: SnapshotJson | null;
  recognition: { activity: string; emotion: string } | null;
  data_source: string;
}

export interface AlertMsg {
  alert_id: string;
  patient_id: string;
  kind: "fall" | "vital_out_of_range";
  detail: Record<string, unknown>;
  t_detected: number;
  t_received: number | null;
  t_delivered: number | null;
}

export interface PatientJson {
  patient_id: string;
  name: string;
  date_of_birth: string;
  notes: string;
}
