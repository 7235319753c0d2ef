// Mirrors of the triage service payloads. The dashboard never recomputes
// ER/CER client-side; what the API sends is what gets rendered.

export type SortKey = 'er' | 'mer' | 'cer';
export type SortOrder = 'asc' | 'desc';

export interface OverviewRow {
  pmr_id: string;
  customer_id: string;
  days_open: number;
  er: number;            // 0..100
  mer: number | null;    // 0..100, analyst-entered
  cer: number;           // -100..100
  last_update: string | null;
}

export interface ContactEvent {
  ts: string;
  kind: string;
  analyst_id: string | null;
  severity: number;
  level: string;
}

export interface DetailView {
  pmr_id: string;
  customer_id: string;
  er: number;
  mer: number | null;
  cer: number;
  days_open: number;
  features: Record<string, number>;
  correspondence: ContactEvent[];
  er_history: [string, number][];
  snapshot_series: [number, number][]; // [entry seq, ER 0..100]
}
