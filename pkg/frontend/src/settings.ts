// UI-only knobs, kept in memory: nothing the dashboard stores locally,
// MER lives server-side. Adjustable from the settings strip on the page.

export interface Settings {
  cerFlagAbs: number;   // flag rows whose |CER| reaches this
  merFlagMin: number;   // flag rows whose MER reaches this
  pollSeconds: number;  // overview refresh interval
}

export const defaultSettings: Settings = {
  cerFlagAbs: 20,
  merFlagMin: 70,
  pollSeconds: 30,
};

export function sanitizeSettings(raw: Partial<Settings>): Settings {
  const clamp = (v: unknown, lo: number, hi: number, fallback: number) => {
    const n = typeof v === 'number' && Number.isFinite(v) ? Math.round(v) : fallback;
    return Math.min(hi, Math.max(lo, n));
  };
  return {
    cerFlagAbs: clamp(raw.cerFlagAbs, 0, 100, defaultSettings.cerFlagAbs),
    merFlagMin: clamp(raw.merFlagMin, 0, 100, defaultSettings.merFlagMin),
    pollSeconds: clamp(raw.pollSeconds, 5, 3600, defaultSettings.pollSeconds),
  };
}
