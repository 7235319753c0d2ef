// Client-side MER validation; the service enforces the same range.

export function validateMer(raw: string): { ok: true; value: number } | { ok: false; message: string } {
  const trimmed = raw.trim();
  if (!trimmed) return { ok: false, message: 'Enter a value from 0 to 100' };
  if (!/^-?\d+$/.test(trimmed)) return { ok: false, message: 'MER must be a whole number' };
  const value = Number(trimmed);
  if (value < 0 || value > 100) return { ok: false, message: 'MER must be between 0 and 100' };
  return { ok: true, value };
}
