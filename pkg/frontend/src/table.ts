import { Settings } from './settings.js';
import { OverviewRow, SortKey, SortOrder } from './types.js';

// Sorting happens client-side so column clicks don't need a round trip;
// the comparator matches the service's ordering (missing MER sorts last).

export function sortRows(rows: OverviewRow[], key: SortKey, order: SortOrder): OverviewRow[] {
  const missing = -1_000_000;
  const value = (row: OverviewRow): number => {
    const v = row[key];
    return v === null ? missing : v;
  };
  return [...rows].sort((a, b) => {
    const diff = value(a) - value(b);
    const tie = a.pmr_id < b.pmr_id ? -1 : a.pmr_id > b.pmr_id ? 1 : 0;
    return order === 'desc' ? (diff !== 0 ? -diff : -tie) : diff !== 0 ? diff : tie;
  });
}

export function isFlagged(row: OverviewRow, settings: Settings): boolean {
  if (Math.abs(row.cer) >= settings.cerFlagAbs) return true;
  return row.mer !== null && row.mer >= settings.merFlagMin;
}

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function renderOverviewTable(rows: OverviewRow[], settings: Settings): string {
  if (rows.length === 0) {
    return '<p class="empty">No open tickets. Trigger a recompute or load a corpus.</p>';
  }
  const header =
    '<tr>' +
    '<th>ticket</th><th>customer</th>' +
    '<th data-sort="er">ER</th><th data-sort="mer">MER</th><th data-sort="cer">CER</th>' +
    '<th>days open</th></tr>';
  const body = rows
    .map((row) => {
      const flagged = isFlagged(row, settings) ? ' class="flagged"' : '';
      const mer = row.mer === null ? '&mdash;' : String(row.mer);
      const cer = row.cer > 0 ? `+${row.cer}` : String(row.cer);
      return (
        `<tr${flagged} data-pmr="${esc(row.pmr_id)}">` +
        `<td><a href="#/pmr/${encodeURIComponent(row.pmr_id)}">${esc(row.pmr_id)}</a></td>` +
        `<td>${esc(row.customer_id)}</td>` +
        `<td class="num">${row.er}</td><td class="num">${mer}</td><td class="num">${cer}</td>` +
        `<td class="num">${row.days_open}</td></tr>`
      );
    })
    .join('');
  return `<table class="overview"><thead>${header}</thead><tbody>${body}</tbody></table>`;
}
