import { TriageApi } from './api.js';
import { renderDetail } from './detail.js';
import { defaultSettings, sanitizeSettings, Settings } from './settings.js';
import { renderOverviewTable, sortRows } from './table.js';
import { OverviewRow, SortKey, SortOrder } from './types.js';
import { validateMer } from './validation.js';

const api = new TriageApi();
let settings: Settings = { ...defaultSettings };
let sortKey: SortKey = 'er';
let sortOrder: SortOrder = 'desc';
let rows: OverviewRow[] = [];
let pollTimer: number | undefined;

const app = () => document.getElementById('app')!;
const banner = () => document.getElementById('banner')!;

function showError(message: string): void {
  banner().textContent = message;
  banner().classList.add('visible');
}

function clearError(): void {
  banner().classList.remove('visible');
}

async function loadOverview(): Promise<void> {
  try {
    rows = await api.listPmrs(sortKey, sortOrder);
    clearError();
  } catch (err) {
    showError(`cannot reach the triage service: ${(err as Error).message}`);
    return;
  }
  renderOverview();
}

function renderOverview(): void {
  const sorted = sortRows(rows, sortKey, sortOrder);
  app().innerHTML = `
    <div class="toolbar">
      <button id="recompute">recompute now</button>
      <label>flag |CER| &ge; <input id="cer-flag" size="3" value="${settings.cerFlagAbs}"></label>
      <label>flag MER &ge; <input id="mer-flag" size="3" value="${settings.merFlagMin}"></label>
      <label>poll <input id="poll-s" size="4" value="${settings.pollSeconds}">s</label>
    </div>
    ${renderOverviewTable(sorted, settings)}`;
  document.querySelectorAll<HTMLElement>('th[data-sort]').forEach((th) => {
    th.addEventListener('click', () => {
      const key = th.dataset.sort as SortKey;
      sortOrder = key === sortKey && sortOrder === 'desc' ? 'asc' : 'desc';
      sortKey = key;
      renderOverview();
    });
  });
  document.getElementById('recompute')?.addEventListener('click', async () => {
    try {
      await api.recompute();
      await loadOverview();
    } catch (err) {
      showError((err as Error).message);
    }
  });
  for (const [id, key] of [
    ['cer-flag', 'cerFlagAbs'],
    ['mer-flag', 'merFlagMin'],
    ['poll-s', 'pollSeconds'],
  ] as const) {
    document.getElementById(id)?.addEventListener('change', (event) => {
      const value = Number((event.target as HTMLInputElement).value);
      settings = sanitizeSettings({ ...settings, [key]: value });
      schedulePolling();
      renderOverview();
    });
  }
}

async function loadDetail(pmrId: string): Promise<void> {
  try {
    const view = await api.detail(pmrId);
    clearError();
    app().innerHTML = renderDetail(view);
  } catch (err) {
    app().innerHTML = `<p class="empty">ticket ${pmrId} not found</p><p><a href="#/">back</a></p>`;
    showError((err as Error).message);
    return;
  }
  const form = document.getElementById('mer-form') as HTMLFormElement | null;
  form?.addEventListener('submit', async (event) => {
    event.preventDefault();
    const input = document.getElementById('mer-input') as HTMLInputElement;
    const errorSpan = document.getElementById('mer-error')!;
    const result = validateMer(input.value);
    if (!result.ok) {
      errorSpan.textContent = result.message;
      return;
    }
    errorSpan.textContent = '';
    try {
      await api.putMer(pmrId, result.value);
      document.getElementById('mer-value')!.textContent = String(result.value);
    } catch (err) {
      errorSpan.textContent = (err as Error).message;
    }
  });
}

function route(): void {
  const hash = window.location.hash || '#/';
  const match = hash.match(/^#\/pmr\/(.+)$/);
  if (match) {
    stopPolling();
    void loadDetail(decodeURIComponent(match[1]));
  } else {
    schedulePolling();
    void loadOverview();
  }
}

function stopPolling(): void {
  if (pollTimer !== undefined) {
    window.clearInterval(pollTimer);
    pollTimer = undefined;
  }
}

function schedulePolling(): void {
  stopPolling();
  pollTimer = window.setInterval(() => void loadOverview(), settings.pollSeconds * 1000);
}

window.addEventListener('hashchange', route);
window.addEventListener('DOMContentLoaded', route);
