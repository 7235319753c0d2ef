import { DetailView, OverviewRow, SortKey, SortOrder } from './types.js';

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

async function handle<T>(response: Response): Promise<T> {
  if (!response.ok) {
    let detail = `${response.status}`;
    try {
      const body = await response.json();
      if (body && body.detail) detail = `${response.status}: ${JSON.stringify(body.detail)}`;
    } catch {
      // non-JSON error body; status alone is enough
    }
    throw new Error(`triage service error ${detail}`);
  }
  return (await response.json()) as T;
}

export class TriageApi {
  constructor(
    private readonly base: string = '',
    private readonly fetchImpl: FetchLike = (url, init) => fetch(url, init),
  ) {}

  listPmrs(sort: SortKey = 'er', order: SortOrder = 'desc'): Promise<OverviewRow[]> {
    const params = new URLSearchParams({ sort, order });
    return this.fetchImpl(`${this.base}/api/pmrs?${params}`).then((r) => handle<OverviewRow[]>(r));
  }

  detail(pmrId: string): Promise<DetailView> {
    return this.fetchImpl(`${this.base}/api/pmrs/${encodeURIComponent(pmrId)}`).then((r) =>
      handle<DetailView>(r),
    );
  }

  putMer(pmrId: string, mer: number): Promise<{ pmr_id: string; mer: number }> {
    return this.fetchImpl(`${this.base}/api/pmrs/${encodeURIComponent(pmrId)}/mer`, {
      method: 'PUT',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ mer }),
    }).then((r) => handle<{ pmr_id: string; mer: number }>(r));
  }

  recompute(now?: string): Promise<{ updated: number; now: string }> {
    return this.fetchImpl(`${this.base}/api/recompute`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(now ? { now } : {}),
    }).then((r) => handle<{ updated: number; now: string }>(r));
  }
}
