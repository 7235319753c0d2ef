import { describe, expect, it } from 'vitest';

import { TriageApi } from '../src/api.js';
import { renderDetail } from '../src/detail.js';
import { validateMer } from '../src/validation.js';
import { fakeFetch, sampleState } from './fake_service.js';

describe('TriageApi against the service contract', () => {
  it('lists pmrs in the requested order', async () => {
    const api = new TriageApi('', fakeFetch(sampleState()));
    const rows = await api.listPmrs('er', 'desc');
    expect(rows.map((r) => r.pmr_id)).toEqual(['p1', 'p3', 'p2']);
  });

  it('MER submitted through the client appears in a fresh overview GET', async () => {
    const state = sampleState();
    const api = new TriageApi('', fakeFetch(state));
    const echo = await api.putMer('p1', 75);
    expect(echo).toEqual({ pmr_id: 'p1', mer: 75 });
    const rows = await api.listPmrs();
    expect(rows.find((r) => r.pmr_id === 'p1')?.mer).toBe(75);
    const detail = await api.detail('p1');
    expect(detail.mer).toBe(75);
  });

  it('surfaces 404 and 422 as errors', async () => {
    const api = new TriageApi('', fakeFetch(sampleState()));
    await expect(api.detail('nope')).rejects.toThrow(/404/);
    await expect(api.putMer('p1', 150)).rejects.toThrow(/422/);
  });

  it('recompute reports the number of rescored tickets', async () => {
    const api = new TriageApi('', fakeFetch(sampleState()));
    const result = await api.recompute();
    expect(result.updated).toBe(3);
  });
});

describe('validateMer', () => {
  it('accepts whole numbers in range', () => {
    expect(validateMer('0')).toEqual({ ok: true, value: 0 });
    expect(validateMer(' 100 ')).toEqual({ ok: true, value: 100 });
  });

  it('blocks out-of-range and non-integer input before any request', () => {
    for (const raw of ['150', '-5', '7.5', 'high', '']) {
      expect(validateMer(raw).ok).toBe(false);
    }
  });
});

describe('renderDetail', () => {
  it('includes the sparkline, feature panel and MER form', () => {
    const state = sampleState();
    const html = renderDetail(state.details['p1']);
    expect(html).toContain('16 snapshots');
    expect((html.match(/<circle /g) ?? []).length).toBe(16);
    expect(html).toContain('mer-form');
    expect(html).toContain('num_entries');
    expect(html).toContain('CONTACT_OUT');
  });
});
