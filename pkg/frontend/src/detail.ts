import { sparkline } from './sparkline.js';
import { DetailView } from './types.js';

function esc(text: string): string {
  return text.replace(/&/g, '&amp;').replace(/</g, '&lt;').replace(/>/g, '&gt;');
}

export function renderDetail(view: DetailView): string {
  const series = view.snapshot_series.map(([, er]) => er);
  const cer = view.cer > 0 ? `+${view.cer}` : String(view.cer);
  const mer = view.mer === null ? '&mdash;' : String(view.mer);

  const correspondence = view.correspondence.length
    ? view.correspondence
        .map(
          (c) =>
            `<li><span class="ts">${esc(c.ts)}</span> ` +
            `<span class="kind ${c.kind === 'CONTACT_IN' ? 'in' : 'out'}">${esc(c.kind)}</span>` +
            `${c.analyst_id ? ' by ' + esc(c.analyst_id) : ''} ` +
            `<span class="meta">sev ${c.severity} ${esc(c.level)}</span></li>`,
        )
        .join('')
    : '<li class="empty">no correspondence yet</li>';

  const features = Object.entries(view.features)
    .map(
      ([name, value]) =>
        `<tr><td>${esc(name)}</td><td class="num">${Number.isInteger(value) ? value : value.toFixed(2)}</td></tr>`,
    )
    .join('');

  return `
<section class="detail" data-pmr="${esc(view.pmr_id)}">
  <p><a href="#/">&larr; back to overview</a></p>
  <h2>${esc(view.pmr_id)} <span class="customer">${esc(view.customer_id)}</span></h2>
  <div class="headline">
    <div class="stat"><span class="label">ER</span><span class="value">${view.er}</span></div>
    <div class="stat"><span class="label">MER</span><span class="value" id="mer-value">${mer}</span></div>
    <div class="stat"><span class="label">CER</span><span class="value">${cer}</span></div>
    <div class="stat"><span class="label">days open</span><span class="value">${view.days_open}</span></div>
  </div>
  <h3>escalation risk by snapshot (${series.length} snapshots)</h3>
  ${sparkline(series)}
  <form id="mer-form" class="mer-form">
    <label for="mer-input">manual escalation risk (0&ndash;100)</label>
    <input id="mer-input" name="mer" inputmode="numeric" placeholder="0-100" />
    <button type="submit">save</button>
    <span id="mer-error" class="error" role="alert"></span>
  </form>
  <h3>correspondence</h3>
  <ul class="correspondence">${correspondence}</ul>
  <h3>model features (${Object.keys(view.features).length})</h3>
  <table class="features"><tbody>${features}</tbody></table>
</section>`;
}
