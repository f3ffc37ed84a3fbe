// HTML fragment builders. All numeric fields are printed verbatim from API
// responses; the deleted unit is highlighted from the offsets the API
// provides, never by diffing text client-side.

import { BleuBreakdown, CandidateView, CATEGORIES, CATEGORY_TITLES, Stats } from './api.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;');
}

export function highlightSpan(text: string, start: number, end: number): string {
  // Offsets are Unicode scalar positions; JS strings index UTF-16 code
  // units, so convert through code point arrays before slicing.
  const scalars = Array.from(text);
  const before = scalars.slice(0, start).join('');
  const inside = scalars.slice(start, end).join('');
  const after = scalars.slice(end).join('');
  return `${escapeHtml(before)}<mark>${escapeHtml(inside)}</mark>${escapeHtml(after)}`;
}

function bleuCell(bleu: BleuBreakdown | null): string {
  if (!bleu) return '<span class="muted">n/a</span>';
  const precisions = bleu.precisions.map((p) => p.toFixed(3)).join(' / ');
  return (
    `<b>${bleu.value}</b>` +
    `<span class="muted"> (p: ${precisions}, bp: ${bleu.brevity_penalty.toFixed(3)}, ` +
    `len ${bleu.candidate_len}/${bleu.reference_len})</span>`
  );
}

export function renderCandidate(view: CandidateView, position: number, total: number): string {
  const deleted = view.deleted;
  const sourceHtml = view.source
    ? highlightSpan(view.source, deleted.span_start, deleted.span_end)
    : '<span class="muted">source unavailable</span>';
  const label = view.label
    ? `<span class="badge labeled">${escapeHtml(CATEGORY_TITLES[view.label.category])}` +
      ` · rev ${view.label.revision}</span>`
    : '<span class="badge">unlabeled</span>';
  return `
    <div class="meta">candidate ${position} of ${total} — <code>${escapeHtml(
      view.candidate_id,
    )}</code> (pair ${escapeHtml(view.pair_id)}, ${deleted.unit} #${deleted.position}) ${label}</div>
    <dl>
      <dt>Source</dt><dd class="text">${sourceHtml}</dd>
      <dt>Perturbed source</dt><dd class="text">${escapeHtml(view.perturbed_source)}</dd>
      <dt>Reference</dt><dd class="text">${escapeHtml(view.reference ?? '')}</dd>
      <dt>Translation</dt><dd class="text">${escapeHtml(view.translation)}</dd>
      <dt>Baseline translation</dt><dd class="text muted">${escapeHtml(
        view.baseline.translation ?? '',
      )}</dd>
      <dt>BLEU</dt><dd>${bleuCell(view.bleu)}</dd>
      <dt>Baseline BLEU</dt><dd>${bleuCell(view.baseline.bleu)}</dd>
      <dt>Δ</dt><dd>${view.delta}</dd>
    </dl>`;
}

export function renderStats(stats: Stats | null): string {
  if (!stats) return '<span class="muted">stats unavailable</span>';
  const cells = CATEGORIES.map(
    (category) =>
      `<span class="stat"><label>${CATEGORY_TITLES[category]}</label>` +
      `<b>${stats.categories[category]}</b></span>`,
  ).join('');
  return (
    cells +
    `<span class="stat"><label>Severe</label><b>${stats.severe_total}` +
    ` (${escapeHtml(stats.severe_rate_display)})</b></span>` +
    `<span class="stat"><label>Unlabeled</label><b>${stats.unlabeled}</b></span>` +
    `<span class="stat"><label>Enumerations</label><b>${stats.enumerations}</b></span>`
  );
}

export function renderEmptyState(filterDescription: string): string {
  return `<div class="empty">No candidates${filterDescription}.</div>`;
}

export function renderBanner(connectionLost: boolean, pendingCount: number): string {
  if (!connectionLost) return '';
  const queued = pendingCount
    ? ` ${pendingCount} label${pendingCount === 1 ? '' : 's'} queued locally.`
    : '';
  return (
    `<div class="banner">Connection lost.${queued} ` +
    '<button id="retry">Retry</button></div>'
  );
}
