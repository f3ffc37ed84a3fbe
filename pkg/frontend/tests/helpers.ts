// In-memory fake of the triage API for unit tests: same wire shapes, same
// ordering rule (worst BLEU first), plus switches to simulate outages.

import { CandidateView, Category, LabelRecord, Stats } from '../src/api.js';

export function makeCandidate(
  id: string,
  bleu: number,
  pairId = 'pair',
  source = 'alpha bravo charlie',
  spanStart = 0,
  spanEnd = 1,
): CandidateView {
  const breakdown = {
    value: bleu,
    precisions: [bleu, 1, 1, 1],
    brevity_penalty: 1,
    candidate_len: 3,
    reference_len: 3,
  };
  return {
    candidate_id: id,
    pair_id: pairId,
    source,
    reference: 'T_ALPHA T_BRAVO T_CHARLIE',
    perturbed_source: source.slice(1),
    translation: 'something broken',
    deleted: {
      unit: 'char',
      position: spanStart,
      surface: Array.from(source).slice(spanStart, spanEnd).join(''),
      span_start: spanStart,
      span_end: spanEnd,
    },
    bleu: breakdown,
    baseline: { translation: 'T_ALPHA T_BRAVO T_CHARLIE', bleu: { ...breakdown, value: 1 } },
    delta: 1 - bleu,
    triage_status: 'unlabeled',
    label: null,
  };
}

export class FakeService {
  candidates = new Map<string, CandidateView>();
  enumerations = 14722;
  postCount = 0;
  getCount = 0;
  offline = false;
  failNextPosts = 0;

  constructor(views: CandidateView[] = []) {
    views.forEach((v) => this.candidates.set(v.candidate_id, v));
  }

  private sorted(): CandidateView[] {
    return [...this.candidates.values()].sort(
      (a, b) => a.bleu.value - b.bleu.value || a.candidate_id.localeCompare(b.candidate_id),
    );
  }

  stats(): Stats {
    const categories: Record<Category, number> = {
      word_changing: 0,
      inability: 0,
      missing_parts: 0,
      irrelevant: 0,
    };
    let labeled = 0;
    for (const view of this.candidates.values()) {
      if (view.label) {
        categories[view.label.category] += 1;
        labeled += 1;
      }
    }
    const severe = categories.inability + categories.missing_parts + categories.irrelevant;
    const rate = this.enumerations ? severe / this.enumerations : 0;
    return {
      categories,
      severe_total: severe,
      severe_rate: rate,
      severe_rate_display: `${(rate * 100).toFixed(2)}%`,
      labeled,
      unlabeled: this.candidates.size - labeled,
      candidates: this.candidates.size,
      enumerations: this.enumerations,
    };
  }

  fetch = async (input: string, init?: RequestInit): Promise<Response> => {
    if (this.offline) throw new TypeError('fetch failed');
    const url = new URL(input, 'http://fake');
    const method = init?.method ?? 'GET';
    if (method === 'POST') {
      this.postCount += 1;
      if (this.failNextPosts > 0) {
        this.failNextPosts -= 1;
        throw new TypeError('fetch failed');
      }
      const id = url.pathname.split('/')[3];
      const view = this.candidates.get(id);
      if (!view) return json({ error: 'unknown candidate' }, 404);
      const body = JSON.parse(String(init?.body ?? '{}'));
      const allowed = ['word_changing', 'inability', 'missing_parts', 'irrelevant'];
      if (!allowed.includes(body.category)) {
        return json({ error: `unknown category '${body.category}'`, allowed }, 422);
      }
      const label: LabelRecord = {
        candidate_id: id,
        category: body.category,
        annotator: body.annotator ?? '',
        note: body.note ?? null,
        timestamp: 'now',
        revision: (view.label?.revision ?? 0) + 1,
      };
      const updated: CandidateView = { ...view, label, triage_status: 'labeled' };
      this.candidates.set(id, updated);
      return json({ annotation: label, candidate: updated });
    }
    this.getCount += 1;
    if (url.pathname === '/api/stats') return json(this.stats());
    if (url.pathname === '/api/candidates') {
      let views = this.sorted();
      const status = url.searchParams.get('status');
      const category = url.searchParams.get('category');
      if (status) views = views.filter((v) => v.triage_status === status);
      if (category) views = views.filter((v) => v.label?.category === category);
      const offset = Number(url.searchParams.get('offset') ?? 0);
      const limit = Number(url.searchParams.get('limit') ?? 50);
      return json({
        candidates: views.slice(offset, offset + limit),
        total: views.length,
        offset,
        limit,
      });
    }
    const parts = url.pathname.split('/').filter(Boolean);
    if (parts[0] === 'api' && parts[1] === 'candidates' && parts.length === 3) {
      const view = this.candidates.get(parts[2]);
      return view ? json(view) : json({ error: 'unknown candidate' }, 404);
    }
    return json({ error: 'not found' }, 404);
  };
}

function json(payload: unknown, status = 200): Response {
  return new Response(JSON.stringify(payload), {
    status,
    headers: { 'Content-Type': 'application/json' },
  });
}
