// Typed client for the triage HTTP API. Every value the UI shows comes
// verbatim from these responses; nothing is recomputed client-side.

export type Category = 'word_changing' | 'inability' | 'missing_parts' | 'irrelevant';

export const CATEGORIES: Category[] = [
  'word_changing',
  'inability',
  'missing_parts',
  'irrelevant',
];

export const CATEGORY_TITLES: Record<Category, string> = {
  word_changing: 'Word changing',
  inability: 'Inability',
  missing_parts: 'Missing parts',
  irrelevant: 'Irrelevant',
};

export interface BleuBreakdown {
  value: number;
  precisions: number[];
  brevity_penalty: number;
  candidate_len: number;
  reference_len: number;
}

export interface DeletedUnit {
  unit: 'char' | 'word';
  position: number;
  surface: string;
  span_start: number;
  span_end: number;
}

export interface LabelRecord {
  candidate_id: string;
  category: Category;
  annotator: string;
  note: string | null;
  timestamp: string;
  revision: number;
}

export interface CandidateView {
  candidate_id: string;
  pair_id: string;
  source: string | null;
  reference: string | null;
  perturbed_source: string;
  translation: string;
  deleted: DeletedUnit;
  bleu: BleuBreakdown;
  baseline: { translation: string | null; bleu: BleuBreakdown | null };
  delta: number;
  triage_status: 'unlabeled' | 'labeled';
  label: LabelRecord | null;
}

export interface CandidatePage {
  candidates: CandidateView[];
  total: number;
  offset: number;
  limit: number;
}

export interface Stats {
  categories: Record<Category, number>;
  severe_total: number;
  severe_rate: number;
  severe_rate_display: string;
  labeled: number;
  unlabeled: number;
  candidates: number;
  enumerations: number;
}

export interface LabelResponse {
  annotation: LabelRecord;
  candidate: CandidateView;
}

export interface QueueFilter {
  status?: 'unlabeled' | 'labeled';
  category?: Category;
}

export class ApiError extends Error {
  constructor(
    public status: number,
    message: string,
    public allowed?: string[],
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private baseUrl = '',
    private fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await response.json();
    } catch {
      body = null;
    }
    if (!response.ok) {
      const payload = body as { error?: string; allowed?: string[] } | null;
      throw new ApiError(
        response.status,
        payload?.error ?? `request failed with status ${response.status}`,
        payload?.allowed,
      );
    }
    return body as T;
  }

  runHeader(): Promise<Record<string, unknown>> {
    return this.request('/api/run');
  }

  candidates(filter: QueueFilter = {}, offset = 0, limit = 50): Promise<CandidatePage> {
    const params = new URLSearchParams();
    if (filter.status) params.set('status', filter.status);
    if (filter.category) params.set('category', filter.category);
    params.set('offset', String(offset));
    params.set('limit', String(limit));
    return this.request(`/api/candidates?${params.toString()}`);
  }

  candidate(id: string): Promise<CandidateView> {
    return this.request(`/api/candidates/${id}`);
  }

  label(id: string, category: Category, annotator: string, note?: string): Promise<LabelResponse> {
    return this.request(`/api/candidates/${id}/label`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ category, annotator, note: note ?? null }),
    });
  }

  stats(): Promise<Stats> {
    return this.request('/api/stats');
  }
}
