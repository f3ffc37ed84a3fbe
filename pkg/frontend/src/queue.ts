// Review-queue controller: candidate ordering comes from the server
// (worst BLEU first); this class only tracks position, submits labels, and
// keeps unsaved labels in an offline queue until they are safely stored.

import {
  ApiClient,
  ApiError,
  CandidateView,
  Category,
  QueueFilter,
  Stats,
} from './api.js';

export const KEY_TO_CATEGORY: Record<string, Category> = {
  '1': 'word_changing',
  '2': 'inability',
  '3': 'missing_parts',
  '4': 'irrelevant',
};

export interface PendingLabel {
  candidateId: string;
  category: Category;
  note?: string;
  // Revision the candidate had when the label was queued; if the server
  // moved past it the label already landed (or was superseded) and must
  // not be posted again.
  baseRevision: number | null;
}

const PAGE_SIZE = 100;

export class ReviewQueue {
  candidates: CandidateView[] = [];
  index = 0;
  stats: Stats | null = null;
  filter: QueueFilter = { status: 'unlabeled' };
  pending: PendingLabel[] = [];
  connectionLost = false;
  annotator = 'annotator';

  constructor(
    private api: ApiClient,
    private onChange: () => void = () => {},
  ) {}

  private changed(): void {
    this.onChange();
  }

  async load(filter?: QueueFilter): Promise<void> {
    if (filter) this.filter = filter;
    const all: CandidateView[] = [];
    let offset = 0;
    for (;;) {
      const page = await this.api.candidates(this.filter, offset, PAGE_SIZE);
      all.push(...page.candidates);
      offset += page.candidates.length;
      if (offset >= page.total || page.candidates.length === 0) break;
    }
    this.candidates = all;
    this.index = 0;
    this.connectionLost = false;
    this.changed();
  }

  async refreshStats(): Promise<void> {
    this.stats = await this.api.stats();
    this.changed();
  }

  get isEmpty(): boolean {
    return this.candidates.length === 0;
  }

  current(): CandidateView | null {
    return this.candidates[this.index] ?? null;
  }

  next(): void {
    if (this.index < this.candidates.length - 1) {
      this.index += 1;
      this.changed();
    }
  }

  prev(): void {
    if (this.index > 0) {
      this.index -= 1;
      this.changed();
    }
  }

  private advanceToNextUnlabeled(): void {
    for (let step = 1; step <= this.candidates.length; step += 1) {
      const i = (this.index + step) % this.candidates.length;
      if (this.candidates[i].triage_status === 'unlabeled') {
        this.index = i;
        return;
      }
    }
  }

  /** Label the candidate under the cursor and advance to the next unlabeled
   * one. Network failures queue the label locally instead of dropping it. */
  async submitCurrent(category: Category, note?: string): Promise<void> {
    const candidate = this.current();
    if (!candidate) return;
    try {
      const result = await this.api.label(
        candidate.candidate_id,
        category,
        this.annotator,
        note,
      );
      this.candidates[this.index] = result.candidate;
      this.connectionLost = false;
      this.advanceToNextUnlabeled();
      this.changed();
      await this.refreshStats().catch(() => {});
    } catch (err) {
      if (err instanceof ApiError) throw err; // 4xx/409: surface to the caller
      this.pending.push({
        candidateId: candidate.candidate_id,
        category,
        note,
        baseRevision: candidate.label?.revision ?? null,
      });
      this.connectionLost = true;
      this.changed();
    }
  }

  /** Keyboard entry point; returns true when the key mapped to a label. */
  async handleKey(key: string): Promise<boolean> {
    const category = KEY_TO_CATEGORY[key];
    if (category && this.current()) {
      await this.submitCurrent(category);
      return true;
    }
    if (key === 'n' || key === 'ArrowRight') {
      this.next();
      return false;
    }
    if (key === 'p' || key === 'ArrowLeft') {
      this.prev();
      return false;
    }
    return false;
  }

  /** Flush queued offline labels, at most once each: a label whose
   * candidate moved past its queued base revision is discarded. */
  async flushPending(): Promise<void> {
    const queued = this.pending;
    this.pending = [];
    for (const item of queued) {
      try {
        const fresh = await this.api.candidate(item.candidateId);
        const revision = fresh.label?.revision ?? null;
        if (revision !== item.baseRevision) continue; // already applied
        await this.api.label(item.candidateId, item.category, this.annotator, item.note);
      } catch (err) {
        if (!(err instanceof ApiError)) {
          this.pending.push(item); // still offline, keep it
        }
      }
    }
    if (this.pending.length === 0) this.connectionLost = false;
    this.changed();
    if (this.pending.length === 0) {
      await this.refreshStats().catch(() => {});
    }
  }
}
