import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api.js';
import { KEY_TO_CATEGORY, ReviewQueue } from '../src/queue.js';
import { FakeService, makeCandidate } from './helpers.js';

function setup(count = 5) {
  const service = new FakeService(
    Array.from({ length: count }, (_, i) => makeCandidate(`c${String(i).padStart(2, '0')}`, i / 100)),
  );
  const queue = new ReviewQueue(new ApiClient('http://fake', service.fetch));
  return { service, queue };
}

describe('queue loading', () => {
  it('matches the unlabeled total and is sorted worst-first', async () => {
    const { queue } = setup(7);
    await queue.load();
    expect(queue.candidates).toHaveLength(7);
    const values = queue.candidates.map((c) => c.bleu.value);
    expect(values).toEqual([...values].sort((a, b) => a - b));
  });

  it('pages through large queues', async () => {
    const { service, queue } = setup(230);
    await queue.load();
    expect(queue.candidates).toHaveLength(230);
    expect(service.getCount).toBeGreaterThan(2); // several pages fetched
  });

  it('shows the empty state on a fresh run with no candidates', async () => {
    const { queue } = setup(0);
    await queue.load();
    expect(queue.isEmpty).toBe(true);
    expect(queue.current()).toBeNull();
  });

  it('category filter returns only matching candidates', async () => {
    const { service, queue } = setup(4);
    await queue.load();
    await queue.submitCurrent('inability');
    await queue.load({ status: 'labeled', category: 'inability' });
    expect(queue.candidates).toHaveLength(1);
    expect(queue.candidates[0].label?.category).toBe('inability');
    expect(service.stats().categories.inability).toBe(1);
  });
});

describe('labeling', () => {
  it('advances to the next unlabeled candidate and refreshes stats', async () => {
    const { queue } = setup(3);
    await queue.load();
    const first = queue.current()!.candidate_id;
    await queue.submitCurrent('missing_parts');
    expect(queue.current()!.candidate_id).not.toBe(first);
    expect(queue.stats?.categories.missing_parts).toBe(1);
    expect(queue.stats?.unlabeled).toBe(2);
  });

  it('keyboard-only pass over N candidates issues exactly N label posts', async () => {
    const { service, queue } = setup(9);
    await queue.load();
    const keys = Object.keys(KEY_TO_CATEGORY);
    for (let i = 0; i < 9; i += 1) {
      const labeled = await queue.handleKey(keys[i % keys.length]);
      expect(labeled).toBe(true);
    }
    expect(service.postCount).toBe(9);
    expect(service.stats().unlabeled).toBe(0);
  });

  it('navigation keys never post', async () => {
    const { service, queue } = setup(3);
    await queue.load();
    await queue.handleKey('n');
    await queue.handleKey('p');
    await queue.handleKey('ArrowRight');
    await queue.handleKey('x');
    expect(service.postCount).toBe(0);
  });

  it('relabeling bumps the revision', async () => {
    const { queue } = setup(2);
    await queue.load();
    await queue.submitCurrent('inability');
    queue.prev();
    expect(queue.current()!.label?.revision).toBe(1);
    await queue.submitCurrent('irrelevant');
    const relabeled = queue.candidates.find((c) => c.label?.category === 'irrelevant');
    expect(relabeled?.label?.revision).toBe(2);
  });

  it('surfaces the allowed categories on a 422', async () => {
    const { service, queue } = setup(1);
    await queue.load();
    const api = new ApiClient('http://fake', service.fetch);
    await expect(
      api.label(queue.current()!.candidate_id, 'hallucination' as never, 'a'),
    ).rejects.toMatchObject({
      status: 422,
      allowed: ['word_changing', 'inability', 'missing_parts', 'irrelevant'],
    });
  });
});

describe('offline queueing', () => {
  it('queues the label instead of dropping it and flushes once', async () => {
    const { service, queue } = setup(2);
    await queue.load();
    service.failNextPosts = 1;
    await queue.submitCurrent('inability');
    expect(queue.connectionLost).toBe(true);
    expect(queue.pending).toHaveLength(1);
    expect(service.stats().labeled).toBe(0);

    await queue.flushPending();
    expect(queue.pending).toHaveLength(0);
    expect(queue.connectionLost).toBe(false);
    expect(service.stats().categories.inability).toBe(1);
    expect(service.postCount).toBe(2); // one failed, one flushed
  });

  it('never duplicates a label whose post actually landed', async () => {
    const { service, queue } = setup(1);
    await queue.load();
    const id = queue.current()!.candidate_id;
    service.failNextPosts = 1;
    await queue.submitCurrent('missing_parts');
    expect(queue.pending).toHaveLength(1);

    // The label reached the server after all (response was lost): the
    // candidate's revision moved, so the flush must skip the queued copy.
    const api = new ApiClient('http://fake', service.fetch);
    await api.label(id, 'missing_parts', 'other-session');
    const postsBefore = service.postCount;
    await queue.flushPending();
    expect(service.postCount).toBe(postsBefore); // revision check: no POST
    expect(queue.pending).toHaveLength(0);
    const view = await api.candidate(id);
    expect(view.label?.revision).toBe(1);
  });

  it('keeps labels queued while still offline', async () => {
    const { service, queue } = setup(1);
    await queue.load();
    service.offline = true;
    await queue.submitCurrent('irrelevant');
    expect(queue.pending).toHaveLength(1);
    await queue.flushPending(); // still offline: GET fails, stays queued
    expect(queue.pending).toHaveLength(1);
    service.offline = false;
    await queue.flushPending();
    expect(queue.pending).toHaveLength(0);
    expect(service.stats().categories.irrelevant).toBe(1);
  });
});
