// Entry point: binds the queue controller to the DOM. Served by the triage
// service itself, so the API lives on the same origin.

import { ApiClient, CATEGORIES, CATEGORY_TITLES, ApiError, Category } from './api.js';
import { ReviewQueue, KEY_TO_CATEGORY } from './queue.js';
import { renderBanner, renderCandidate, renderEmptyState, renderStats } from './render.js';

const api = new ApiClient('');
const queue = new ReviewQueue(api, render);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

function filterDescription(): string {
  const parts = [];
  if (queue.filter.status) parts.push(queue.filter.status);
  if (queue.filter.category) parts.push(queue.filter.category);
  return parts.length ? ` (${parts.join(', ')})` : '';
}

function render(): void {
  el('stats').innerHTML = renderStats(queue.stats);
  el('banner-area').innerHTML = renderBanner(queue.connectionLost, queue.pending.length);
  const retry = document.getElementById('retry');
  if (retry) retry.onclick = () => void queue.flushPending();
  const current = queue.current();
  el('candidate').innerHTML = current
    ? renderCandidate(current, queue.index + 1, queue.candidates.length)
    : renderEmptyState(filterDescription());
  el('note-error').textContent = '';
}

async function submit(category: Category): Promise<void> {
  const note = el<HTMLInputElement>('note').value.trim() || undefined;
  try {
    await queue.submitCurrent(category, note);
    el<HTMLInputElement>('note').value = '';
  } catch (err) {
    if (err instanceof ApiError) {
      const hint = err.allowed ? ` (allowed: ${err.allowed.join(', ')})` : '';
      el('note-error').textContent =
        err.status === 409 ? `${err.message} — retry` : err.message + hint;
    } else {
      throw err;
    }
  }
}

function buildControls(): void {
  const controls = el('categories');
  CATEGORIES.forEach((category, i) => {
    const button = document.createElement('button');
    button.textContent = `${i + 1} · ${CATEGORY_TITLES[category]}`;
    button.onclick = () => void submit(category);
    controls.appendChild(button);
  });
  el('prev').onclick = () => queue.prev();
  el('next').onclick = () => queue.next();
  el<HTMLSelectElement>('status-filter').onchange = (event) => {
    const value = (event.target as HTMLSelectElement).value;
    void queue.load({
      status: value === 'all' ? undefined : (value as 'labeled' | 'unlabeled'),
    });
  };
  el<HTMLInputElement>('annotator').onchange = (event) => {
    queue.annotator = (event.target as HTMLInputElement).value || 'annotator';
  };
  document.addEventListener('keydown', (event) => {
    const target = event.target as HTMLElement;
    if (target.tagName === 'INPUT' || target.tagName === 'SELECT') return;
    if (event.key in KEY_TO_CATEGORY) {
      event.preventDefault();
      void submit(KEY_TO_CATEGORY[event.key]);
    } else if (event.key === 'n' || event.key === 'ArrowRight') {
      queue.next();
    } else if (event.key === 'p' || event.key === 'ArrowLeft') {
      queue.prev();
    }
  });
  window.addEventListener('online', () => void queue.flushPending());
}

async function start(): Promise<void> {
  buildControls();
  try {
    await queue.load();
    await queue.refreshStats();
  } catch {
    queue.connectionLost = true;
    render();
  }
}

void start();
