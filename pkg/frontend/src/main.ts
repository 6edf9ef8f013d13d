// Browser entry point: wires the rating and comparison sessions to the
// DOM. All state lives on the server; reloading resumes where the
// server says.

import { ApiClient, Level } from './api.js';
import { LEVELS, RatingEvent, RatingSession } from './rating.js';
import { ComparisonEvent, ComparisonSession } from './comparison.js';

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function raterId(): string {
  const params = new URLSearchParams(window.location.search);
  return params.get('rater') ?? 'r1';
}

function renderRating(ev: RatingEvent, session: RatingSession, api: ApiClient): void {
  const screen = el<HTMLDivElement>('rating-screen');
  const banner = el<HTMLDivElement>('banner');
  if (ev.kind === 'error') {
    banner.textContent = ev.message;
    banner.hidden = false;
    return;
  }
  banner.hidden = true;
  if (ev.kind === 'done') {
    screen.innerHTML = '<p>All images rated. Thank you.</p>';
    void api.progress().then((p) => {
      const mine = p.raters[raterId()];
      if (mine) {
        screen.innerHTML += `<p>${mine.rated_images} of ${p.images} images rated.</p>`;
      }
    });
    return;
  }

  const state = ev.state;
  screen.innerHTML = '';
  const original = document.createElement('img');
  original.src = state.task.original_url;
  original.className = 'original';
  screen.appendChild(original);

  const grid = document.createElement('div');
  grid.className = 'variants';
  for (const variant of state.task.variants) {
    const card = document.createElement('div');
    const img = document.createElement('img');
    img.src = variant.url;
    card.appendChild(img);
    for (const level of LEVELS) {
      const label = document.createElement('label');
      const radio = document.createElement('input');
      radio.type = 'radio';
      radio.name = `level-${variant.key}`;
      radio.value = level;
      radio.addEventListener('change', () => {
        state.setLevel(variant.key, level as Level);
        el<HTMLButtonElement>('submit-rating').disabled = !state.submitEnabled;
      });
      label.appendChild(radio);
      label.appendChild(document.createTextNode(level));
      card.appendChild(label);
    }
    grid.appendChild(card);
  }
  screen.appendChild(grid);

  const submit = document.createElement('button');
  submit.id = 'submit-rating';
  submit.textContent = 'Submit ratings';
  submit.disabled = true;
  submit.addEventListener('click', () => void session.submit());
  screen.appendChild(submit);
}

function renderComparison(ev: ComparisonEvent): void {
  const screen = el<HTMLDivElement>('comparison-screen');
  if (ev.kind === 'error') {
    el<HTMLDivElement>('banner').textContent = ev.message;
    el<HTMLDivElement>('banner').hidden = false;
    return;
  }
  screen.innerHTML = `
    <img class="original" src="${ev.trial.original_url}">
    <div class="pair">
      <img id="cand-left" src="${ev.trial.left_url}">
      <img id="cand-right" src="${ev.trial.right_url}">
    </div>
    <p>Press 1 (left), 2 (right) or 3 (comparable), or click a button.</p>
  `;
  for (const choice of ['left', 'right', 'comparable'] as const) {
    const button = document.createElement('button');
    button.textContent = choice;
    button.dataset.choice = choice;
    screen.appendChild(button);
  }
}

export function boot(): void {
  const api = new ApiClient();
  const rater = raterId();

  const ratingSession: RatingSession = new RatingSession(api, rater, (ev) =>
    renderRating(ev, ratingSession, api)
  );
  const comparisonSession = new ComparisonSession(api, rater, renderComparison);

  el<HTMLButtonElement>('tab-rating').addEventListener('click', () => {
    el<HTMLDivElement>('rating-screen').hidden = false;
    el<HTMLDivElement>('comparison-screen').hidden = true;
    void ratingSession.start();
  });
  el<HTMLButtonElement>('tab-comparison').addEventListener('click', () => {
    el<HTMLDivElement>('rating-screen').hidden = true;
    el<HTMLDivElement>('comparison-screen').hidden = false;
    void comparisonSession.start();
  });

  document.addEventListener('keydown', (e) => {
    if (el<HTMLDivElement>('comparison-screen').hidden) return;
    const target = e.target as HTMLElement | null;
    if (target && ['INPUT', 'SELECT', 'TEXTAREA'].includes(target.tagName)) return;
    comparisonSession.handleKey(e.key);
  });
  el<HTMLDivElement>('comparison-screen').addEventListener('click', (e) => {
    const choice = (e.target as HTMLElement).dataset?.choice;
    if (choice === 'left' || choice === 'right' || choice === 'comparable') {
      void comparisonSession.vote(choice);
    }
  });

  void ratingSession.start();
}

if (typeof document !== 'undefined' && document.getElementById('rating-screen')) {
  boot();
}
