// Rating-screen logic: one level per anonymized variant, submit only
// when all four are chosen, advance to the next server-chosen task.

import { ApiClient, ApiError, Level, RatingTask } from './api.js';

export const LEVELS: Level[] = ['good', 'acceptable', 'poor'];

export class RatingScreenState {
  private readonly levels = new Map<string, Level>();

  constructor(public readonly task: RatingTask) {}

  setLevel(variantKey: string, level: Level): void {
    if (!this.task.variants.some((v) => v.key === variantKey)) {
      throw new Error(`unknown variant key: ${variantKey}`);
    }
    this.levels.set(variantKey, level);
  }

  levelOf(variantKey: string): Level | undefined {
    return this.levels.get(variantKey);
  }

  /** Submit stays disabled until every variant has a level. */
  get submitEnabled(): boolean {
    return this.task.variants.every((v) => this.levels.has(v.key));
  }

  payload(): Record<string, Level> {
    if (!this.submitEnabled) {
      throw new Error('not all variants are rated');
    }
    const out: Record<string, Level> = {};
    for (const v of this.task.variants) {
      out[v.key] = this.levels.get(v.key)!;
    }
    return out;
  }
}

export type RatingEvent =
  | { kind: 'task'; state: RatingScreenState }
  | { kind: 'done' }
  | { kind: 'error'; message: string; recoverable: boolean };

/**
 * Sequential task flow. All progress lives on the server, so creating a
 * new session (e.g. after a page reload) resumes at the server-reported
 * next task.
 */
export class RatingSession {
  state: RatingScreenState | null = null;

  constructor(
    private readonly api: ApiClient,
    private readonly rater: string,
    private readonly onEvent: (ev: RatingEvent) => void
  ) {}

  async start(): Promise<void> {
    const task = await this.api.nextTask(this.rater);
    if (task === null) {
      this.state = null;
      this.onEvent({ kind: 'done' });
      return;
    }
    this.state = new RatingScreenState(task);
    this.onEvent({ kind: 'task', state: this.state });
  }

  async submit(): Promise<void> {
    if (this.state === null || !this.state.submitEnabled) {
      this.onEvent({ kind: 'error', message: 'rate all four variants first', recoverable: true });
      return;
    }
    try {
      await this.api.submitRating(this.state.task.task_id, this.rater, this.state.payload());
    } catch (err) {
      if (err instanceof ApiError) {
        // conflict (already submitted) and validation errors keep the
        // current screen so the rater loses nothing
        this.onEvent({ kind: 'error', message: err.message, recoverable: true });
        return;
      }
      throw err;
    }
    await this.start();
  }
}
