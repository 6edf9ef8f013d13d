// Paired-comparison logic: vote left/right/comparable, keyboard 1/2/3,
// next trial auto-loads after each vote. Vigilance trials are served by
// the backend and are indistinguishable here by design.

import { ApiClient, Choice, ComparisonTrial } from './api.js';

const KEY_BINDINGS: Record<string, Choice> = {
  '1': 'left',
  '2': 'right',
  '3': 'comparable',
};

/** Maps a keyboard key to a vote choice, or null for unbound keys. */
export function choiceForKey(key: string): Choice | null {
  return KEY_BINDINGS[key] ?? null;
}

export type ComparisonEvent =
  | { kind: 'trial'; trial: ComparisonTrial }
  | { kind: 'error'; message: string };

export class ComparisonSession {
  trial: ComparisonTrial | null = null;
  private busy = false;

  constructor(
    private readonly api: ApiClient,
    private readonly rater: string,
    private readonly onEvent: (ev: ComparisonEvent) => void
  ) {}

  async start(): Promise<void> {
    this.trial = await this.api.nextComparison(this.rater);
    this.onEvent({ kind: 'trial', trial: this.trial });
  }

  async vote(choice: Choice): Promise<void> {
    if (this.trial === null || this.busy) return;
    this.busy = true;
    try {
      await this.api.submitVote(this.trial.trial_id, this.rater, choice);
      await this.start();
    } catch (err) {
      this.onEvent({ kind: 'error', message: err instanceof Error ? err.message : String(err) });
    } finally {
      this.busy = false;
    }
  }

  /** Keydown hook: returns true when the key triggered a vote. */
  handleKey(key: string): boolean {
    const choice = choiceForKey(key);
    if (choice === null) return false;
    void this.vote(choice);
    return true;
  }
}
