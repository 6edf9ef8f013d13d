// Typed client for the annotation service HTTP/JSON API.
//
// Variant keys are opaque server-side handles; the client never learns
// which retargeting method produced which candidate.

export type Level = 'good' | 'acceptable' | 'poor';
export type Choice = 'left' | 'right' | 'comparable';

export interface VariantRef {
  key: string;
  url: string;
}

export interface RatingTask {
  task_id: string;
  image_id: string;
  original_url: string;
  variants: VariantRef[];
}

export interface ComparisonTrial {
  trial_id: string;
  original_url: string;
  left_url: string;
  right_url: string;
}

export interface RaterProgress {
  rated_images: number;
  votes: number;
}

export interface Progress {
  images: number;
  raters: Record<string, RaterProgress>;
}

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly code: string,
    message: string
  ) {
    super(message);
    this.name = 'ApiError';
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseError(resp: Response): Promise<never> {
  let code = 'unknown';
  let message = `HTTP ${resp.status}`;
  try {
    const body = await resp.json();
    if (typeof body.code === 'string') code = body.code;
    if (typeof body.message === 'string') message = body.message;
  } catch {
    // non-JSON error body; keep the generic message
  }
  throw new ApiError(resp.status, code, message);
}

export class ApiClient {
  constructor(
    private readonly base: string = '',
    private readonly fetchImpl: FetchLike = (input, init) => fetch(input, init)
  ) {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await this.fetchImpl(this.base + path);
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  private async postJson<T>(path: string, payload: unknown): Promise<T> {
    const resp = await this.fetchImpl(this.base + path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
    if (!resp.ok) await parseError(resp);
    return (await resp.json()) as T;
  }

  /** Next rating task for the rater, or null when the queue is finished. */
  async nextTask(rater: string): Promise<RatingTask | null> {
    const body = await this.getJson<RatingTask | { done: boolean }>(
      `/api/tasks/next?rater=${encodeURIComponent(rater)}`
    );
    return 'done' in body ? null : body;
  }

  async submitRating(
    taskId: string,
    rater: string,
    levels: Record<string, Level>
  ): Promise<void> {
    await this.postJson('/api/ratings', { task_id: taskId, rater, levels });
  }

  async submitAttributes(imageId: string, rater: string, flags: number[]): Promise<void> {
    await this.postJson('/api/attributes', { image_id: imageId, rater, flags });
  }

  async nextComparison(rater: string): Promise<ComparisonTrial> {
    return this.getJson<ComparisonTrial>(
      `/api/comparisons/next?rater=${encodeURIComponent(rater)}`
    );
  }

  async submitVote(trialId: string, rater: string, choice: Choice): Promise<void> {
    await this.postJson('/api/votes', { trial_id: trialId, rater, choice });
  }

  async progress(): Promise<Progress> {
    return this.getJson<Progress>('/api/progress');
  }
}
