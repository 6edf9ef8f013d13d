import { describe, expect, it } from 'vitest';

import { ApiClient, ApiError } from '../src/api';

describe('ApiClient', () => {
  it('returns null from nextTask when the queue is done', async () => {
    const api = new ApiClient(
      '',
      async () => new Response(JSON.stringify({ done: true }), { status: 200 })
    );
    expect(await api.nextTask('r1')).toBeNull();
  });

  it('throws ApiError with the server code on JSON errors', async () => {
    const api = new ApiClient(
      '',
      async () =>
        new Response(JSON.stringify({ code: 'not_found', message: 'unknown rater' }), {
          status: 404,
        })
    );
    await expect(api.nextTask('ghost')).rejects.toMatchObject({
      status: 404,
      code: 'not_found',
      message: 'unknown rater',
    });
  });

  it('degrades cleanly on non-JSON error bodies', async () => {
    const api = new ApiClient('', async () => new Response('boom', { status: 500 }));
    try {
      await api.progress();
      expect.unreachable();
    } catch (err) {
      expect(err).toBeInstanceOf(ApiError);
      expect((err as ApiError).code).toBe('unknown');
    }
  });

  it('URL-encodes rater ids', async () => {
    const calls: string[] = [];
    const api = new ApiClient('', async (input) => {
      calls.push(input);
      return new Response(JSON.stringify({ done: true }), { status: 200 });
    });
    await api.nextTask('rater one');
    expect(calls[0]).toBe('/api/tasks/next?rater=rater%20one');
  });
});
