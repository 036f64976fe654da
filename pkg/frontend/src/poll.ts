/** Fixed-interval polling with multiplicative backoff and a hard cap. */

export interface PollOptions {
  intervalMs?: number;
  backoff?: number;
  maxIntervalMs?: number;
  maxAttempts?: number;
}

const sleep = (ms: number) => new Promise((resolve) => setTimeout(resolve, ms));

/**
 * Repeatedly evaluate `step` until it returns a non-null value. Used by the
 * payment screen to watch for the network confirmation.
 */
export async function pollUntil<T>(
  step: () => Promise<T | null>,
  options: PollOptions = {},
): Promise<T> {
  const { intervalMs = 1000, backoff = 1.5, maxIntervalMs = 15000, maxAttempts = 30 } = options;
  let wait = intervalMs;
  for (let attempt = 0; attempt < maxAttempts; attempt += 1) {
    const result = await step();
    if (result !== null) return result;
    await sleep(wait);
    wait = Math.min(wait * backoff, maxIntervalMs);
  }
  throw new Error(`gave up after ${maxAttempts} polling attempts`);
}
