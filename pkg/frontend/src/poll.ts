/**
 * Polling loop for notifications and presence. The backend exposes no push
 * channel; the portal refreshes on a fixed interval instead.
 */

export const POLL_INTERVAL_MS = 5000;

export interface Poller {
  stop(): void;
}

export function startPolling(
  tick: () => Promise<void>,
  intervalMs: number = POLL_INTERVAL_MS,
): Poller {
  let stopped = false;
  let timer: ReturnType<typeof setTimeout> | null = null;

  const loop = async () => {
    if (stopped) return;
    try {
      await tick();
    } catch {
      // polling never crashes the page; the next tick retries
    }
    if (!stopped) timer = setTimeout(loop, intervalMs);
  };
  timer = setTimeout(loop, intervalMs);

  return {
    stop() {
      stopped = true;
      if (timer !== null) clearTimeout(timer);
    },
  };
}
