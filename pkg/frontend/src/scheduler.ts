/** Debounced, latest-wins request scheduling for slider interactions.
 *
 * Slider events arrive faster than the server round trip; we debounce them
 * (30 ms default) and tag each dispatched request with a sequence number so
 * a stale response can never overwrite a newer one.
 */

export class LatestWins<TArgs, TResult> {
  private seq = 0;
  private delivered = 0;

  constructor(
    private readonly run: (args: TArgs) => Promise<TResult>,
    private readonly deliver: (result: TResult) => void,
    private readonly onError: (err: unknown) => void = () => undefined,
  ) {}

  dispatch(args: TArgs): number {
    const ticket = ++this.seq;
    this.run(args).then(
      (result) => {
        if (ticket > this.delivered) {
          this.delivered = ticket;
          this.deliver(result);
        }
      },
      (err) => {
        if (ticket > this.delivered) this.onError(err);
      },
    );
    return ticket;
  }

  get pending(): boolean {
    return this.delivered < this.seq;
  }
}

export function debounce<T extends unknown[]>(
  fn: (...args: T) => void,
  waitMs: number,
  timers: { set: typeof setTimeout; clear: typeof clearTimeout } = {
    set: setTimeout,
    clear: clearTimeout,
  },
): (...args: T) => void {
  let handle: ReturnType<typeof setTimeout> | null = null;
  return (...args: T) => {
    if (handle !== null) timers.clear(handle);
    handle = timers.set(() => {
      handle = null;
      fn(...args);
    }, waitMs);
  };
}
