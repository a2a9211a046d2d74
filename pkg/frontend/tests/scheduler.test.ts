import { describe, expect, it, vi } from "vitest";

import { LatestWins, debounce } from "../src/scheduler.js";

function deferred<T>() {
  let resolve!: (v: T) => void;
  let reject!: (e: unknown) => void;
  const promise = new Promise<T>((res, rej) => {
    resolve = res;
    reject = rej;
  });
  return { promise, resolve, reject };
}

describe("latest-wins dispatch", () => {
  it("drops a stale response that lands after a newer one", async () => {
    const slots = [deferred<string>(), deferred<string>()];
    let call = 0;
    const delivered: string[] = [];
    const lw = new LatestWins<number, string>(
      () => slots[call++].promise,
      (r) => delivered.push(r),
    );
    lw.dispatch(1);
    lw.dispatch(2);
    slots[1].resolve("second");
    await Promise.resolve();
    slots[0].resolve("first"); // stale: must not be delivered
    await Promise.resolve();
    expect(delivered).toEqual(["second"]);
  });

  it("delivers in-order responses normally", async () => {
    const delivered: number[] = [];
    const lw = new LatestWins<number, number>(
      async (x) => x * 10,
      (r) => delivered.push(r),
    );
    lw.dispatch(1);
    await Promise.resolve();
    lw.dispatch(2);
    await Promise.resolve();
    expect(delivered).toEqual([10, 20]);
  });

  it("suppresses errors from superseded requests", async () => {
    const slots = [deferred<string>(), deferred<string>()];
    let call = 0;
    const errors: unknown[] = [];
    const lw = new LatestWins<number, string>(
      () => slots[call++].promise,
      () => undefined,
      (e) => errors.push(e),
    );
    lw.dispatch(1);
    lw.dispatch(2);
    slots[1].resolve("ok");
    await Promise.resolve();
    slots[0].reject(new Error("stale failure"));
    await Promise.resolve();
    expect(errors).toEqual([]);
  });
});

describe("debounce", () => {
  it("coalesces a burst into one trailing call", () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const fn = debounce((x: number) => calls.push(x), 30);
    fn(1);
    fn(2);
    fn(3);
    vi.advanceTimersByTime(29);
    expect(calls).toEqual([]);
    vi.advanceTimersByTime(2);
    expect(calls).toEqual([3]);
    vi.useRealTimers();
  });

  it("fires again for a later burst", () => {
    vi.useFakeTimers();
    const calls: number[] = [];
    const fn = debounce((x: number) => calls.push(x), 30);
    fn(1);
    vi.advanceTimersByTime(31);
    fn(2);
    vi.advanceTimersByTime(31);
    expect(calls).toEqual([1, 2]);
    vi.useRealTimers();
  });
});
