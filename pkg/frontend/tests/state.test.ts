import { describe, expect, it } from "vitest";

import {
  appliedSpectrum,
  bandRanges,
  fromHash,
  initialState,
  isReset,
  toHash,
} from "../src/state.js";

describe("band grouping", () => {
  it("uses the first-dozen / last-dozen split at k=30", () => {
    expect(bandRanges(30)).toEqual([
      { lo: 1, hi: 12 },
      { lo: 13, hi: 24 },
      { lo: 25, hi: 29 },
    ]);
  });

  it("clips to small bandwidths", () => {
    expect(bandRanges(12)).toEqual([{ lo: 1, hi: 11 }]);
    expect(bandRanges(20)).toEqual([
      { lo: 1, hi: 12 },
      { lo: 13, hi: 19 },
    ]);
  });

  it("never touches the zero eigenvalue", () => {
    for (const k of [8, 12, 30, 60]) {
      for (const range of bandRanges(k)) {
        expect(range.lo).toBeGreaterThanOrEqual(1);
        expect(range.hi).toBeLessThan(k);
      }
    }
  });
});

describe("applied spectrum", () => {
  it("is the base spectrum when every multiplier is one", () => {
    const state = initialState(30);
    state.baseSpectrum = Array.from({ length: 30 }, (_, i) => i * i * 0.5);
    expect(isReset(state)).toBe(true);
    expect(appliedSpectrum(state)).toEqual(state.baseSpectrum);
  });

  it("scales exactly the low band and stays sorted with a zero head", () => {
    const state = initialState(30);
    state.baseSpectrum = Array.from({ length: 30 }, (_, i) => i);
    state.multipliers[0] = 0.7;
    const out = appliedSpectrum(state);
    expect(out[0]).toBe(0);
    for (let i = 1; i < out.length; i++) expect(out[i]).toBeGreaterThanOrEqual(out[i - 1]);
    expect(out[1]).toBeCloseTo(0.7, 12);
    expect(out[29]).toBe(29);
  });
});

describe("hash round trip", () => {
  it("restores multipliers, sample, corners, and camera exactly", () => {
    const state = initialState(30);
    state.sampleId = 7;
    state.multipliers = [0.8, 1.1, 1.0];
    state.corners = [2, 3, 5, 8];
    state.camera = { yaw: 1.25, pitch: -0.4, dist: 4.5 };
    const restored = fromHash(toHash(state), initialState(30));
    expect(restored.sampleId).toBe(7);
    expect(restored.multipliers).toEqual([0.8, 1.1, 1.0]);
    expect(restored.corners).toEqual([2, 3, 5, 8]);
    expect(restored.camera).toEqual(state.camera);
  });

  it("rejects hashes from a different bandwidth", () => {
    const state = initialState(30);
    state.multipliers = [0.5, 1, 1];
    const other = fromHash(toHash(state), initialState(15));
    expect(other.multipliers.every((m) => m === 1)).toBe(true);
  });

  it("ignores garbage hashes", () => {
    const base = initialState(30);
    expect(fromHash("#not-json", base)).toBe(base);
    expect(fromHash("", base)).toBe(base);
  });
});
