/** Explorer state: the working spectrum, band multipliers, selections, and
 * URL-hash persistence so a view can be shared or restored exactly. */

export interface BandRange {
  lo: number;
  hi: number; // inclusive
}

export interface ExplorerState {
  k: number;
  sampleId: number | null;
  baseSpectrum: number[];
  multipliers: number[]; // one per band
  corners: number[]; // sample ids for the interpolation view
  renderMode: "mesh" | "contour" | "cloud";
  camera: { yaw: number; pitch: number; dist: number };
}

/** Default grouping: low covers the first dozen nonzero eigenvalues, high the
 * last dozen of the working band, mid whatever sits between. Clips to k. */
export function bandRanges(k: number): BandRange[] {
  const last = k - 1;
  const ranges: BandRange[] = [];
  const lowHi = Math.min(12, last);
  ranges.push({ lo: 1, hi: lowHi });
  if (lowHi < last) {
    const midHi = Math.min(24, last);
    ranges.push({ lo: lowHi + 1, hi: midHi });
    if (midHi < last) {
      ranges.push({ lo: midHi + 1, hi: last });
    }
  }
  return ranges;
}

export function initialState(k: number): ExplorerState {
  return {
    k,
    sampleId: null,
    baseSpectrum: new Array(k).fill(0),
    multipliers: bandRanges(k).map(() => 1),
    corners: [],
    renderMode: "mesh",
    camera: { yaw: 0.6, pitch: 0.35, dist: 3.2 },
  };
}

/** Multiplier-applied spectrum, re-sorted and pinned so it stays a valid
 * nondecreasing sequence starting at zero (mirror of the server contract). */
export function appliedSpectrum(state: ExplorerState): number[] {
  const out = state.baseSpectrum.slice();
  bandRanges(state.k).forEach((range, b) => {
    const f = state.multipliers[b] ?? 1;
    for (let i = range.lo; i <= range.hi; i++) out[i] *= f;
  });
  out.sort((a, b) => a - b);
  out[0] = 0;
  return out;
}

export function isReset(state: ExplorerState): boolean {
  return state.multipliers.every((m) => m === 1);
}

/** Serialize the shareable parts into a URL hash fragment. */
export function toHash(state: ExplorerState): string {
  const payload = {
    k: state.k,
    s: state.sampleId,
    m: state.multipliers,
    c: state.corners,
    cam: [state.camera.yaw, state.camera.pitch, state.camera.dist],
  };
  return "#" + encodeURIComponent(JSON.stringify(payload));
}

export function fromHash(hash: string, base: ExplorerState): ExplorerState {
  if (!hash.startsWith("#")) return base;
  try {
    const payload = JSON.parse(decodeURIComponent(hash.slice(1)));
    if (typeof payload.k !== "number" || payload.k !== base.k) return base;
    return {
      ...base,
      sampleId: payload.s ?? base.sampleId,
      multipliers: Array.isArray(payload.m) && payload.m.length === base.multipliers.length
        ? payload.m.map(Number)
        : base.multipliers,
      corners: Array.isArray(payload.c) ? payload.c.map(Number) : base.corners,
      camera: Array.isArray(payload.cam) && payload.cam.length === 3
        ? { yaw: payload.cam[0], pitch: payload.cam[1], dist: payload.cam[2] }
        : base.camera,
    };
  } catch {
    return base;
  }
}
