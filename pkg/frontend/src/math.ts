/** Small vector/camera helpers for the software renderer. */

export type Vec3 = [number, number, number];

export function sub(a: Vec3, b: Vec3): Vec3 {
  return [a[0] - b[0], a[1] - b[1], a[2] - b[2]];
}

export function cross(a: Vec3, b: Vec3): Vec3 {
  return [
    a[1] * b[2] - a[2] * b[1],
    a[2] * b[0] - a[0] * b[2],
    a[0] * b[1] - a[1] * b[0],
  ];
}

export function dot(a: Vec3, b: Vec3): number {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

export function normalize(a: Vec3): Vec3 {
  const n = Math.hypot(a[0], a[1], a[2]) || 1;
  return [a[0] / n, a[1] / n, a[2] / n];
}

/** Bilinear corner weights for cell (i, j) of a g x g grid; exact 0/1 at the
 * corners so corner cells reproduce the corner inputs bit for bit. */
export function bilinearWeights(i: number, j: number, g: number): [number, number, number, number] {
  const u = g === 1 ? 0 : i / (g - 1);
  const w = g === 1 ? 0 : j / (g - 1);
  return [(1 - u) * (1 - w), (1 - u) * w, u * (1 - w), u * w];
}

export function blendLatents(corners: number[][], weights: [number, number, number, number]): number[] {
  const out = new Array(corners[0].length).fill(0);
  for (let c = 0; c < 4; c++) {
    const wc = weights[c];
    const vec = corners[c];
    for (let d = 0; d < vec.length; d++) out[d] += wc * vec[d];
  }
  return out;
}

export interface Camera {
  yaw: number;
  pitch: number;
  dist: number;
}

/** Orbit-camera projection: world point -> [screenX, screenY, viewDepth]. */
export function project(
  p: Vec3,
  cam: Camera,
  width: number,
  height: number,
  scale: number,
): [number, number, number] {
  const cy = Math.cos(cam.yaw), sy = Math.sin(cam.yaw);
  const cp = Math.cos(cam.pitch), sp = Math.sin(cam.pitch);
  // yaw about +y, then pitch about +x, then push back by dist
  const x1 = cy * p[0] + sy * p[2];
  const z1 = -sy * p[0] + cy * p[2];
  const y2 = cp * p[1] - sp * z1;
  const z2 = sp * p[1] + cp * z1;
  const depth = cam.dist - z2;
  const f = scale / Math.max(depth, 1e-6);
  return [width / 2 + f * x1, height / 2 - f * y2, depth];
}

export function faceNormal(a: Vec3, b: Vec3, c: Vec3): Vec3 {
  return normalize(cross(sub(b, a), sub(c, a)));
}
