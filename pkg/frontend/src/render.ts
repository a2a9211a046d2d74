/** Canvas-2D software renderer: flat-shaded painter-sorted triangles for
 * meshes, stroked closed paths for contours, dots for clouds. Fast enough
 * for a few thousand triangles per frame, no GPU dependencies. */

import { Camera, Vec3, dot, faceNormal, normalize, project } from "./math.js";

const LIGHT = normalize([0.45, 0.8, 0.55]);

export interface Geometry {
  vertices: number[][];
  faces?: number[][];
}

function bounds(vertices: number[][]): { center: Vec3; radius: number } {
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (const v of vertices) {
    for (let d = 0; d < 3; d++) {
      const x = v[d] ?? 0;
      if (x < lo[d]) lo[d] = x;
      if (x > hi[d]) hi[d] = x;
    }
  }
  const center: Vec3 = [(lo[0] + hi[0]) / 2, (lo[1] + hi[1]) / 2, (lo[2] + hi[2]) / 2];
  const radius = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2], 1e-9) / 2;
  return { center, radius };
}

export function renderGeometry(
  ctx: CanvasRenderingContext2D,
  geom: Geometry,
  cam: Camera,
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (!geom.vertices.length) return;
  const { center, radius } = bounds(geom.vertices);
  const scale = (0.42 * Math.min(width, height) * cam.dist) / (radius * 3.2);
  const pts: Vec3[] = geom.vertices.map((v) => [
    (v[0] ?? 0) - center[0],
    (v[1] ?? 0) - center[1],
    (v[2] ?? 0) - center[2],
  ]);
  const projected = pts.map((p) => project(p, cam, width, height, scale));

  if (geom.faces && geom.faces.length) {
    const order = geom.faces
      .map((f, i) => ({
        i,
        depth: (projected[f[0]][2] + projected[f[1]][2] + projected[f[2]][2]) / 3,
      }))
      .sort((a, b) => b.depth - a.depth);
    for (const { i } of order) {
      const [a, b, c] = geom.faces[i];
      const n = faceNormal(pts[a], pts[b], pts[c]);
      const lum = 0.35 + 0.65 * Math.max(0, Math.abs(dot(n, LIGHT)));
      const shade = Math.round(40 + 175 * lum);
      ctx.fillStyle = `rgb(${Math.round(shade * 0.45)}, ${Math.round(shade * 0.72)}, ${shade})`;
      ctx.beginPath();
      ctx.moveTo(projected[a][0], projected[a][1]);
      ctx.lineTo(projected[b][0], projected[b][1]);
      ctx.lineTo(projected[c][0], projected[c][1]);
      ctx.closePath();
      ctx.fill();
    }
    return;
  }

  const flat2d = geom.vertices.every((v) => v.length === 2 || v[2] === 0);
  if (flat2d && geom.vertices[0].length === 2) {
    // closed contour: implicit cycle connectivity
    ctx.strokeStyle = "#2f6fb4";
    ctx.lineWidth = 2;
    ctx.beginPath();
    projected.forEach(([x, y], i) => (i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y)));
    ctx.closePath();
    ctx.stroke();
    return;
  }
  ctx.fillStyle = "#2f6fb4";
  for (const [x, y] of projected) {
    ctx.beginPath();
    ctx.arc(x, y, 2.0, 0, 2 * Math.PI);
    ctx.fill();
  }
}

/** Alignment-curve sparkline for the style-transfer panel. */
export function renderCurve(
  ctx: CanvasRenderingContext2D,
  values: number[],
  width: number,
  height: number,
): void {
  ctx.clearRect(0, 0, width, height);
  if (values.length < 2) return;
  const max = Math.max(...values, 1e-12);
  ctx.strokeStyle = "#b44";
  ctx.lineWidth = 1.5;
  ctx.beginPath();
  values.forEach((v, i) => {
    const x = (i / (values.length - 1)) * (width - 8) + 4;
    const y = height - 4 - (v / max) * (height - 8);
    i === 0 ? ctx.moveTo(x, y) : ctx.lineTo(x, y);
  });
  ctx.stroke();
}
