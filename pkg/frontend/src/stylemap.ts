/** Interactive 2-D style map: exemplar scatter, triangulation overlay, and
 *  a draggable style point clamped to the hull. */

import { boundaryEdges, Embedding } from './geometry.js';

export interface MapView {
  toCanvas(p: [number, number]): [number, number];
  toWorld(c: [number, number]): [number, number];
}

export function fitView(embedding: Embedding, width: number, height: number): MapView {
  const xs = embedding.points.map((p) => p[0]);
  const ys = embedding.points.map((p) => p[1]);
  const lo = [Math.min(...xs), Math.min(...ys)];
  const hi = [Math.max(...xs), Math.max(...ys)];
  const span = Math.max(hi[0] - lo[0], hi[1] - lo[1]) || 1;
  const margin = 0.15 * span;
  const scale = Math.min(width, height) / (span + 2 * margin);
  const cx = (lo[0] + hi[0]) / 2;
  const cy = (lo[1] + hi[1]) / 2;
  return {
    toCanvas: (p) => [width / 2 + (p[0] - cx) * scale, height / 2 - (p[1] - cy) * scale],
    toWorld: (c) => [cx + (c[0] - width / 2) / scale, cy - (c[1] - height / 2) / scale],
  };
}

export function drawStyleMap(
  ctx: CanvasRenderingContext2D,
  embedding: Embedding,
  view: MapView,
  stylePoint: [number, number] | null,
  snappedId: string | null,
): void {
  const { width, height } = ctx.canvas;
  ctx.clearRect(0, 0, width, height);
  ctx.fillStyle = '#11151c';
  ctx.fillRect(0, 0, width, height);

  ctx.strokeStyle = '#2a3442';
  ctx.lineWidth = 1;
  for (const tri of embedding.triangles) {
    ctx.beginPath();
    const [a, b, c] = tri.map((i) => view.toCanvas(embedding.points[i]));
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.lineTo(c[0], c[1]);
    ctx.closePath();
    ctx.stroke();
  }

  ctx.strokeStyle = '#46607e';
  ctx.lineWidth = 2;
  for (const [i0, i1] of boundaryEdges(embedding.triangles)) {
    const a = view.toCanvas(embedding.points[i0]);
    const b = view.toCanvas(embedding.points[i1]);
    ctx.beginPath();
    ctx.moveTo(a[0], a[1]);
    ctx.lineTo(b[0], b[1]);
    ctx.stroke();
  }

  ctx.font = '11px sans-serif';
  embedding.points.forEach((p, i) => {
    const [x, y] = view.toCanvas(p);
    ctx.fillStyle = embedding.ids[i] === snappedId ? '#ffd166' : '#7fb3ff';
    ctx.beginPath();
    ctx.arc(x, y, 5, 0, 2 * Math.PI);
    ctx.fill();
    ctx.fillStyle = '#aab6c6';
    ctx.fillText(embedding.ids[i], x + 7, y + 4);
  });

  if (stylePoint) {
    const [x, y] = view.toCanvas(stylePoint);
    ctx.strokeStyle = '#ff6b6b';
    ctx.lineWidth = 2;
    ctx.beginPath();
    ctx.arc(x, y, 8, 0, 2 * Math.PI);
    ctx.stroke();
    ctx.beginPath();
    ctx.moveTo(x - 4, y);
    ctx.lineTo(x + 4, y);
    ctx.moveTo(x, y - 4);
    ctx.lineTo(x, y + 4);
    ctx.stroke();
  }
}
