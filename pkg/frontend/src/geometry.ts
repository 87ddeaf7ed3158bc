/** Style-map geometry: hull clamping and point hit-testing, mirroring the
 *  backend's conventions so displayed points match what the server uses. */

export interface Embedding {
  ids: string[];
  points: [number, number][];
  triangles: [number, number, number][];
  codes: number[][];
}

type Pt = [number, number];

function sub(a: Pt, b: Pt): Pt {
  return [a[0] - b[0], a[1] - b[1]];
}

function dot(a: Pt, b: Pt): number {
  return a[0] * b[0] + a[1] * b[1];
}

export function boundaryEdges(triangles: [number, number, number][]): [number, number][] {
  const counts = new Map<string, [number, number]>();
  const seen = new Map<string, number>();
  for (const tri of triangles) {
    const edges: [number, number][] = [
      [tri[0], tri[1]],
      [tri[1], tri[2]],
      [tri[2], tri[0]],
    ];
    for (const [a, b] of edges) {
      const key = `${Math.min(a, b)}:${Math.max(a, b)}`;
      counts.set(key, [a, b]);
      seen.set(key, (seen.get(key) ?? 0) + 1);
    }
  }
  const out: [number, number][] = [];
  for (const [key, edge] of counts) {
    if (seen.get(key) === 1) {
      out.push(edge);
    }
  }
  return out;
}

function barycentric(p: Pt, a: Pt, b: Pt, c: Pt): [number, number, number] | null {
  const den = (b[1] - c[1]) * (a[0] - c[0]) + (c[0] - b[0]) * (a[1] - c[1]);
  if (den === 0) {
    return null;
  }
  const w0 = ((b[1] - c[1]) * (p[0] - c[0]) + (c[0] - b[0]) * (p[1] - c[1])) / den;
  const w1 = ((c[1] - a[1]) * (p[0] - c[0]) + (a[0] - c[0]) * (p[1] - c[1])) / den;
  return [w0, w1, 1 - w0 - w1];
}

export function insideHull(embedding: Embedding, p: Pt): boolean {
  const scale = Math.max(1, ...embedding.points.map((q) => Math.max(Math.abs(q[0]), Math.abs(q[1]))));
  for (const tri of embedding.triangles) {
    const w = barycentric(p, embedding.points[tri[0]], embedding.points[tri[1]], embedding.points[tri[2]]);
    if (w && Math.min(...w) >= -1e-9 * scale) {
      return true;
    }
  }
  return false;
}

/** Clamp a point to the nearest spot on the hull boundary (identity inside). */
export function clampToHull(embedding: Embedding, p: Pt): Pt {
  if (insideHull(embedding, p)) {
    return p;
  }
  let best: Pt = embedding.points[0] ?? [0, 0];
  let bestD = Infinity;
  for (const [i0, i1] of boundaryEdges(embedding.triangles)) {
    const a = embedding.points[i0];
    const b = embedding.points[i1];
    const ab = sub(b, a);
    const denom = dot(ab, ab);
    const t = denom === 0 ? 0 : Math.min(1, Math.max(0, dot(sub(p, a), ab) / denom));
    const cand: Pt = [a[0] + t * ab[0], a[1] + t * ab[1]];
    const d = dot(sub(p, cand), sub(p, cand));
    if (d < bestD) {
      bestD = d;
      best = cand;
    }
  }
  return best;
}

/** Index of the exemplar point within `radius` of p, or null. */
export function snapToExemplar(embedding: Embedding, p: Pt, radius: number): number | null {
  let best: number | null = null;
  let bestD = radius * radius;
  embedding.points.forEach((q, i) => {
    const d = dot(sub(p, q), sub(p, q));
    if (d <= bestD) {
      bestD = d;
      best = i;
    }
  });
  return best;
}

export function centroid(pts: Pt[]): Pt {
  let x = 0;
  let y = 0;
  for (const p of pts) {
    x += p[0];
    y += p[1];
  }
  return [x / pts.length, y / pts.length];
}
