import { describe, expect, it } from 'vitest';

import {
  boundaryEdges,
  centroid,
  clampToHull,
  Embedding,
  insideHull,
  snapToExemplar,
} from '../src/geometry.js';

const square: Embedding = {
  ids: ['a', 'b', 'c', 'd'],
  points: [
    [0, 0],
    [1, 0],
    [0, 1],
    [1, 1],
  ],
  triangles: [
    [3, 2, 0],
    [1, 3, 0],
  ],
  codes: [[], [], [], []],
};

describe('boundaryEdges', () => {
  it('finds the four outer edges of a triangulated square', () => {
    const edges = boundaryEdges(square.triangles).map(([a, b]) => [Math.min(a, b), Math.max(a, b)]);
    edges.sort((x, y) => x[0] - y[0] || x[1] - y[1]);
    expect(edges).toEqual([
      [0, 1],
      [0, 2],
      [1, 3],
      [2, 3],
    ]);
  });
});

describe('insideHull / clampToHull', () => {
  it('keeps interior points unchanged', () => {
    expect(insideHull(square, [0.5, 0.5])).toBe(true);
    expect(clampToHull(square, [0.25, 0.75])).toEqual([0.25, 0.75]);
  });

  it('clamps outside points to the nearest boundary spot', () => {
    expect(insideHull(square, [2, 0.5])).toBe(false);
    const clamped = clampToHull(square, [2, 0.5]);
    expect(clamped[0]).toBeCloseTo(1, 12);
    expect(clamped[1]).toBeCloseTo(0.5, 12);
    const corner = clampToHull(square, [-1, -1]);
    expect(corner[0]).toBeCloseTo(0, 12);
    expect(corner[1]).toBeCloseTo(0, 12);
  });

  it('clamped points pass the inside test afterwards', () => {
    for (const p of [[3, 3], [-2, 0.5], [0.5, -9]] as [number, number][]) {
      expect(insideHull(square, clampToHull(square, p))).toBe(true);
    }
  });
});

describe('snapToExemplar', () => {
  it('snaps within the radius and not beyond', () => {
    expect(snapToExemplar(square, [0.02, 0.03], 0.05)).toBe(0);
    expect(snapToExemplar(square, [0.5, 0.5], 0.05)).toBeNull();
  });
});

describe('centroid', () => {
  it('averages points', () => {
    expect(centroid(square.points)).toEqual([0.5, 0.5]);
  });
});
