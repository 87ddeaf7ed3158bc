/** Binary mesh wire format: u32 vertexCount, u32 triangleCount,
 *  then f32 x/y/z per vertex, then u32 index triples (little-endian). */

export interface Mesh {
  vertices: Float32Array; // 3 * vertexCount
  indices: Uint32Array; // 3 * triangleCount
}

export function decodeMeshBlob(buffer: ArrayBuffer): Mesh {
  if (buffer.byteLength < 8) {
    throw new Error(`mesh blob too short: ${buffer.byteLength} bytes`);
  }
  const header = new DataView(buffer);
  const vertexCount = header.getUint32(0, true);
  const triangleCount = header.getUint32(4, true);
  const expected = 8 + 12 * vertexCount + 12 * triangleCount;
  if (buffer.byteLength !== expected) {
    throw new Error(`mesh blob size ${buffer.byteLength}, expected ${expected}`);
  }
  const vertices = new Float32Array(buffer, 8, 3 * vertexCount);
  const indices = new Uint32Array(buffer, 8 + 12 * vertexCount, 3 * triangleCount);
  for (const idx of indices) {
    if (idx >= vertexCount) {
      throw new Error(`triangle index ${idx} out of range`);
    }
  }
  return { vertices, indices };
}

export function meshBounds(mesh: Mesh): { center: [number, number, number]; radius: number } {
  if (mesh.vertices.length === 0) {
    return { center: [0, 0, 0], radius: 1 };
  }
  const lo = [Infinity, Infinity, Infinity];
  const hi = [-Infinity, -Infinity, -Infinity];
  for (let i = 0; i < mesh.vertices.length; i += 3) {
    for (let a = 0; a < 3; a++) {
      lo[a] = Math.min(lo[a], mesh.vertices[i + a]);
      hi[a] = Math.max(hi[a], mesh.vertices[i + a]);
    }
  }
  const center: [number, number, number] = [
    (lo[0] + hi[0]) / 2,
    (lo[1] + hi[1]) / 2,
    (lo[2] + hi[2]) / 2,
  ];
  const radius = Math.max(hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]) / 2 || 1;
  return { center, radius };
}
