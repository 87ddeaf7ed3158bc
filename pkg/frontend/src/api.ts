/** Typed client for the detailization service. */

import { Embedding } from './geometry.js';
import { decodeMeshBlob, Mesh } from './meshblob.js';
import { StyleRef } from './state.js';

export interface ApiClient {
  health(): Promise<boolean>;
  embedding(): Promise<Embedding>;
  contents(): Promise<{ id: string; dims: number[] }[]>;
  detailize(contentId: string, style: StyleRef, postprocess?: string): Promise<Mesh>;
  detailizeRaw(contentId: string, style: StyleRef, postprocess?: string): Promise<ArrayBuffer>;
}

function styleBody(style: StyleRef): Record<string, unknown> {
  return 'id' in style ? { id: style.id } : { point: style.point };
}

export function makeClient(baseUrl: string, fetchFn: typeof fetch = fetch): ApiClient {
  async function getJson(path: string): Promise<unknown> {
    const res = await fetchFn(`${baseUrl}${path}`);
    if (!res.ok) {
      throw new Error(`GET ${path} -> ${res.status}`);
    }
    return res.json();
  }

  async function detailizeRaw(
    contentId: string,
    style: StyleRef,
    postprocess = 'none',
  ): Promise<ArrayBuffer> {
    const res = await fetchFn(`${baseUrl}/api/detailize`, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify({ content_id: contentId, style: styleBody(style), postprocess }),
    });
    if (!res.ok) {
      let message = `detailize -> ${res.status}`;
      try {
        const body = (await res.json()) as { error?: string };
        if (body.error) {
          message = body.error;
        }
      } catch {
        // keep the status message
      }
      throw new Error(message);
    }
    return res.arrayBuffer();
  }

  return {
    async health() {
      try {
        const res = await fetchFn(`${baseUrl}/api/health`);
        return res.ok;
      } catch {
        return false;
      }
    },
    embedding: () => getJson('/api/embedding') as Promise<Embedding>,
    contents: () => getJson('/api/contents') as Promise<{ id: string; dims: number[] }[]>,
    detailizeRaw,
    detailize: async (contentId, style, postprocess = 'none') =>
      decodeMeshBlob(await detailizeRaw(contentId, style, postprocess)),
  };
}
