/** Explorer state machine, kept pure so interaction scripts replay exactly.
 *
 *  Drag-driven requests are debounced (250 ms trailing edge, the final
 *  settle always fires); at most one request is in flight and only the
 *  latest request's response is rendered.
 */

import { clampToHull, Embedding, snapToExemplar } from './geometry.js';
import { Mesh } from './meshblob.js';

export const DEBOUNCE_MS = 250;
export const SNAP_RADIUS = 0.04; // in normalized style-map units

export type StyleRef = { id: string } | { point: [number, number] };

export interface DetailizeRequest {
  contentId: string;
  style: StyleRef;
  seq: number;
}

export interface ExplorerState {
  embedding: Embedding | null;
  contents: { id: string; dims: number[] }[];
  selectedContent: string | null;
  stylePoint: [number, number] | null;
  snappedStyleId: string | null;
  mesh: Mesh | null;
  meshSeq: number;
  nextSeq: number;
  inFlightSeq: number | null;
  pendingAt: number | null; // timestamp when the debounced request may fire
  dragging: boolean;
  error: string | null;
}

export type Command =
  | { kind: 'send'; request: DetailizeRequest }
  | { kind: 'schedule'; at: number };

export function initialState(): ExplorerState {
  return {
    embedding: null,
    contents: [],
    selectedContent: null,
    stylePoint: null,
    snappedStyleId: null,
    mesh: null,
    meshSeq: -1,
    nextSeq: 0,
    inFlightSeq: null,
    pendingAt: null,
    dragging: false,
    error: null,
  };
}

export function currentStyleRef(state: ExplorerState): StyleRef | null {
  if (state.snappedStyleId !== null) {
    return { id: state.snappedStyleId };
  }
  if (state.stylePoint !== null) {
    return { point: state.stylePoint };
  }
  return null;
}

function readyToRequest(state: ExplorerState): boolean {
  return state.selectedContent !== null && currentStyleRef(state) !== null;
}

function fire(state: ExplorerState): [ExplorerState, Command[]] {
  const style = currentStyleRef(state);
  if (!readyToRequest(state) || style === null) {
    return [state, []];
  }
  const seq = state.nextSeq;
  const request: DetailizeRequest = {
    contentId: state.selectedContent as string,
    style,
    seq,
  };
  return [
    { ...state, nextSeq: seq + 1, inFlightSeq: seq, pendingAt: null },
    [{ kind: 'send', request }],
  ];
}

export function loadEmbedding(state: ExplorerState, embedding: Embedding): ExplorerState {
  return { ...state, embedding, error: null };
}

export function loadContents(
  state: ExplorerState,
  contents: { id: string; dims: number[] }[],
): ExplorerState {
  return { ...state, contents };
}

export function selectContent(state: ExplorerState, id: string, now: number): [ExplorerState, Command[]] {
  // a content switch invalidates whatever is in flight (latest wins)
  const next = { ...state, selectedContent: id };
  return fire(next);
}

/** Pointer press or drag sample at a style-map point. */
export function pointStyle(
  state: ExplorerState,
  raw: [number, number],
  now: number,
  dragging: boolean,
): [ExplorerState, Command[]] {
  if (!state.embedding) {
    return [state, []];
  }
  const scale = Math.max(
    1,
    ...state.embedding.points.map((q) => Math.max(Math.abs(q[0]), Math.abs(q[1]))),
  );
  const clamped = clampToHull(state.embedding, raw);
  const snapIdx = snapToExemplar(state.embedding, clamped, SNAP_RADIUS * scale);
  const next: ExplorerState = {
    ...state,
    stylePoint: snapIdx !== null ? state.embedding.points[snapIdx] : clamped,
    snappedStyleId: snapIdx !== null ? state.embedding.ids[snapIdx] : null,
    dragging,
  };
  if (dragging) {
    const at = now + DEBOUNCE_MS;
    return [{ ...next, pendingAt: at }, [{ kind: 'schedule', at }]];
  }
  return fire(next);
}

/** Pointer release: the final settle always fires. */
export function releasePointer(state: ExplorerState, now: number): [ExplorerState, Command[]] {
  const next = { ...state, dragging: false, pendingAt: null };
  if (state.stylePoint === null && state.snappedStyleId === null) {
    return [next, []];
  }
  return fire(next);
}

/** Timer callback: fire the debounced request if it is due and still wanted. */
export function tick(state: ExplorerState, now: number): [ExplorerState, Command[]] {
  if (state.pendingAt === null || now < state.pendingAt) {
    return [state, []];
  }
  return fire({ ...state, pendingAt: null });
}

export function responseArrived(
  state: ExplorerState,
  seq: number,
  mesh: Mesh,
): ExplorerState {
  // stale responses (superseded by a newer request) are discarded
  if (seq !== state.nextSeq - 1) {
    return state;
  }
  return {
    ...state,
    mesh,
    meshSeq: seq,
    inFlightSeq: state.inFlightSeq === seq ? null : state.inFlightSeq,
    error: null,
  };
}

export function requestFailed(state: ExplorerState, seq: number, message: string): ExplorerState {
  if (seq !== state.nextSeq - 1) {
    return state;
  }
  return { ...state, inFlightSeq: null, error: message };
}
