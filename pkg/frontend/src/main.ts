/** Wires the pure state machine to the DOM, the service, and the viewer. */

import { makeClient } from './api.js';
import {
  Command,
  DEBOUNCE_MS,
  ExplorerState,
  initialState,
  loadContents,
  loadEmbedding,
  pointStyle,
  releasePointer,
  requestFailed,
  responseArrived,
  selectContent,
  tick,
} from './state.js';
import { drawStyleMap, fitView, MapView } from './stylemap.js';
import { MeshViewer } from './viewer.js';

const baseUrl = (window as { VOXDETAIL_URL?: string }).VOXDETAIL_URL ?? '';
const client = makeClient(baseUrl);

let state: ExplorerState = initialState();
let view: MapView | null = null;
let timer: number | null = null;

const mapCanvas = document.getElementById('style-map') as HTMLCanvasElement;
const meshCanvas = document.getElementById('mesh-view') as HTMLCanvasElement;
const contentList = document.getElementById('contents') as HTMLElement;
const banner = document.getElementById('banner') as HTMLElement;
const ctx = mapCanvas.getContext('2d') as CanvasRenderingContext2D;
const viewer = new MeshViewer(meshCanvas);

function redraw(): void {
  if (state.embedding && view) {
    drawStyleMap(ctx, state.embedding, view, state.stylePoint, state.snappedStyleId);
  }
  banner.textContent = state.error ?? '';
  banner.style.display = state.error ? 'block' : 'none';
  for (const el of contentList.querySelectorAll('button')) {
    el.classList.toggle('selected', el.dataset.id === state.selectedContent);
  }
}

function run(commands: Command[]): void {
  for (const cmd of commands) {
    if (cmd.kind === 'send') {
      const { request } = cmd;
      client
        .detailize(request.contentId, request.style)
        .then((mesh) => {
          state = responseArrived(state, request.seq, mesh);
          if (state.meshSeq === request.seq && state.mesh) {
            viewer.setMesh(state.mesh);
          }
          redraw();
        })
        .catch((err: Error) => {
          state = requestFailed(state, request.seq, err.message);
          redraw();
        });
    } else if (cmd.kind === 'schedule') {
      if (timer !== null) {
        window.clearTimeout(timer);
      }
      timer = window.setTimeout(() => {
        timer = null;
        const [next, cmds] = tick(state, performance.now());
        state = next;
        run(cmds);
        redraw();
      }, DEBOUNCE_MS);
    }
  }
}

function canvasPoint(e: PointerEvent): [number, number] {
  const rect = mapCanvas.getBoundingClientRect();
  const c: [number, number] = [e.clientX - rect.left, e.clientY - rect.top];
  return (view as MapView).toWorld(c);
}

mapCanvas.addEventListener('pointerdown', (e) => {
  if (!view) {
    return;
  }
  mapCanvas.setPointerCapture(e.pointerId);
  const [next, cmds] = pointStyle(state, canvasPoint(e), performance.now(), true);
  state = next;
  run(cmds);
  redraw();
});

mapCanvas.addEventListener('pointermove', (e) => {
  if (!view || !state.dragging) {
    return;
  }
  const [next, cmds] = pointStyle(state, canvasPoint(e), performance.now(), true);
  state = next;
  run(cmds);
  redraw();
});

mapCanvas.addEventListener('pointerup', () => {
  const [next, cmds] = releasePointer(state, performance.now());
  state = next;
  run(cmds);
  redraw();
});

async function boot(): Promise<void> {
  const healthy = await client.health();
  if (!healthy) {
    banner.textContent = 'service unreachable - is the backend running?';
    banner.style.display = 'block';
    const retry = document.createElement('button');
    retry.textContent = 'retry';
    retry.onclick = () => {
      banner.textContent = '';
      void boot();
    };
    banner.appendChild(retry);
    return;
  }
  try {
    const [embedding, contents] = await Promise.all([client.embedding(), client.contents()]);
    state = loadContents(loadEmbedding(state, embedding), contents);
    view = fitView(embedding, mapCanvas.width, mapCanvas.height);
    contentList.innerHTML = '';
    for (const { id, dims } of contents) {
      const button = document.createElement('button');
      button.textContent = `${id} (${dims.join('x')})`;
      button.dataset.id = id;
      button.onclick = () => {
        const [next, cmds] = selectContent(state, id, performance.now());
        state = next;
        run(cmds);
        redraw();
      };
      contentList.appendChild(button);
    }
    redraw();
  } catch (err) {
    state = { ...state, error: (err as Error).message };
    redraw();
  }
}

void boot();
