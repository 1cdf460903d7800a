// Browser entry point: wires the controllers to the DOM. The gallery, the
// polygon canvas, the 3x3 suggestion grid, and the quiz editors all render
// here; every piece of engine logic stays behind the ApiClient.

import { ApiClient } from "./api.js";
import { CanvasState } from "./canvas.js";
import { QuizBuilder, studentPreview } from "./quizmaker.js";
import { CLASS_NAMES, FrameInfo, PolygonWire, QuizDoc } from "./schemas.js";
import { SearchController } from "./search.js";

const PALETTE: Record<number, string> = {
  2: "#aa3c28",
  8: "#50aa50",
  4: "#f0dc82",
  3: "#dcaa3c",
  6: "#c81e1e",
  5: "#5ac8dc",
};

const api = new ApiClient("");
const canvas = new CanvasState();
const searcher = new SearchController(api, canvas);
const builder = new QuizBuilder(api);

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function polygonPoints(p: PolygonWire): string {
  return p.vertices.map(([x, y]) => `${x},${y}`).join(" ");
}

function renderCanvas(): void {
  const svg = el<HTMLElement>("canvas-svg");
  const scene = canvas.scene;
  if (!scene) {
    svg.innerHTML = "";
    return;
  }
  svg.setAttribute("viewBox", `0 0 ${scene.canvas.width} ${scene.canvas.height}`);
  const degenerate = new Set(canvas.degenerateIndices());
  svg.innerHTML = scene.polygons
    .map((p, i) => {
      const selected = i === canvas.selection;
      const stroke = degenerate.has(i) ? "#ff0044" : selected ? "#ffffff" : "#222";
      return `<polygon data-index="${i}" points="${polygonPoints(p)}"
        fill="${PALETTE[p.class] ?? "#888"}" fill-opacity="0.55"
        stroke="${stroke}" stroke-width="${selected ? 2 : 1}"/>`;
    })
    .join("");
  svg.querySelectorAll("polygon").forEach((node) => {
    node.addEventListener("click", () => {
      canvas.select(Number(node.getAttribute("data-index")));
      renderCanvas();
      renderInspector();
    });
  });
  el("submit-warning").textContent = canvas.canSubmit()
    ? ""
    : "a degenerate polygon blocks search";
}

function renderInspector(): void {
  const scene = canvas.scene;
  const box = el("inspector");
  if (!scene || canvas.selection === null) {
    box.textContent = "no selection";
    return;
  }
  const p = scene.polygons[canvas.selection];
  box.textContent = `${CLASS_NAMES[p.class]} - ${p.vertices.length} vertices` +
    (p.section !== undefined ? ` (section ${p.section})` : "");
}

async function loadFrame(frame: FrameInfo): Promise<void> {
  const scene = await api.framePolygons(frame.id);
  canvas.load(frame.id, scene);
  el<HTMLImageElement>("canvas-backdrop").src = frame.image_url;
  renderCanvas();
  renderInspector();
}

async function renderGallery(): Promise<void> {
  const frames = await api.listFrames();
  const gallery = el("gallery");
  gallery.innerHTML = "";
  for (const frame of frames) {
    const tile = document.createElement("div");
    tile.className = frame.keyframe ? "tile keyframe" : "tile";
    const img = document.createElement("img");
    img.src = frame.thumb_url;
    img.title = `${frame.id}${frame.keyframe ? " (keyframe)" : ""}`;
    tile.appendChild(img);
    tile.addEventListener("click", () => void loadFrame(frame));
    gallery.appendChild(tile);
  }
}

function renderResults(): void {
  const grid = el("results");
  grid.innerHTML = "";
  for (const row of searcher.grid()) {
    for (const entry of row) {
      const cell = document.createElement("div");
      cell.className = "cell";
      if (entry) {
        const img = document.createElement("img");
        img.src = entry.thumb_url;
        img.title = `${entry.frame.id} d=${entry.distance.toFixed(4)}`;
        cell.appendChild(img);
        const idx = searcher.results.indexOf(entry);
        cell.addEventListener("click", () => {
          searcher.selectResult(idx);
          renderTray();
        });
      }
      grid.appendChild(cell);
    }
  }
  el("rebuild-prompt").style.display = searcher.staleIndex ? "block" : "none";
}

function renderTray(): void {
  const tray = el("tray");
  tray.innerHTML = "";
  for (const entry of searcher.tray) {
    const img = document.createElement("img");
    img.src = entry.thumb_url;
    img.title = entry.frame.id;
    tray.appendChild(img);
  }
}

function renderPreview(doc: QuizDoc): void {
  const panel = el("preview");
  panel.innerHTML = "";
  for (const view of studentPreview("", doc)) {
    const card = document.createElement("div");
    card.className = "preview-card";
    const title = document.createElement("h4");
    title.textContent = `[${view.type}] ${view.prompt}`;
    card.appendChild(title);
    for (const url of view.imageUrls) {
      const img = document.createElement("img");
      img.src = url;
      card.appendChild(img);
    }
    for (const label of view.optionLabels) {
      const btn = document.createElement("button");
      btn.textContent = label;
      card.appendChild(btn);
    }
    panel.appendChild(card);
  }
}

function bindControls(): void {
  const gesture = (fn: () => void) => () => {
    fn();
    renderCanvas();
    renderInspector();
  };
  el("btn-left").onclick = gesture(() => canvas.applyGesture({ kind: "move", dx: -10, dy: 0 }));
  el("btn-right").onclick = gesture(() => canvas.applyGesture({ kind: "move", dx: 10, dy: 0 }));
  el("btn-up").onclick = gesture(() => canvas.applyGesture({ kind: "move", dx: 0, dy: -10 }));
  el("btn-down").onclick = gesture(() => canvas.applyGesture({ kind: "move", dx: 0, dy: 10 }));
  el("btn-grow").onclick = gesture(() => canvas.applyGesture({ kind: "resize", fx: 1.15 }));
  el("btn-shrink").onclick = gesture(() => canvas.applyGesture({ kind: "resize", fx: 1 / 1.15 }));
  el("btn-rot-left").onclick = gesture(() => canvas.applyGesture({ kind: "rotate", degrees: -15 }));
  el("btn-rot-right").onclick = gesture(() => canvas.applyGesture({ kind: "rotate", degrees: 15 }));
  el("btn-remove").onclick = gesture(() => canvas.applyGesture({ kind: "remove" }));
  el("btn-undo").onclick = gesture(() => void canvas.undo());
  el("btn-redo").onclick = gesture(() => void canvas.redo());

  el("btn-search").onclick = () => {
    void searcher
      .run()
      .then(renderResults)
      .catch(() => renderResults());
  };
  el("btn-rebuild").onclick = () => {
    void searcher.rebuildAndRetry().then(renderResults);
  };
}

async function boot(): Promise<void> {
  bindControls();
  await renderGallery();
}

if (typeof document !== "undefined") {
  void boot();
}

export { api, builder, canvas, renderPreview, searcher };
