// State of the search-by-mask canvas: the loaded polygon scene, the current
// selection, and an undo/redo history of edits. Nothing here talks to the
// server; the scene only leaves this object when a search is requested.

import { PolygonSceneWire, polygonSceneSchema } from "./schemas.js";
import {
  distinctVertexCount,
  moveVertex,
  rotateRing,
  scaleRing,
  translateRing,
} from "./transforms.js";

export type Gesture =
  | { kind: "move"; dx: number; dy: number }
  | { kind: "resize"; fx: number; fy?: number }
  | { kind: "rotate"; degrees: number }
  | { kind: "drag-vertex"; index: number; x: number; y: number }
  | { kind: "remove" };

function snapshot(scene: PolygonSceneWire): string {
  return JSON.stringify(scene);
}

export class CanvasState {
  scene: PolygonSceneWire | null = null;
  frameId: string | null = null;
  selection: number | null = null;
  dirty = false;

  private undoStack: string[] = [];
  private redoStack: string[] = [];

  load(frameId: string, scene: PolygonSceneWire): void {
    this.scene = polygonSceneSchema.parse(scene);
    this.frameId = frameId;
    this.selection = this.scene.polygons.length ? 0 : null;
    this.undoStack = [];
    this.redoStack = [];
    this.dirty = false;
  }

  select(index: number): void {
    if (!this.scene || index < 0 || index >= this.scene.polygons.length) {
      throw new Error(`no polygon ${index} to select`);
    }
    this.selection = index;
  }

  applyGesture(gesture: Gesture): void {
    if (!this.scene || this.selection === null) {
      throw new Error("select a polygon first");
    }
    this.undoStack.push(snapshot(this.scene));
    this.redoStack = [];
    const polygons = this.scene.polygons.map((p) => ({
      ...p,
      vertices: p.vertices.map((v) => [...v] as [number, number]),
    }));
    const target = polygons[this.selection];
    switch (gesture.kind) {
      case "move":
        target.vertices = translateRing(target.vertices, gesture.dx, gesture.dy);
        break;
      case "resize":
        target.vertices = scaleRing(target.vertices, gesture.fx, gesture.fy ?? gesture.fx);
        break;
      case "rotate":
        target.vertices = rotateRing(target.vertices, gesture.degrees);
        break;
      case "drag-vertex":
        target.vertices = moveVertex(target.vertices, gesture.index, gesture.x, gesture.y);
        break;
      case "remove": {
        // dragging a component off the scene: push it past the right edge
        // while staying inside the half-canvas margin the server accepts
        const w = this.scene.canvas.width;
        const xs = target.vertices.map((v) => v[0]);
        const x0 = Math.min(...xs);
        const x1 = Math.max(...xs);
        const dx = Math.min(w - x0 + 1, 1.5 * w - x1 - 1);
        target.vertices = translateRing(target.vertices, dx, 0);
        break;
      }
    }
    this.scene = { ...this.scene, polygons };
    this.dirty = true;
  }

  undo(): boolean {
    if (!this.scene || this.undoStack.length === 0) return false;
    this.redoStack.push(snapshot(this.scene));
    this.scene = JSON.parse(this.undoStack.pop()!) as PolygonSceneWire;
    this.dirty = this.undoStack.length > 0;
    return true;
  }

  redo(): boolean {
    if (!this.scene || this.redoStack.length === 0) return false;
    this.undoStack.push(snapshot(this.scene));
    this.scene = JSON.parse(this.redoStack.pop()!) as PolygonSceneWire;
    this.dirty = true;
    return true;
  }

  // Degenerate polygons (fewer than 3 distinct vertices, or dragged past the
  // half-canvas margin) are flagged and block submission.
  degenerateIndices(): number[] {
    if (!this.scene) return [];
    const { width, height } = this.scene.canvas;
    const out: number[] = [];
    this.scene.polygons.forEach((p, i) => {
      const collapsed = distinctVertexCount(p.vertices) < 3;
      const outOfMargin = p.vertices.some(
        ([x, y]) =>
          x < -0.5 * width || x > 1.5 * width || y < -0.5 * height || y > 1.5 * height,
      );
      if (collapsed || outOfMargin) out.push(i);
    });
    return out;
  }

  canSubmit(): boolean {
    return this.scene !== null && this.degenerateIndices().length === 0;
  }

  toWire(): PolygonSceneWire {
    if (!this.scene) throw new Error("no scene loaded");
    const bad = this.degenerateIndices();
    if (bad.length) {
      throw new Error(`degenerate polygon(s) ${bad.join(", ")} block submission`);
    }
    return polygonSceneSchema.parse(this.scene);
  }
}
