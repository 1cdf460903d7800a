// Typed client for the authoring service. All engine logic (distances,
// grading, rasterization) stays on the server; this file only moves
// schema-validated JSON and image bytes.

import {
  FrameInfo,
  GradeResponse,
  PolygonSceneWire,
  QuizDoc,
  SearchResponse,
  frameInfoSchema,
  gradeResponseSchema,
  polygonSceneSchema,
  quizDocSchema,
  searchRequestSchema,
  searchResponseSchema,
} from "./schemas.js";

export class ApiError extends Error {
  constructor(
    public status: number,
    public detail: string,
  ) {
    super(`HTTP ${status}: ${detail}`);
  }
}

export class StaleIndexError extends ApiError {
  constructor(detail: string) {
    super(409, detail);
  }
}

async function raiseFor(resp: Response): Promise<never> {
  let detail = resp.statusText;
  try {
    const body = (await resp.json()) as { detail?: string };
    if (body.detail) detail = body.detail;
  } catch {
    // non-JSON error body; keep the status text
  }
  if (resp.status === 409) throw new StaleIndexError(detail);
  throw new ApiError(resp.status, detail);
}

export class ApiClient {
  constructor(public base: string) {}

  private url(path: string): string {
    return `${this.base}${path}`;
  }

  private async getJson(path: string): Promise<unknown> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) await raiseFor(resp);
    return resp.json();
  }

  private async sendJson(
    method: string,
    path: string,
    body: unknown,
  ): Promise<unknown> {
    const resp = await fetch(this.url(path), {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    if (!resp.ok) await raiseFor(resp);
    if (resp.status === 204) return null;
    return resp.json();
  }

  async listFrames(): Promise<FrameInfo[]> {
    const data = await this.getJson("/frames");
    return frameInfoSchema.array().parse(data);
  }

  async listKeyframes(): Promise<FrameInfo[]> {
    const data = await this.getJson("/keyframes");
    return frameInfoSchema.array().parse(data);
  }

  async framePolygons(frameId: string): Promise<PolygonSceneWire> {
    const data = await this.getJson(`/frames/${frameId}/polygons`);
    return polygonSceneSchema.parse(data);
  }

  async frameImage(frameId: string): Promise<Uint8Array> {
    return this.bytes(`/frames/${frameId}/image`);
  }

  async highlight(
    frameId: string,
    section: number,
    style: "fill" | "outline" | "arrow" = "fill",
  ): Promise<Uint8Array> {
    return this.bytes(
      `/frames/${frameId}/highlight?section=${section}&style=${style}`,
    );
  }

  async bytes(path: string): Promise<Uint8Array> {
    const resp = await fetch(this.url(path));
    if (!resp.ok) await raiseFor(resp);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async search(
    scene: PolygonSceneWire,
    k = 9,
    minGapMs = 2000,
  ): Promise<SearchResponse> {
    const body = searchRequestSchema.parse({
      polygons: scene,
      k,
      min_gap_ms: minGapMs,
    });
    const data = await this.sendJson("POST", "/search", body);
    return searchResponseSchema.parse(data);
  }

  async rebuildIndex(): Promise<void> {
    await this.sendJson("POST", "/index/rebuild", {});
  }

  async createQuiz(doc: QuizDoc): Promise<QuizDoc> {
    const body = quizDocSchema.parse(doc);
    return quizDocSchema.parse(await this.sendJson("POST", "/quizzes", body));
  }

  async updateQuiz(doc: QuizDoc): Promise<QuizDoc> {
    const body = quizDocSchema.parse(doc);
    return quizDocSchema.parse(
      await this.sendJson("PUT", `/quizzes/${doc.id}`, body),
    );
  }

  async getQuiz(quizId: string): Promise<QuizDoc> {
    return quizDocSchema.parse(await this.getJson(`/quizzes/${quizId}`));
  }

  async deleteQuiz(quizId: string): Promise<void> {
    const resp = await fetch(this.url(`/quizzes/${quizId}`), { method: "DELETE" });
    if (!resp.ok && resp.status !== 204) await raiseFor(resp);
  }

  async grade(
    quizId: string,
    question: number,
    answer: Record<string, unknown>,
  ): Promise<GradeResponse> {
    const data = await this.sendJson("POST", `/quizzes/${quizId}/grade`, {
      question,
      answer,
    });
    return gradeResponseSchema.parse(data);
  }

  async inpaintSection(
    frameId: string,
    section: number,
  ): Promise<{ asset: string; url: string }> {
    return (await this.sendJson("POST", "/inpaint", {
      frame: frameId,
      section,
    })) as { asset: string; url: string };
  }
}
