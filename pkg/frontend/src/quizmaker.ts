// Quiz authoring: the three question editors, hover-to-highlight feedback
// anchoring, student preview models, and persistence through the quiz CRUD
// API. Grading always goes through the server.

import { ApiClient } from "./api.js";
import {
  ExtractQuestionWire,
  FeedbackWire,
  McqQuestionWire,
  PathQuestionWire,
  Point,
  PolygonSceneWire,
  PolygonWire,
  QUIZ_SCHEMA_VERSION,
  QuestionWire,
  QuizDoc,
  quizDocSchema,
} from "./schemas.js";
import { boundingBox } from "./transforms.js";

// Editable templates seeding the feedback editor.
export const FEEDBACK_STARTERS = [
  "Notice how the {component} ...",
  "This is a good example of ... because the {component} ...",
  "Before dissecting here, check that the {component} ...",
];

export interface HoverHighlight {
  frameId: string;
  section: number;
  style: "fill" | "outline" | "arrow";
  overlayPng: Uint8Array;
}

export class QuizBuilder {
  questions: QuestionWire[] = [];
  hover: HoverHighlight | null = null;

  constructor(private api: ApiClient) {}

  // Hovering a segmented component fetches that section's overlay from the
  // server; the returned bytes are exactly what the UI composites.
  async hoverComponent(
    frameId: string,
    polygon: PolygonWire,
    style: "fill" | "outline" | "arrow" = "fill",
  ): Promise<HoverHighlight> {
    if (polygon.section === undefined) {
      throw new Error("polygon carries no section anchor");
    }
    const overlayPng = await this.api.highlight(frameId, polygon.section, style);
    this.hover = { frameId, section: polygon.section, style, overlayPng };
    return this.hover;
  }

  feedbackFromHover(text: string): FeedbackWire {
    if (!this.hover) throw new Error("hover a component first");
    return {
      frame: this.hover.frameId,
      text,
      style: this.hover.style,
      section: this.hover.section,
    };
  }

  addMcq(args: {
    stem: string;
    stemImages?: string[];
    options: { text: string; image?: string | null; feedback?: FeedbackWire[] }[];
    correct: number[];
  }): McqQuestionWire {
    const question: McqQuestionWire = {
      type: "mcq",
      stem: args.stem,
      stem_images: args.stemImages ?? [],
      options: args.options.map((o) => ({
        text: o.text,
        image: o.image ?? null,
        feedback: o.feedback ?? [],
      })),
      correct: [...args.correct].sort((a, b) => a - b),
    };
    this.questions.push(question);
    return question;
  }

  // Extract-a-component: remove the chosen section via the server-side
  // inpaint, keep the returned asset as the question image.
  async addExtract(args: {
    frameId: string;
    polygon: PolygonWire;
    prompt: string;
    acceptedTools: number[];
  }): Promise<ExtractQuestionWire> {
    if (args.polygon.section === undefined) {
      throw new Error("polygon carries no section anchor");
    }
    const inpaint = await this.api.inpaintSection(args.frameId, args.polygon.section);
    const box = boundingBox(args.polygon.vertices);
    const ring: Point[] = [
      [box.x0, box.y0],
      [box.x1, box.y0],
      [box.x1, box.y1],
      [box.x0, box.y1],
    ];
    const question: ExtractQuestionWire = {
      type: "extract",
      frame: args.frameId,
      removed_section: args.polygon.section,
      inpainted_asset: inpaint.asset,
      prompt: args.prompt,
      accepted_tools: [...args.acceptedTools].sort((a, b) => a - b),
      placement_ring: ring,
    };
    this.questions.push(question);
    return question;
  }

  addPath(args: {
    frameId: string;
    targetSection: number;
    prompt: string;
    points: Point[];
    tolerance?: number;
  }): PathQuestionWire {
    const question: PathQuestionWire = {
      type: "path",
      frame: args.frameId,
      target_section: args.targetSection,
      prompt: args.prompt,
      author_path: args.points,
      tolerance: args.tolerance ?? 30,
    };
    this.questions.push(question);
    return question;
  }

  assemble(id: string, title: string, author = "", sourceVideos: string[] = []): QuizDoc {
    return quizDocSchema.parse({
      schema: QUIZ_SCHEMA_VERSION,
      id,
      title,
      author,
      created_ms: 0,
      modified_ms: 0,
      source_videos: sourceVideos,
      questions: this.questions,
    });
  }

  async save(doc: QuizDoc): Promise<QuizDoc> {
    return this.api.createQuiz(doc);
  }
}

// --- student preview ---------------------------------------------------------

export interface PreviewView {
  type: QuestionWire["type"];
  prompt: string;
  imageUrls: string[];
  optionLabels: string[];
  // answer-key material that must stay hidden until the student answers
  hiddenFromStudent: Record<string, unknown>;
  targetTint?: { frameId: string; section: number };
}

export function studentPreview(base: string, doc: QuizDoc): PreviewView[] {
  return doc.questions.map((q): PreviewView => {
    if (q.type === "mcq") {
      return {
        type: "mcq",
        prompt: q.stem,
        imageUrls: q.stem_images.map((a) => `${base}/assets/${a}`),
        optionLabels: q.options.map((o) => o.text),
        hiddenFromStudent: { correct: q.correct, feedback: "per-option" },
      };
    }
    if (q.type === "extract") {
      return {
        type: "extract",
        prompt: q.prompt,
        imageUrls: [`${base}/assets/${q.inpainted_asset}`],
        optionLabels: [],
        hiddenFromStudent: {
          accepted_tools: q.accepted_tools,
          placement_ring: q.placement_ring,
        },
      };
    }
    return {
      type: "path",
      prompt: q.prompt,
      imageUrls: [`${base}/frames/${q.frame}/image`],
      optionLabels: [],
      hiddenFromStudent: { author_path: q.author_path, tolerance: q.tolerance },
      targetTint: { frameId: q.frame, section: q.target_section },
    };
  });
}
