// Wire-format schemas for everything the UI sends or receives. Every outgoing
// payload is parsed through these before it leaves the client, so the server
// never sees a malformed body from us.

import { z } from "zod";

export const QUIZ_SCHEMA_VERSION = "surgquiz/1";

// Paint order of editable classes, bottom to top (class ids).
export const Z_ORDER = [2, 8, 4, 3, 6, 5] as const;
export const CLASS_NAMES: Record<number, string> = {
  0: "Background",
  1: "Abdominal Wall",
  2: "Liver",
  3: "Gastrointestinal Tract",
  4: "Fat",
  5: "Tool",
  6: "Blood",
  7: "Connected Tissue",
  8: "Gallbladder",
};

export const pointSchema = z.tuple([z.number().finite(), z.number().finite()]);

export const polygonSchema = z.object({
  class: z.number().int().min(0).max(8),
  vertices: z.array(pointSchema).min(3),
  section: z.number().int().nonnegative().optional(),
});

export const polygonSceneSchema = z.object({
  canvas: z.object({
    width: z.number().int().positive(),
    height: z.number().int().positive(),
  }),
  polygons: z.array(polygonSchema),
});

export const searchRequestSchema = z.object({
  polygons: polygonSceneSchema,
  k: z.number().int().min(1).max(100),
  min_gap_ms: z.number().int().nonnegative(),
});

export const frameInfoSchema = z.object({
  id: z.string(),
  video: z.string(),
  index: z.number().int().nonnegative(),
  timestamp_ms: z.number().int().nonnegative(),
  keyframe: z.boolean(),
  image_url: z.string(),
  thumb_url: z.string(),
  polygons_url: z.string(),
});

export const searchResponseSchema = z.object({
  query_grid: z.tuple([z.number(), z.number()]),
  results: z.array(
    z.object({
      frame: z.object({
        id: z.string(),
        video: z.string(),
        index: z.number().int(),
        timestamp_ms: z.number().int(),
      }),
      distance: z.number().nonnegative(),
      thumb_url: z.string(),
    }),
  ),
});

// --- quiz documents ---------------------------------------------------------

export const feedbackSchema = z
  .object({
    frame: z.string(),
    text: z.string().min(1),
    style: z.enum(["fill", "outline", "arrow"]),
    section: z.number().int().nonnegative().optional(),
    ring: z.array(pointSchema).min(3).optional(),
  })
  .refine((fb) => (fb.section === undefined) !== (fb.ring === undefined), {
    message: "anchor must be exactly one of section or ring",
  });

export const mcqQuestionSchema = z.object({
  type: z.literal("mcq"),
  stem: z.string().min(1),
  stem_images: z.array(z.string()),
  options: z
    .array(
      z.object({
        text: z.string(),
        image: z.string().nullable(),
        feedback: z.array(feedbackSchema),
      }),
    )
    .min(2)
    .max(6),
  correct: z.array(z.number().int().nonnegative()).min(1),
});

export const extractQuestionSchema = z.object({
  type: z.literal("extract"),
  frame: z.string(),
  removed_section: z.number().int().nonnegative(),
  inpainted_asset: z.string().min(1),
  prompt: z.string().min(1),
  accepted_tools: z.array(z.number().int().min(0).max(8)).min(1),
  placement_ring: z.array(pointSchema).min(3),
});

export const pathQuestionSchema = z.object({
  type: z.literal("path"),
  frame: z.string(),
  target_section: z.number().int().nonnegative(),
  prompt: z.string().min(1),
  author_path: z.array(pointSchema).min(2),
  tolerance: z.number().positive(),
});

export const questionSchema = z.discriminatedUnion("type", [
  mcqQuestionSchema,
  extractQuestionSchema,
  pathQuestionSchema,
]);

export const quizDocSchema = z.object({
  schema: z.literal(QUIZ_SCHEMA_VERSION),
  id: z.string().min(1),
  title: z.string().min(1),
  author: z.string(),
  created_ms: z.number().int().nonnegative(),
  modified_ms: z.number().int().nonnegative(),
  source_videos: z.array(z.string()),
  questions: z.array(questionSchema).min(1),
});

export const gradeResponseSchema = z.discriminatedUnion("type", [
  z.object({
    type: z.literal("mcq"),
    correct: z.boolean(),
    feedback: z.array(feedbackSchema),
  }),
  z.object({
    type: z.literal("path"),
    score: z.number().min(0).max(1),
    pass: z.boolean(),
  }),
  z.object({
    type: z.literal("extract"),
    correct: z.boolean(),
    tool_ok: z.boolean(),
    placement_ok: z.boolean(),
  }),
]);

export type Point = z.infer<typeof pointSchema>;
export type PolygonWire = z.infer<typeof polygonSchema>;
export type PolygonSceneWire = z.infer<typeof polygonSceneSchema>;
export type FrameInfo = z.infer<typeof frameInfoSchema>;
export type SearchResponse = z.infer<typeof searchResponseSchema>;
export type SearchResultEntry = SearchResponse["results"][number];
export type FeedbackWire = z.infer<typeof feedbackSchema>;
export type McqQuestionWire = z.infer<typeof mcqQuestionSchema>;
export type ExtractQuestionWire = z.infer<typeof extractQuestionSchema>;
export type PathQuestionWire = z.infer<typeof pathQuestionSchema>;
export type QuestionWire = z.infer<typeof questionSchema>;
export type QuizDoc = z.infer<typeof quizDocSchema>;
export type GradeResponse = z.infer<typeof gradeResponseSchema>;
