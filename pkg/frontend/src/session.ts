/**
 * Editor session state: the editable mask, brush, reference selection,
 * bounded undo stack and the last synthesis result. All updates return new
 * session objects; bitmaps are copied on write.
 */

import { Brush, MaskBitmap, StrokePoint, cloneMask, masksEqual, paintStroke } from "./mask.js";

export const UNDO_LIMIT = 64;

export interface ReferenceSelection {
  id: string;
  imageBase64: string;
  maskBase64: string;
}

export interface SynthesisResult {
  imageBase64: string;
  seed: number;
  latencyMs: number;
}

export interface EditorSession {
  sourceImageBase64: string;
  sourceMaskBase64: string;
  /** the mask as loaded; edits are detected against this */
  originalMask: MaskBitmap;
  mask: MaskBitmap;
  reference: ReferenceSelection | null;
  brush: Brush;
  undoStack: MaskBitmap[];
  lastResult: SynthesisResult | null;
  inFlight: boolean;
}

export function createSession(sourceImageBase64: string, sourceMaskBase64: string,
                              mask: MaskBitmap): EditorSession {
  return {
    sourceImageBase64,
    sourceMaskBase64,
    originalMask: cloneMask(mask),
    mask: cloneMask(mask),
    reference: null,
    brush: { mode: "paint", radius: 4 },
    undoStack: [],
    lastResult: null,
    inFlight: false,
  };
}

/** One undo entry per stroke; the stack is bounded at UNDO_LIMIT. */
export function applyStroke(session: EditorSession, path: StrokePoint[]): EditorSession {
  const undoStack = [...session.undoStack, cloneMask(session.mask)];
  if (undoStack.length > UNDO_LIMIT) undoStack.shift();
  return { ...session, mask: paintStroke(session.mask, path, session.brush), undoStack };
}

export function undo(session: EditorSession): EditorSession {
  if (session.undoStack.length === 0) return session;
  const undoStack = [...session.undoStack];
  const mask = undoStack.pop()!;
  return { ...session, mask, undoStack };
}

export function setBrush(session: EditorSession, brush: Partial<Brush>): EditorSession {
  return { ...session, brush: { ...session.brush, ...brush } };
}

export function setReference(session: EditorSession,
                             reference: ReferenceSelection | null): EditorSession {
  return { ...session, reference };
}

export function maskEdited(session: EditorSession): boolean {
  return !masksEqual(session.mask, session.originalMask);
}

/**
 * Request routing: an edited mask always means an edit request; an untouched
 * mask means transfer when a reference is selected, else reconstruct.
 */
export function taskForSession(session: EditorSession): "reconstruct" | "transfer" | "edit" {
  if (maskEdited(session)) return "edit";
  return session.reference ? "transfer" : "reconstruct";
}

export function storeResult(session: EditorSession, result: SynthesisResult): EditorSession {
  return { ...session, lastResult: result, inFlight: false };
}
