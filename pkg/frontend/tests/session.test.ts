import { describe, expect, it } from "vitest";

import { createMask, masksEqual, paintStroke } from "../src/mask.js";
import {
  UNDO_LIMIT, applyStroke, createSession, maskEdited, setBrush, setReference,
  taskForSession, undo,
} from "../src/session.js";

function freshSession() {
  let mask = createMask(128, 128);
  mask = paintStroke(mask, [{ x: 64, y: 40 }], { mode: "paint", radius: 20 });
  return createSession("src-image-b64", "src-mask-b64", mask);
}

const reference = { id: "ref1", imageBase64: "ri", maskBase64: "rm" };

describe("task routing", () => {
  it("untouched mask and no reference routes to reconstruct", () => {
    expect(taskForSession(freshSession())).toBe("reconstruct");
  });

  it("untouched mask with reference routes to transfer", () => {
    const session = setReference(freshSession(), reference);
    expect(taskForSession(session)).toBe("transfer");
  });

  it("edited mask routes to edit, with or without reference", () => {
    let session = applyStroke(freshSession(), [{ x: 10, y: 10 }]);
    expect(taskForSession(session)).toBe("edit");
    session = setReference(session, reference);
    expect(taskForSession(session)).toBe("edit");
  });

  it("a stroke that changes nothing still counts as untouched", () => {
    const session = freshSession();
    // paint inside the already-painted disc
    const painted = applyStroke(setBrush(session, { radius: 2 }),
                                [{ x: 64, y: 40 }]);
    expect(maskEdited(painted)).toBe(false);
    expect(taskForSession(painted)).toBe("reconstruct");
  });
});

describe("undo stack", () => {
  it("paint then undo restores the pre-stroke bitmap", () => {
    const session = freshSession();
    const before = session.mask;
    const painted = applyStroke(session, [{ x: 100, y: 100 }]);
    expect(masksEqual(painted.mask, before)).toBe(false);
    const restored = undo(painted);
    expect(masksEqual(restored.mask, before)).toBe(true);
  });

  it("one undo entry per stroke", () => {
    let session = freshSession();
    session = applyStroke(session, [{ x: 1, y: 1 }, { x: 5, y: 5 }, { x: 9, y: 9 }]);
    expect(session.undoStack.length).toBe(1);
    session = applyStroke(session, [{ x: 20, y: 20 }]);
    expect(session.undoStack.length).toBe(2);
  });

  it("stack is bounded at UNDO_LIMIT", () => {
    let session = freshSession();
    for (let i = 0; i < UNDO_LIMIT + 10; i++) {
      session = applyStroke(session, [{ x: i % 128, y: 64 }]);
    }
    expect(session.undoStack.length).toBe(UNDO_LIMIT);
  });

  it("undo on empty stack is a no-op", () => {
    const session = freshSession();
    expect(undo(session)).toBe(session);
  });
});
