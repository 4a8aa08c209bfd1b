/**
 * Binary mask bitmaps and brush-stroke rasterization.
 *
 * Masks are edited at the native service resolution (128x128) and zoomed with
 * nearest-neighbor on screen, so painted pixels map 1:1 onto request pixels.
 */

export interface MaskBitmap {
  readonly width: number;
  readonly height: number;
  /** one byte per pixel, strictly 0 or 1 */
  readonly data: Uint8Array;
}

export interface Brush {
  mode: "paint" | "erase";
  radius: number;
}

export interface StrokePoint {
  x: number;
  y: number;
}

export const MASK_SIZE = 128;

export function createMask(width: number, height: number, fill: 0 | 1 = 0): MaskBitmap {
  const data = new Uint8Array(width * height);
  if (fill === 1) data.fill(1);
  return { width, height, data };
}

export function cloneMask(mask: MaskBitmap): MaskBitmap {
  return { width: mask.width, height: mask.height, data: new Uint8Array(mask.data) };
}

export function masksEqual(a: MaskBitmap, b: MaskBitmap): boolean {
  if (a.width !== b.width || a.height !== b.height) return false;
  for (let i = 0; i < a.data.length; i++) {
    if (a.data[i] !== b.data[i]) return false;
  }
  return true;
}

export function hairCoverage(mask: MaskBitmap): number {
  let count = 0;
  for (let i = 0; i < mask.data.length; i++) count += mask.data[i];
  return count / mask.data.length;
}

function stampDisc(data: Uint8Array, width: number, height: number,
                   cx: number, cy: number, radius: number, value: 0 | 1): void {
  const r2 = radius * radius;
  const x0 = Math.max(0, Math.floor(cx - radius));
  const x1 = Math.min(width - 1, Math.ceil(cx + radius));
  const y0 = Math.max(0, Math.floor(cy - radius));
  const y1 = Math.min(height - 1, Math.ceil(cy + radius));
  for (let y = y0; y <= y1; y++) {
    for (let x = x0; x <= x1; x++) {
      const dx = x - cx;
      const dy = y - cy;
      if (dx * dx + dy * dy <= r2) data[y * width + x] = value;
    }
  }
}

/**
 * Stamp the brush disc at every point of the path and along the segments
 * between consecutive points. Returns a new bitmap; the input is untouched.
 */
export function paintStroke(mask: MaskBitmap, path: StrokePoint[], brush: Brush): MaskBitmap {
  const out = cloneMask(mask);
  if (path.length === 0) return out;
  const value: 0 | 1 = brush.mode === "paint" ? 1 : 0;
  let prev = path[0];
  stampDisc(out.data, out.width, out.height, prev.x, prev.y, brush.radius, value);
  for (let i = 1; i < path.length; i++) {
    const next = path[i];
    const steps = Math.max(1, Math.ceil(Math.hypot(next.x - prev.x, next.y - prev.y)));
    for (let s = 1; s <= steps; s++) {
      const t = s / steps;
      stampDisc(out.data, out.width, out.height,
                prev.x + (next.x - prev.x) * t, prev.y + (next.y - prev.y) * t,
                brush.radius, value);
    }
    prev = next;
  }
  return out;
}
