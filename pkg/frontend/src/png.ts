/**
 * Minimal PNG codec for binary masks and grayscale/RGB test images.
 *
 * Masks ride the wire as 8-bit grayscale PNGs (0 or 255); encode -> decode is
 * lossless, which the submit round-trip test asserts bit-for-bit. Node-only
 * (zlib); the browser UI encodes through a canvas instead.
 */

import { deflateSync, inflateSync } from "node:zlib";

import { MaskBitmap } from "./mask.js";

const PNG_SIGNATURE = Uint8Array.from([0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a]);

const CRC_TABLE = (() => {
  const table = new Uint32Array(256);
  for (let n = 0; n < 256; n++) {
    let c = n;
    for (let k = 0; k < 8; k++) {
      c = c & 1 ? 0xedb88320 ^ (c >>> 1) : c >>> 1;
    }
    table[n] = c >>> 0;
  }
  return table;
})();

function crc32(bytes: Uint8Array): number {
  let crc = 0xffffffff;
  for (let i = 0; i < bytes.length; i++) {
    crc = CRC_TABLE[(crc ^ bytes[i]) & 0xff] ^ (crc >>> 8);
  }
  return (crc ^ 0xffffffff) >>> 0;
}

function be32(value: number): Uint8Array {
  return Uint8Array.from([(value >>> 24) & 0xff, (value >>> 16) & 0xff,
                          (value >>> 8) & 0xff, value & 0xff]);
}

function readBe32(bytes: Uint8Array, offset: number): number {
  return ((bytes[offset] << 24) | (bytes[offset + 1] << 16)
          | (bytes[offset + 2] << 8) | bytes[offset + 3]) >>> 0;
}

function chunk(type: string, body: Uint8Array): Uint8Array {
  const typeBytes = new TextEncoder().encode(type);
  const payload = new Uint8Array(typeBytes.length + body.length);
  payload.set(typeBytes, 0);
  payload.set(body, typeBytes.length);
  const out = new Uint8Array(4 + payload.length + 4);
  out.set(be32(body.length), 0);
  out.set(payload, 4);
  out.set(be32(crc32(payload)), 4 + payload.length);
  return out;
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let offset = 0;
  for (const part of parts) {
    out.set(part, offset);
    offset += part.length;
  }
  return out;
}

export interface DecodedPng {
  width: number;
  height: number;
  channels: number;
  /** unfiltered samples, row-major, channels interleaved */
  pixels: Uint8Array;
}

/** 8-bit image -> PNG bytes; channels 1 (grayscale) or 3 (RGB). */
export function encodePng(width: number, height: number, channels: 1 | 3,
                          pixels: Uint8Array): Uint8Array {
  if (pixels.length !== width * height * channels) {
    throw new Error(`pixel buffer has ${pixels.length} bytes, expected `
                    + `${width * height * channels}`);
  }
  const colorType = channels === 1 ? 0 : 2;
  const ihdr = new Uint8Array(13);
  ihdr.set(be32(width), 0);
  ihdr.set(be32(height), 4);
  ihdr[8] = 8;          // bit depth
  ihdr[9] = colorType;
  const stride = width * channels;
  const raw = new Uint8Array((stride + 1) * height);
  for (let y = 0; y < height; y++) {
    raw[y * (stride + 1)] = 0; // filter type none
    raw.set(pixels.subarray(y * stride, (y + 1) * stride), y * (stride + 1) + 1);
  }
  const idat = new Uint8Array(deflateSync(raw));
  return concat([PNG_SIGNATURE, chunk("IHDR", ihdr), chunk("IDAT", idat),
                 chunk("IEND", new Uint8Array(0))]);
}

function unfilter(raw: Uint8Array, width: number, height: number,
                  channels: number): Uint8Array {
  const stride = width * channels;
  const out = new Uint8Array(stride * height);
  const bpp = channels;
  for (let y = 0; y < height; y++) {
    const filter = raw[y * (stride + 1)];
    const row = raw.subarray(y * (stride + 1) + 1, (y + 1) * (stride + 1));
    const prev = y > 0 ? out.subarray((y - 1) * stride, y * stride) : null;
    const line = out.subarray(y * stride, (y + 1) * stride);
    for (let x = 0; x < stride; x++) {
      const a = x >= bpp ? line[x - bpp] : 0;
      const b = prev ? prev[x] : 0;
      const c = prev && x >= bpp ? prev[x - bpp] : 0;
      let value: number;
      switch (filter) {
        case 0: value = row[x]; break;
        case 1: value = row[x] + a; break;
        case 2: value = row[x] + b; break;
        case 3: value = row[x] + Math.floor((a + b) / 2); break;
        case 4: {
          const p = a + b - c;
          const pa = Math.abs(p - a);
          const pb = Math.abs(p - b);
          const pc = Math.abs(p - c);
          value = row[x] + (pa <= pb && pa <= pc ? a : pb <= pc ? b : c);
          break;
        }
        default:
          throw new Error(`unsupported PNG filter type ${filter}`);
      }
      line[x] = value & 0xff;
    }
  }
  return out;
}

/** Decode an 8-bit non-interlaced grayscale/RGB/RGBA PNG. */
export function decodePng(bytes: Uint8Array): DecodedPng {
  for (let i = 0; i < PNG_SIGNATURE.length; i++) {
    if (bytes[i] !== PNG_SIGNATURE[i]) throw new Error("not a PNG file");
  }
  let offset = PNG_SIGNATURE.length;
  let width = 0;
  let height = 0;
  let channels = 0;
  const idatParts: Uint8Array[] = [];
  while (offset < bytes.length) {
    const length = readBe32(bytes, offset);
    const type = new TextDecoder().decode(bytes.subarray(offset + 4, offset + 8));
    const body = bytes.subarray(offset + 8, offset + 8 + length);
    if (type === "IHDR") {
      width = readBe32(body, 0);
      height = readBe32(body, 4);
      const bitDepth = body[8];
      const colorType = body[9];
      if (bitDepth !== 8) throw new Error(`unsupported bit depth ${bitDepth}`);
      if (body[12] !== 0) throw new Error("interlaced PNGs unsupported");
      const channelMap: Record<number, number> = { 0: 1, 2: 3, 6: 4 };
      if (!(colorType in channelMap)) {
        throw new Error(`unsupported color type ${colorType}`);
      }
      channels = channelMap[colorType];
    } else if (type === "IDAT") {
      idatParts.push(body);
    } else if (type === "IEND") {
      break;
    }
    offset += 8 + length + 4;
  }
  if (!width || !height || !channels) throw new Error("missing IHDR");
  const raw = new Uint8Array(inflateSync(concat(idatParts)));
  return { width, height, channels, pixels: unfilter(raw, width, height, channels) };
}

/** Binary mask -> grayscale PNG: 1 -> 255, 0 -> 0. */
export function encodeMaskPng(mask: MaskBitmap): Uint8Array {
  const gray = new Uint8Array(mask.data.length);
  for (let i = 0; i < mask.data.length; i++) gray[i] = mask.data[i] ? 255 : 0;
  return encodePng(mask.width, mask.height, 1, gray);
}

/** Grayscale (or first-channel) PNG -> binary mask at threshold 128. */
export function decodeMaskPng(bytes: Uint8Array): MaskBitmap {
  const image = decodePng(bytes);
  const data = new Uint8Array(image.width * image.height);
  for (let i = 0; i < data.length; i++) {
    data[i] = image.pixels[i * image.channels] >= 128 ? 1 : 0;
  }
  return { width: image.width, height: image.height, data };
}

export function bytesToBase64(bytes: Uint8Array): string {
  if (typeof Buffer !== "undefined") {
    return Buffer.from(bytes).toString("base64");
  }
  let binary = "";
  for (let i = 0; i < bytes.length; i++) binary += String.fromCharCode(bytes[i]);
  return btoa(binary);
}

export function base64ToBytes(payload: string): Uint8Array {
  if (typeof Buffer !== "undefined") {
    return new Uint8Array(Buffer.from(payload, "base64"));
  }
  const binary = atob(payload);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) bytes[i] = binary.charCodeAt(i);
  return bytes;
}
