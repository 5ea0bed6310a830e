/**
 * GAPF binary container: 17-byte little-endian header followed by
 * rows*cols float32 values, row-major.
 *
 *   bytes 0..3   magic "GAPF"
 *   bytes 4..7   u32 version = 1
 *   byte  8      u8 kind (0 frame features, 1 text embeddings, 2 checkpoint)
 *   bytes 9..12  u32 rows
 *   bytes 13..16 u32 cols
 *
 * Text-embedding files carry a sibling manifest at "<path>.json" with the
 * class names in row order.
 */

import { readFileSync, writeFileSync } from "node:fs";

export const MAGIC = "GAPF";
export const VERSION = 1;
export const KIND_FRAMES = 0;
export const KIND_TEXT = 1;
export const HEADER_BYTES = 17;

export interface GapfMatrix {
  kind: number;
  rows: number;
  cols: number;
  /** row-major values, rows*cols entries */
  data: Float32Array;
}

export class GapfFormatError extends Error {}

export function encodeGapf(matrix: GapfMatrix): Buffer {
  const { kind, rows, cols, data } = matrix;
  if (data.length !== rows * cols) {
    throw new GapfFormatError(`payload length ${data.length} != rows*cols ${rows * cols}`);
  }
  const buf = Buffer.alloc(HEADER_BYTES + data.length * 4);
  buf.write(MAGIC, 0, "ascii");
  buf.writeUInt32LE(VERSION, 4);
  buf.writeUInt8(kind, 8);
  buf.writeUInt32LE(rows, 9);
  buf.writeUInt32LE(cols, 13);
  for (let i = 0; i < data.length; i++) {
    buf.writeFloatLE(data[i], HEADER_BYTES + i * 4);
  }
  return buf;
}

export function decodeGapf(buf: Buffer): GapfMatrix {
  if (buf.length < HEADER_BYTES) {
    throw new GapfFormatError(`truncated header (${buf.length} bytes)`);
  }
  if (buf.toString("ascii", 0, 4) !== MAGIC) {
    throw new GapfFormatError(`bad magic ${JSON.stringify(buf.toString("ascii", 0, 4))}`);
  }
  const version = buf.readUInt32LE(4);
  if (version !== VERSION) {
    throw new GapfFormatError(`unsupported version ${version}`);
  }
  const kind = buf.readUInt8(8);
  const rows = buf.readUInt32LE(9);
  const cols = buf.readUInt32LE(13);
  const expected = HEADER_BYTES + rows * cols * 4;
  if (buf.length !== expected) {
    throw new GapfFormatError(`truncated payload (${buf.length} bytes, expected ${expected})`);
  }
  const data = new Float32Array(rows * cols);
  for (let i = 0; i < data.length; i++) {
    data[i] = buf.readFloatLE(HEADER_BYTES + i * 4);
  }
  return { kind, rows, cols, data };
}

export function writeGapfFile(path: string, matrix: GapfMatrix): void {
  writeFileSync(path, encodeGapf(matrix));
}

export function readGapfFile(path: string): GapfMatrix {
  return decodeGapf(readFileSync(path));
}

export interface TextManifest {
  classes: string[];
  prompts?: string[];
  template?: string;
}

export function writeTextManifest(gapfPath: string, manifest: TextManifest): void {
  writeFileSync(gapfPath + ".json", JSON.stringify(manifest, null, 2) + "\n");
}
