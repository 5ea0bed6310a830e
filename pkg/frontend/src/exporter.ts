/** Export jobs: frame features and text embeddings in the GAPF layout. */

import { writeFileSync } from "node:fs";
import { join } from "node:path";

import { Encoder } from "./encoder.js";
import { DecodeError, FrameSource, listSources, loadSource } from "./frames.js";
import { KIND_FRAMES, KIND_TEXT, writeGapfFile, writeTextManifest } from "./gapf.js";
import { assemblePrompt, validateTemplate } from "./prompt.js";

export interface FrameExportResult {
  exported: { videoId: string; frames: number; durationSeconds: number }[];
  skipped: { source: string; reason: string }[];
}

export async function exportFrameSource(
  source: FrameSource,
  encoder: Encoder,
  outDir: string,
): Promise<void> {
  const t = source.frames.length;
  const data = new Float32Array(t * encoder.dim);
  for (let i = 0; i < t; i++) {
    const vec = await encoder.encodeImage(source.frames[i]);
    data.set(vec, i * encoder.dim);
  }
  writeGapfFile(join(outDir, `${source.videoId}.gapf`), {
    kind: KIND_FRAMES,
    rows: t,
    cols: encoder.dim,
    data,
  });
}

export async function exportFrames(
  videosRoot: string,
  fps: number,
  outDir: string,
  encoder: Encoder,
  log: (message: string) => void = () => {},
): Promise<FrameExportResult> {
  if (fps <= 0) {
    throw new DecodeError(`sampling rate must be positive, got ${fps}`);
  }
  const result: FrameExportResult = { exported: [], skipped: [] };
  for (const path of listSources(videosRoot)) {
    let source: FrameSource;
    try {
      source = loadSource(path, fps);
    } catch (err) {
      const reason = err instanceof Error ? err.message : String(err);
      log(`skipping ${path}: ${reason}`);
      result.skipped.push({ source: path, reason });
      continue;
    }
    await exportFrameSource(source, encoder, outDir);
    result.exported.push({
      videoId: source.videoId,
      frames: source.frames.length,
      durationSeconds: source.durationSeconds,
    });
  }
  const manifest: Record<string, { frames: number; duration_seconds: number }> = {};
  for (const entry of result.exported) {
    manifest[entry.videoId] = { frames: entry.frames, duration_seconds: entry.durationSeconds };
  }
  writeFileSync(join(outDir, "frames_manifest.json"), JSON.stringify(manifest, null, 2) + "\n");
  return result;
}

export async function exportText(
  classNames: string[],
  template: string,
  outPath: string,
  encoder: Encoder,
): Promise<string[]> {
  validateTemplate(template);
  if (classNames.length === 0) {
    throw new Error("class list must be non-empty");
  }
  const prompts = classNames.map((name) => assemblePrompt(template, name));
  const data = new Float32Array(classNames.length * encoder.dim);
  for (let i = 0; i < prompts.length; i++) {
    const vec = await encoder.encodeText(prompts[i]);
    data.set(vec, i * encoder.dim);
  }
  writeGapfFile(outPath, {
    kind: KIND_TEXT,
    rows: classNames.length,
    cols: encoder.dim,
    data,
  });
  writeTextManifest(outPath, { classes: classNames, prompts, template });
  return prompts;
}
