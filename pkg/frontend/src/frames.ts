/**
 * Frame acquisition. Two source layouts:
 *
 *  - a directory of frame images (sorted by filename, assumed captured at
 *    the configured sampling rate), or
 *  - a video file, decoded by sampling frames at the configured rate with
 *    ffmpeg when it is on PATH.
 *
 * An undecodable source is reported and skipped, never fatal for the batch.
 */

import { spawnSync } from "node:child_process";
import { mkdtempSync, readdirSync, readFileSync, rmSync, statSync } from "node:fs";
import { tmpdir } from "node:os";
import { basename, extname, join } from "node:path";

const FRAME_EXTENSIONS = new Set([".png", ".jpg", ".jpeg", ".bmp", ".webp"]);
const VIDEO_EXTENSIONS = new Set([".mp4", ".mkv", ".webm", ".avi", ".mov"]);

export interface FrameSource {
  videoId: string;
  /** raw image bytes, one per sampled frame, in time order */
  frames: Buffer[];
  durationSeconds: number;
}

export class DecodeError extends Error {}

export function loadFrameDirectory(dir: string, fps: number): FrameSource {
  const files = readdirSync(dir)
    .filter((f) => FRAME_EXTENSIONS.has(extname(f).toLowerCase()))
    .sort();
  if (files.length === 0) {
    throw new DecodeError(`${dir}: no frame images found`);
  }
  const frames = files.map((f) => readFileSync(join(dir, f)));
  return {
    videoId: basename(dir),
    frames,
    durationSeconds: files.length / fps,
  };
}

export function loadVideoFile(path: string, fps: number): FrameSource {
  const probe = spawnSync("ffmpeg", ["-version"], { stdio: "ignore" });
  if (probe.error || probe.status !== 0) {
    throw new DecodeError(`${path}: ffmpeg not available to decode video files`);
  }
  const workdir = mkdtempSync(join(tmpdir(), "gapf-frames-"));
  try {
    const result = spawnSync(
      "ffmpeg",
      ["-i", path, "-vf", `fps=${fps}`, "-loglevel", "error", join(workdir, "frame_%06d.png")],
      { stdio: ["ignore", "ignore", "pipe"] },
    );
    if (result.status !== 0) {
      throw new DecodeError(`${path}: ffmpeg failed: ${result.stderr?.toString().trim()}`);
    }
    const files = readdirSync(workdir).sort();
    if (files.length === 0) {
      throw new DecodeError(`${path}: ffmpeg produced no frames`);
    }
    return {
      videoId: basename(path, extname(path)),
      frames: files.map((f) => readFileSync(join(workdir, f))),
      durationSeconds: files.length / fps,
    };
  } finally {
    rmSync(workdir, { recursive: true, force: true });
  }
}

export function loadSource(path: string, fps: number): FrameSource {
  const stats = statSync(path);
  if (stats.isDirectory()) {
    return loadFrameDirectory(path, fps);
  }
  if (VIDEO_EXTENSIONS.has(extname(path).toLowerCase())) {
    return loadVideoFile(path, fps);
  }
  throw new DecodeError(`${path}: neither a frame directory nor a known video format`);
}

export function listSources(root: string): string[] {
  const entries = readdirSync(root).sort();
  const sources: string[] = [];
  for (const entry of entries) {
    const full = join(root, entry);
    if (statSync(full).isDirectory() || VIDEO_EXTENSIONS.has(extname(entry).toLowerCase())) {
      sources.push(full);
    }
  }
  return sources;
}
