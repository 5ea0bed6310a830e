#!/usr/bin/env node
/**
 * gapf-exporter CLI.
 *
 *   export-frames --videos DIR --fps F --out DIR [--encoder hash|clip]
 *   export-text   --classes FILE --out FILE [--template STR] [--encoder hash|clip]
 */

import { mkdirSync, readFileSync } from "node:fs";

import { makeEncoder } from "./encoder.js";
import { exportFrames, exportText } from "./exporter.js";
import { DEFAULT_TEMPLATE } from "./prompt.js";

function parseArgs(argv: string[]): { command: string; options: Map<string, string> } {
  const [command, ...rest] = argv;
  const options = new Map<string, string>();
  for (let i = 0; i < rest.length; i += 2) {
    const key = rest[i];
    if (!key.startsWith("--") || i + 1 >= rest.length) {
      throw new Error(`malformed option ${key}`);
    }
    options.set(key.slice(2), rest[i + 1]);
  }
  return { command, options };
}

function required(options: Map<string, string>, key: string): string {
  const value = options.get(key);
  if (value === undefined) {
    throw new Error(`--${key} is required`);
  }
  return value;
}

async function main(): Promise<number> {
  const { command, options } = parseArgs(process.argv.slice(2));
  const encoder = makeEncoder(options.get("encoder") ?? "hash");

  if (command === "export-frames") {
    const videos = required(options, "videos");
    const fps = Number(required(options, "fps"));
    const out = required(options, "out");
    mkdirSync(out, { recursive: true });
    const result = await exportFrames(videos, fps, out, encoder, (m) => console.error(m));
    console.log(
      `exported ${result.exported.length} videos (${result.skipped.length} skipped) to ${out}`,
    );
    return result.exported.length > 0 ? 0 : 1;
  }

  if (command === "export-text") {
    const classesFile = required(options, "classes");
    const out = required(options, "out");
    const template = options.get("template") ?? DEFAULT_TEMPLATE;
    const classNames = readFileSync(classesFile, "utf8")
      .split("\n")
      .map((line) => line.trim())
      .filter((line) => line.length > 0);
    await exportText(classNames, template, out, encoder);
    console.log(`exported ${classNames.length} class embeddings to ${out}`);
    return 0;
  }

  console.error("usage: gapf-exporter <export-frames|export-text> [options]");
  return 2;
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err instanceof Error ? err.message : err}`);
    process.exit(1);
  });
