/**
 * Embedding backends. The contract every backend satisfies: 512-dimensional
 * float32 vectors, unit L2 norm, deterministic for identical input.
 *
 * The clip backend wraps the pretrained image-text encoder pair when its
 * runtime package and weights are available. The hash backend derives the
 * vector from a SHA-256 stream over the input bytes: it carries no
 * semantics but exercises every byte of the export pipeline, which is what
 * the format contract needs in environments without model weights.
 */

import { createHash } from "node:crypto";

export const EMBEDDING_DIM = 512;

export interface Encoder {
  readonly name: string;
  readonly dim: number;
  encodeImage(bytes: Buffer): Promise<Float32Array>;
  encodeText(text: string): Promise<Float32Array>;
}

export class EncoderUnavailableError extends Error {}

function normalize(vec: Float32Array): Float32Array {
  let sum = 0;
  for (let i = 0; i < vec.length; i++) sum += vec[i] * vec[i];
  const norm = Math.sqrt(sum);
  if (norm === 0) {
    vec[0] = 1;
    return vec;
  }
  for (let i = 0; i < vec.length; i++) vec[i] /= norm;
  return vec;
}

/** Expand a SHA-256 seed into `dim` floats in [-1, 1) via counter-mode hashing. */
function hashToVector(seed: Buffer, dim: number): Float32Array {
  const out = new Float32Array(dim);
  let filled = 0;
  let counter = 0;
  while (filled < dim) {
    const block = createHash("sha256")
      .update(seed)
      .update(Buffer.from(String(counter)))
      .digest();
    for (let off = 0; off + 4 <= block.length && filled < dim; off += 4) {
      const u = block.readUInt32LE(off);
      out[filled++] = (u / 0xffffffff) * 2 - 1;
    }
    counter++;
  }
  return normalize(out);
}

export class HashEncoder implements Encoder {
  readonly name = "hash";
  readonly dim = EMBEDDING_DIM;

  async encodeImage(bytes: Buffer): Promise<Float32Array> {
    return hashToVector(createHash("sha256").update("image").update(bytes).digest(), this.dim);
  }

  async encodeText(text: string): Promise<Float32Array> {
    return hashToVector(createHash("sha256").update("text").update(text, "utf8").digest(), this.dim);
  }
}

/** Lazy wrapper over the pretrained vision-language encoder pair. */
export class ClipEncoder implements Encoder {
  readonly name = "clip";
  readonly dim = EMBEDDING_DIM;
  private pipeline: unknown;

  constructor(private readonly modelId = "Xenova/clip-vit-base-patch16") {}

  private async load(): Promise<any> {
    if (this.pipeline) return this.pipeline;
    let transformers: any;
    try {
      transformers = await import("@xenova/transformers" as string);
    } catch {
      throw new EncoderUnavailableError(
        "clip backend needs the '@xenova/transformers' package and model weights; " +
          "install it or use --encoder hash",
      );
    }
    const [tokenizer, textModel, processor, visionModel] = await Promise.all([
      transformers.AutoTokenizer.from_pretrained(this.modelId),
      transformers.CLIPTextModelWithProjection.from_pretrained(this.modelId),
      transformers.AutoProcessor.from_pretrained(this.modelId),
      transformers.CLIPVisionModelWithProjection.from_pretrained(this.modelId),
    ]);
    this.pipeline = { transformers, tokenizer, textModel, processor, visionModel };
    return this.pipeline;
  }

  async encodeImage(bytes: Buffer): Promise<Float32Array> {
    const { transformers, processor, visionModel } = await this.load();
    const image = await transformers.RawImage.fromBlob(new Blob([new Uint8Array(bytes)]));
    const inputs = await processor(image);
    const output = await visionModel(inputs);
    const vec = Float32Array.from(output.image_embeds.data as Iterable<number>);
    if (vec.length !== this.dim) {
      throw new EncoderUnavailableError(`vision encoder returned dim ${vec.length}, need ${this.dim}`);
    }
    return normalize(vec);
  }

  async encodeText(text: string): Promise<Float32Array> {
    const { tokenizer, textModel } = await this.load();
    const inputs = tokenizer([text], { padding: true, truncation: true });
    const output = await textModel(inputs);
    const vec = Float32Array.from(output.text_embeds.data as Iterable<number>);
    if (vec.length !== this.dim) {
      throw new EncoderUnavailableError(`text encoder returned dim ${vec.length}, need ${this.dim}`);
    }
    return normalize(vec);
  }
}

export function makeEncoder(name: string): Encoder {
  switch (name) {
    case "hash":
      return new HashEncoder();
    case "clip":
      return new ClipEncoder();
    default:
      throw new EncoderUnavailableError(`unknown encoder backend ${JSON.stringify(name)}`);
  }
}
