/**
 * Seeded generator for tiny local checkpoints, used for fixtures and tests.
 * Weights are Gaussian with a 0.08 scale (plus identity layer-norm gains),
 * which keeps two-layer activations in a tame numeric range.
 */

import { mkdirSync } from "node:fs";
import { join } from "node:path";

import {
  CHECKPOINT_FORMAT,
  encodeF32,
  saveCheckpoint,
  type Architecture,
  type CheckpointJson,
  type PositionalScheme,
} from "./checkpoint.js";

const BASE_WORDS = [
  "the", "a", "an", "dog", "cat", "bird", "house", "tree", "river", "sky",
  "runs", "sleeps", "sings", "reads", "writes", "sees", "finds", "holds",
  "red", "blue", "green", "small", "large", "quiet", "bright", "old",
  "quickly", "slowly", "today", "here", "there", "and", "over", "under",
  "child", "teacher", "book", "story", "window", "garden",
];

/** Deterministic 32-bit PRNG (mulberry32). */
export function mulberry32(seed: number): () => number {
  let a = seed >>> 0;
  return () => {
    a = (a + 0x6d2b79f5) >>> 0;
    let t = a;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

function gaussian(rand: () => number): () => number {
  return () => {
    // Box-Muller; rand() is in [0, 1), shift to (0, 1]
    const u = 1 - rand();
    const v = rand();
    return Math.sqrt(-2 * Math.log(u)) * Math.cos(2 * Math.PI * v);
  };
}

export interface GenerateOptions {
  modelId: string;
  architecture: Architecture;
  positional: PositionalScheme;
  dModel?: number;
  nLayers?: number;
  nHeads?: number;
  dFf?: number;
  maxPositions?: number;
  seed?: number;
}

export function generateCheckpoint(options: GenerateOptions): CheckpointJson {
  const dModel = options.dModel ?? 16;
  const nLayers = options.nLayers ?? 2;
  const nHeads = options.nHeads ?? 2;
  const dFf = options.dFf ?? 32;
  const maxPositions = options.maxPositions ?? 32;
  if (dModel % nHeads !== 0) {
    throw new Error("d_model must be divisible by n_heads");
  }
  const rand = gaussian(mulberry32(options.seed ?? 1234));

  const vocab: Record<string, number> = { "[PAD]": 0, "[CLS]": 1, "[UNK]": 2 };
  BASE_WORDS.forEach((word, i) => {
    vocab[word] = 3 + i;
  });
  const vocabSize = Object.keys(vocab).length;

  const weights: CheckpointJson["weights"] = {};
  const putGaussian = (name: string, rows: number, cols: number, scale = 0.08) => {
    const data = new Float32Array(rows * cols);
    for (let i = 0; i < data.length; i++) data[i] = rand() * scale;
    weights[name] = { shape: [rows, cols], data: encodeF32(data) };
  };
  const putConstant = (name: string, length: number, value: number) => {
    const data = new Float32Array(length).fill(value);
    weights[name] = { shape: [1, length], data: encodeF32(data) };
  };

  putGaussian("token_embedding", vocabSize, dModel, 0.5);
  if (options.positional === "learned_absolute") {
    putGaussian("position_embedding", maxPositions, dModel, 0.5);
  }
  putConstant("final_ln_gain", dModel, 1.0);
  putConstant("final_ln_bias", dModel, 0.0);
  for (let l = 0; l < nLayers; l++) {
    putGaussian(`layers.${l}.attn_q`, dModel, dModel);
    putConstant(`layers.${l}.attn_q_bias`, dModel, 0.0);
    putGaussian(`layers.${l}.attn_k`, dModel, dModel);
    putConstant(`layers.${l}.attn_k_bias`, dModel, 0.0);
    putGaussian(`layers.${l}.attn_v`, dModel, dModel);
    putConstant(`layers.${l}.attn_v_bias`, dModel, 0.0);
    putGaussian(`layers.${l}.attn_out`, dModel, dModel);
    putConstant(`layers.${l}.attn_out_bias`, dModel, 0.0);
    putConstant(`layers.${l}.ln1_gain`, dModel, 1.0);
    putConstant(`layers.${l}.ln1_bias`, dModel, 0.0);
    putConstant(`layers.${l}.ln2_gain`, dModel, 1.0);
    putConstant(`layers.${l}.ln2_bias`, dModel, 0.0);
    putGaussian(`layers.${l}.mlp_in`, dModel, dFf);
    putConstant(`layers.${l}.mlp_in_bias`, dFf, 0.0);
    putGaussian(`layers.${l}.mlp_out`, dFf, dModel);
    putConstant(`layers.${l}.mlp_out_bias`, dModel, 0.0);
  }

  return {
    format: CHECKPOINT_FORMAT,
    model_id: options.modelId,
    architecture: options.architecture,
    positional: options.positional,
    d_model: dModel,
    n_layers: nLayers,
    n_heads: nHeads,
    d_ff: dFf,
    max_positions: maxPositions,
    vocab,
    weights,
  };
}

export function writeFixtureCheckpoints(dir: string): string[] {
  mkdirSync(dir, { recursive: true });
  const specs: GenerateOptions[] = [
    { modelId: "tiny-bidir", architecture: "bidirectional", positional: "learned_absolute", seed: 101 },
    { modelId: "tiny-causal", architecture: "causal", positional: "learned_absolute", seed: 202 },
    { modelId: "tiny-rotary", architecture: "causal", positional: "rotary", seed: 303 },
  ];
  const paths: string[] = [];
  for (const spec of specs) {
    const path = join(dir, `${spec.modelId}.json`);
    saveCheckpoint(path, generateCheckpoint(spec));
    paths.push(path);
  }
  return paths;
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  const dir = process.argv[2] ?? "fixtures";
  for (const path of writeFixtureCheckpoints(dir)) {
    console.log(path);
  }
}
