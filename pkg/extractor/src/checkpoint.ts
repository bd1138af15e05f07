/**
 * Self-contained JSON checkpoint format for tiny local transformer models.
 *
 * A checkpoint carries the architecture hyperparameters, a word-level
 * vocabulary, and every weight matrix as base64-encoded little-endian
 * float32, so a model is a single portable file.
 */

import { readFileSync, writeFileSync } from "node:fs";

import type { Matrix } from "./tensor.js";

export type Architecture = "bidirectional" | "causal";
export type PositionalScheme = "learned_absolute" | "rotary";

export class CheckpointError extends Error {}

export interface CheckpointJson {
  format: string;
  model_id: string;
  architecture: Architecture;
  positional: PositionalScheme;
  d_model: number;
  n_layers: number;
  n_heads: number;
  d_ff: number;
  max_positions: number;
  vocab: Record<string, number>;
  weights: Record<string, { shape: [number, number]; data: string }>;
}

export interface LayerWeights {
  attnQ: Matrix;
  attnQBias: Float32Array;
  attnK: Matrix;
  attnKBias: Float32Array;
  attnV: Matrix;
  attnVBias: Float32Array;
  attnOut: Matrix;
  attnOutBias: Float32Array;
  ln1Gain: Float32Array;
  ln1Bias: Float32Array;
  ln2Gain: Float32Array;
  ln2Bias: Float32Array;
  mlpIn: Matrix;
  mlpInBias: Float32Array;
  mlpOut: Matrix;
  mlpOutBias: Float32Array;
}

export interface Checkpoint {
  modelId: string;
  architecture: Architecture;
  positional: PositionalScheme;
  dModel: number;
  nLayers: number;
  nHeads: number;
  dFf: number;
  maxPositions: number;
  vocab: Record<string, number>;
  tokenEmbedding: Matrix;
  /** Only present for learned_absolute models. */
  positionEmbedding: Matrix | null;
  finalLnGain: Float32Array;
  finalLnBias: Float32Array;
  layers: LayerWeights[];
}

export const CHECKPOINT_FORMAT = "repalign-checkpoint/1";

export function encodeF32(data: Float32Array): string {
  return Buffer.from(data.buffer, data.byteOffset, data.byteLength).toString(
    "base64",
  );
}

export function decodeF32(encoded: string, expected: number): Float32Array {
  const buf = Buffer.from(encoded, "base64");
  if (buf.byteLength !== expected * 4) {
    throw new CheckpointError(
      `weight payload is ${buf.byteLength} bytes, expected ${expected * 4}`,
    );
  }
  // copy so the view is aligned and detached from the Buffer pool
  const out = new Float32Array(expected);
  for (let i = 0; i < expected; i++) out[i] = buf.readFloatLE(i * 4);
  return out;
}

function takeMatrix(
  doc: CheckpointJson,
  name: string,
  rows: number,
  cols: number,
): Matrix {
  const entry = doc.weights[name];
  if (!entry) throw new CheckpointError(`checkpoint is missing weight ${name}`);
  if (entry.shape[0] !== rows || entry.shape[1] !== cols) {
    throw new CheckpointError(
      `weight ${name} has shape ${entry.shape}, expected [${rows}, ${cols}]`,
    );
  }
  return { rows, cols, data: decodeF32(entry.data, rows * cols) };
}

function takeVector(doc: CheckpointJson, name: string, length: number): Float32Array {
  return takeMatrix(doc, name, 1, length).data;
}

export function loadCheckpoint(path: string): Checkpoint {
  let doc: CheckpointJson;
  try {
    doc = JSON.parse(readFileSync(path, "utf-8")) as CheckpointJson;
  } catch (err) {
    throw new CheckpointError(`cannot read checkpoint ${path}: ${String(err)}`);
  }
  if (doc.format !== CHECKPOINT_FORMAT) {
    throw new CheckpointError(
      `unsupported checkpoint format ${doc.format}; expected ${CHECKPOINT_FORMAT}`,
    );
  }
  const d = doc.d_model;
  const vocabSize = Object.keys(doc.vocab).length;
  const layers: LayerWeights[] = [];
  for (let l = 0; l < doc.n_layers; l++) {
    layers.push({
      attnQ: takeMatrix(doc, `layers.${l}.attn_q`, d, d),
      attnQBias: takeVector(doc, `layers.${l}.attn_q_bias`, d),
      attnK: takeMatrix(doc, `layers.${l}.attn_k`, d, d),
      attnKBias: takeVector(doc, `layers.${l}.attn_k_bias`, d),
      attnV: takeMatrix(doc, `layers.${l}.attn_v`, d, d),
      attnVBias: takeVector(doc, `layers.${l}.attn_v_bias`, d),
      attnOut: takeMatrix(doc, `layers.${l}.attn_out`, d, d),
      attnOutBias: takeVector(doc, `layers.${l}.attn_out_bias`, d),
      ln1Gain: takeVector(doc, `layers.${l}.ln1_gain`, d),
      ln1Bias: takeVector(doc, `layers.${l}.ln1_bias`, d),
      ln2Gain: takeVector(doc, `layers.${l}.ln2_gain`, d),
      ln2Bias: takeVector(doc, `layers.${l}.ln2_bias`, d),
      mlpIn: takeMatrix(doc, `layers.${l}.mlp_in`, d, doc.d_ff),
      mlpInBias: takeVector(doc, `layers.${l}.mlp_in_bias`, doc.d_ff),
      mlpOut: takeMatrix(doc, `layers.${l}.mlp_out`, doc.d_ff, d),
      mlpOutBias: takeVector(doc, `layers.${l}.mlp_out_bias`, d),
    });
  }
  return {
    modelId: doc.model_id,
    architecture: doc.architecture,
    positional: doc.positional,
    dModel: d,
    nLayers: doc.n_layers,
    nHeads: doc.n_heads,
    dFf: doc.d_ff,
    maxPositions: doc.max_positions,
    vocab: doc.vocab,
    tokenEmbedding: takeMatrix(doc, "token_embedding", vocabSize, d),
    positionEmbedding:
      doc.positional === "learned_absolute"
        ? takeMatrix(doc, "position_embedding", doc.max_positions, d)
        : null,
    finalLnGain: takeVector(doc, "final_ln_gain", d),
    finalLnBias: takeVector(doc, "final_ln_bias", d),
    layers,
  };
}

export function saveCheckpoint(path: string, doc: CheckpointJson): void {
  writeFileSync(path, JSON.stringify(doc, null, 2), "utf-8");
}
