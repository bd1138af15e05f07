/**
 * Deterministic forward pass for tiny pre-LN transformers with per-unit
 * capture: residual stream after the embedding and after every block,
 * per-head outputs at both tap points, and per-head attention matrices.
 *
 * The "nopos" condition zeroes the positional contribution at the input,
 * which is only meaningful for additive (learned absolute) embeddings;
 * rotary models are rejected rather than approximated.
 */

import type { Checkpoint, LayerWeights } from "./checkpoint.js";
import {
  addInPlace,
  addRowVector,
  copy,
  gelu,
  layerNorm,
  matmul,
  sliceCols,
  softmaxRows,
  zeros,
  type Matrix,
} from "./tensor.js";

export type Condition = "pos" | "nopos";

export class UnsupportedConditionError extends Error {}

export interface ForwardCapture {
  /** Residual stream: index 0 is the embedding output, then one per block;
   *  the last entry has the final layer norm applied. */
  layerStates: Matrix[];
  /** [block][head] head output vectors before the output projection (T x dHead). */
  headOutputs: Matrix[][];
  /** [block][head] the head's contribution after the output projection (T x dModel). */
  headProjected: Matrix[][];
  /** [block][head] attention weight matrices (T x T). */
  attentionWeights: Matrix[][];
}

function applyRotary(m: Matrix, base = 10000): Matrix {
  const half = Math.floor(m.cols / 2);
  const out = copy(m);
  for (let pos = 0; pos < m.rows; pos++) {
    for (let i = 0; i < half; i++) {
      const theta = pos * Math.pow(base, -(2 * i) / m.cols);
      const cos = Math.cos(theta);
      const sin = Math.sin(theta);
      const a = m.data[pos * m.cols + i];
      const b = m.data[pos * m.cols + half + i];
      out.data[pos * m.cols + i] = a * cos - b * sin;
      out.data[pos * m.cols + half + i] = b * cos + a * sin;
    }
  }
  return out;
}

function attentionBlock(
  x: Matrix,
  weights: LayerWeights,
  nHeads: number,
  causal: boolean,
  rotary: boolean,
): { output: Matrix; heads: Matrix[]; projected: Matrix[]; attention: Matrix[] } {
  const d = x.cols;
  const dHead = d / nHeads;
  const t = x.rows;
  const q = addRowVector(matmul(x, weights.attnQ), weights.attnQBias);
  const k = addRowVector(matmul(x, weights.attnK), weights.attnKBias);
  const v = addRowVector(matmul(x, weights.attnV), weights.attnVBias);

  const heads: Matrix[] = [];
  const projected: Matrix[] = [];
  const attention: Matrix[] = [];
  const output = zeros(t, d);
  for (let h = 0; h < nHeads; h++) {
    let qh = sliceCols(q, h * dHead, (h + 1) * dHead);
    let kh = sliceCols(k, h * dHead, (h + 1) * dHead);
    const vh = sliceCols(v, h * dHead, (h + 1) * dHead);
    if (rotary) {
      qh = applyRotary(qh);
      kh = applyRotary(kh);
    }
    const scores = zeros(t, t);
    const scale = 1 / Math.sqrt(dHead);
    for (let i = 0; i < t; i++) {
      for (let j = 0; j < t; j++) {
        if (causal && j > i) {
          scores.data[i * t + j] = -Infinity;
          continue;
        }
        let acc = 0;
        for (let c = 0; c < dHead; c++) {
          acc += qh.data[i * dHead + c] * kh.data[j * dHead + c];
        }
        scores.data[i * t + j] = acc * scale;
      }
    }
    const attnWeights = softmaxRows(scores);
    const headOut = matmul(attnWeights, vh);
    // rows [h*dHead, (h+1)*dHead) of the output projection belong to head h
    const woSlice = zeros(dHead, d);
    for (let r = 0; r < dHead; r++) {
      for (let c = 0; c < d; c++) {
        woSlice.data[r * d + c] = weights.attnOut.data[(h * dHead + r) * d + c];
      }
    }
    const contribution = matmul(headOut, woSlice);
    addInPlace(output, contribution);
    heads.push(headOut);
    projected.push(contribution);
    attention.push(attnWeights);
  }
  addRowVector(output, weights.attnOutBias);
  return { output, heads, projected, attention };
}

export function forward(
  checkpoint: Checkpoint,
  tokenIds: number[],
  condition: Condition,
): ForwardCapture {
  if (condition === "nopos" && checkpoint.positional !== "learned_absolute") {
    throw new UnsupportedConditionError(
      `model ${checkpoint.modelId} uses ${checkpoint.positional} position ` +
        "embeddings, which are applied inside attention and cannot be zeroed " +
        "at the input; the nopos condition supports additive learned_absolute " +
        "embeddings only",
    );
  }
  const d = checkpoint.dModel;
  const t = tokenIds.length;
  const x = zeros(t, d);
  for (let i = 0; i < t; i++) {
    for (let j = 0; j < d; j++) {
      x.data[i * d + j] = checkpoint.tokenEmbedding.data[tokenIds[i] * d + j];
    }
    if (condition === "pos" && checkpoint.positionEmbedding) {
      for (let j = 0; j < d; j++) {
        x.data[i * d + j] += checkpoint.positionEmbedding.data[i * d + j];
      }
    }
  }

  const capture: ForwardCapture = {
    layerStates: [copy(x)],
    headOutputs: [],
    headProjected: [],
    attentionWeights: [],
  };
  let state = x;
  const causal = checkpoint.architecture === "causal";
  const rotary = checkpoint.positional === "rotary";
  for (let l = 0; l < checkpoint.nLayers; l++) {
    const weights = checkpoint.layers[l];
    const normed = layerNorm(state, weights.ln1Gain, weights.ln1Bias);
    const attn = attentionBlock(normed, weights, checkpoint.nHeads, causal, rotary);
    state = addInPlace(copy(state), attn.output);
    const normed2 = layerNorm(state, weights.ln2Gain, weights.ln2Bias);
    const hidden = gelu(addRowVector(matmul(normed2, weights.mlpIn), weights.mlpInBias));
    const mlpOut = addRowVector(matmul(hidden, weights.mlpOut), weights.mlpOutBias);
    state = addInPlace(copy(state), mlpOut);

    capture.headOutputs.push(attn.heads);
    capture.headProjected.push(attn.projected);
    capture.attentionWeights.push(attn.attention);
    const isLast = l === checkpoint.nLayers - 1;
    capture.layerStates.push(
      isLast
        ? layerNorm(state, checkpoint.finalLnGain, checkpoint.finalLnBias)
        : copy(state),
    );
  }
  return capture;
}
