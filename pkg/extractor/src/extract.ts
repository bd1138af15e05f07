/**
 * Extraction job: run a checkpoint over a stimulus file and persist one
 * activation tensor per (unit, index, condition) in the repalign manifest
 * format. Sentence-level vectors use the [CLS] token for bidirectional
 * models and mean pooling for causal ones (no [CLS] exists there);
 * attention matrices are zero-padded to the batch's longest sequence so
 * every stimulus row has a fixed width.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { loadCheckpoint, type Checkpoint } from "./checkpoint.js";
import { ManifestWriter } from "./manifest.js";
import { forward, type Condition, type ForwardCapture } from "./model.js";
import { meanOfRows, row, zeros, type Matrix } from "./tensor.js";
import { tokenize } from "./tokenizer.js";

export type Unit = "layer" | "head_output" | "attention_weights";
export type HeadTap = "pre_projection" | "post_projection";

export class ExtractionError extends Error {}

export interface ExtractionJob {
  modelPath: string;
  stimuliPath: string;
  conditions: Condition[];
  units: Unit[];
  outDir: string;
  headTap?: HeadTap;
  modelId?: string;
}

export const ALL_CONDITIONS: readonly Condition[] = ["pos", "nopos"];
export const ALL_UNITS: readonly Unit[] = [
  "layer",
  "head_output",
  "attention_weights",
];

export function readStimuli(path: string): string[] {
  const lines = readFileSync(path, "utf-8")
    .split("\n")
    .map((line) => line.trim())
    .filter((line) => line.length > 0);
  if (lines.length === 0) {
    throw new ExtractionError(`stimulus file ${path} contains no sentences`);
  }
  return lines;
}

function pooled(checkpoint: Checkpoint, state: Matrix): Float32Array {
  return checkpoint.architecture === "bidirectional"
    ? row(state, 0)
    : meanOfRows(state);
}

function stack(rows: Float32Array[]): Matrix {
  const out = zeros(rows.length, rows[0].length);
  rows.forEach((r, i) => out.data.set(r, i * r.length));
  return out;
}

export function extract(job: ExtractionJob): string {
  if (job.conditions.length === 0) {
    throw new ExtractionError("at least one condition is required");
  }
  if (job.units.length === 0) {
    throw new ExtractionError("at least one unit kind is required");
  }
  for (const condition of job.conditions) {
    if (!ALL_CONDITIONS.includes(condition)) {
      throw new ExtractionError(`unknown condition ${condition}`);
    }
  }
  for (const unit of job.units) {
    if (!ALL_UNITS.includes(unit)) {
      throw new ExtractionError(`unknown unit ${unit}`);
    }
  }
  const checkpoint = loadCheckpoint(job.modelPath);
  const modelId = job.modelId ?? checkpoint.modelId;
  const headTap = job.headTap ?? "pre_projection";
  const pooling = checkpoint.architecture === "bidirectional" ? "cls" : "mean";
  const sentences = readStimuli(job.stimuliPath);
  const tokens = sentences.map((s) => tokenize(checkpoint, s));
  const tokenLengths = tokens.map((t) => t.length);
  const tokensMax = Math.max(...tokenLengths);

  const writer = new ManifestWriter(join(job.outDir, "manifest.json"));
  for (const condition of job.conditions) {
    // forward() rejects nopos for non-additive positional schemes
    const captures: ForwardCapture[] = tokens.map((ids) =>
      forward(checkpoint, ids, condition),
    );

    if (job.units.includes("layer")) {
      const nUnits = checkpoint.nLayers + 1;
      for (let l = 0; l < nUnits; l++) {
        const matrix = stack(
          captures.map((c) => pooled(checkpoint, c.layerStates[l])),
        );
        writer.addMatrix(`layer:${l}:${condition}`, matrix, {
          kind: "activations",
          model_id: modelId,
          unit: "layer",
          unit_index: l,
          condition,
          pooling,
          n_units: nUnits,
        });
      }
    }

    if (job.units.includes("head_output")) {
      for (let l = 0; l < checkpoint.nLayers; l++) {
        for (let h = 0; h < checkpoint.nHeads; h++) {
          const source =
            headTap === "pre_projection"
              ? captures.map((c) => c.headOutputs[l][h])
              : captures.map((c) => c.headProjected[l][h]);
          const matrix = stack(
            source.map((state) => pooled(checkpoint, state)),
          );
          writer.addMatrix(`head:${l}.${h}:${condition}`, matrix, {
            kind: "activations",
            model_id: modelId,
            unit: "head_output",
            unit_index: l * checkpoint.nHeads + h,
            condition,
            pooling,
            block: l,
            head: h,
            tap_point: headTap,
          });
        }
      }
    }

    if (job.units.includes("attention_weights")) {
      for (let l = 0; l < checkpoint.nLayers; l++) {
        for (let h = 0; h < checkpoint.nHeads; h++) {
          const matrix = zeros(sentences.length, tokensMax * tokensMax);
          captures.forEach((capture, s) => {
            const attn = capture.attentionWeights[l][h];
            for (let i = 0; i < attn.rows; i++) {
              for (let j = 0; j < attn.cols; j++) {
                matrix.data[
                  s * tokensMax * tokensMax + i * tokensMax + j
                ] = attn.data[i * attn.cols + j];
              }
            }
          });
          writer.addMatrix(`attn:${l}.${h}:${condition}`, matrix, {
            kind: "activations",
            model_id: modelId,
            unit: "attention_weights",
            unit_index: l * checkpoint.nHeads + h,
            condition,
            block: l,
            head: h,
            tokens_max: tokensMax,
            token_lengths: tokenLengths,
          });
        }
      }
    }
  }
  return writer.finish();
}
