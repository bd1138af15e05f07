#!/usr/bin/env node
/**
 * repalign-extract: dump per-stimulus transformer representations into the
 * repalign manifest format.
 *
 *   repalign-extract --model tiny-bidir.json --stimuli sentences.txt \
 *     --conditions pos,nopos --units layer,head_output,attention_weights \
 *     --out out/ [--head-tap pre_projection|post_projection] [--model-id id]
 *
 * The stimulus file holds one sentence per line (UTF-8); the line number is
 * the stimulus id. Exit codes: 0 success, 2 usage or config error, 3
 * extraction error (including unsupported positional-ablation conditions).
 */

import { existsSync } from "node:fs";

import { CheckpointError } from "./checkpoint.js";
import {
  ALL_CONDITIONS,
  ALL_UNITS,
  ExtractionError,
  extract,
  type ExtractionJob,
  type HeadTap,
  type Unit,
} from "./extract.js";
import { UnsupportedConditionError, type Condition } from "./model.js";

const USAGE =
  "usage: repalign-extract --model <checkpoint.json> --stimuli <file> " +
  "--out <dir> [--conditions pos,nopos] [--units layer,head_output,attention_weights] " +
  "[--head-tap pre_projection|post_projection] [--model-id <id>]";

function parseArgs(argv: string[]): ExtractionJob {
  const values = new Map<string, string>();
  for (let i = 0; i < argv.length; i += 2) {
    const flag = argv[i];
    const value = argv[i + 1];
    if (!flag.startsWith("--") || value === undefined) {
      throw new ExtractionError(`malformed arguments near ${flag}`);
    }
    values.set(flag.slice(2), value);
  }
  const known = new Set(["model", "stimuli", "out", "conditions", "units", "head-tap", "model-id"]);
  for (const key of values.keys()) {
    if (!known.has(key)) throw new ExtractionError(`unknown option --${key}`);
  }
  const model = values.get("model");
  const stimuli = values.get("stimuli");
  const out = values.get("out");
  if (!model || !stimuli || !out) {
    throw new ExtractionError("--model, --stimuli and --out are required");
  }
  if (!existsSync(model)) throw new ExtractionError(`model not found: ${model}`);
  if (!existsSync(stimuli)) throw new ExtractionError(`stimuli not found: ${stimuli}`);
  const conditions = (values.get("conditions") ?? "pos")
    .split(",")
    .map((c) => c.trim())
    .filter((c) => c.length > 0) as Condition[];
  const units = (values.get("units") ?? "layer")
    .split(",")
    .map((u) => u.trim())
    .filter((u) => u.length > 0) as Unit[];
  for (const c of conditions) {
    if (!ALL_CONDITIONS.includes(c)) {
      throw new ExtractionError(`unknown condition ${c}; valid: ${ALL_CONDITIONS.join(",")}`);
    }
  }
  for (const u of units) {
    if (!ALL_UNITS.includes(u)) {
      throw new ExtractionError(`unknown unit ${u}; valid: ${ALL_UNITS.join(",")}`);
    }
  }
  const headTap = (values.get("head-tap") ?? "pre_projection") as HeadTap;
  if (headTap !== "pre_projection" && headTap !== "post_projection") {
    throw new ExtractionError(`unknown head tap ${headTap}`);
  }
  return {
    modelPath: model,
    stimuliPath: stimuli,
    conditions,
    units,
    outDir: out,
    headTap,
    modelId: values.get("model-id"),
  };
}

export function main(argv: string[]): number {
  if (argv.includes("--help") || argv.includes("-h") || argv.length === 0) {
    console.log(USAGE);
    return argv.length === 0 ? 2 : 0;
  }
  let job: ExtractionJob;
  try {
    job = parseArgs(argv);
  } catch (err) {
    console.error(String(err instanceof Error ? err.message : err));
    console.error(USAGE);
    return 2;
  }
  try {
    const manifest = extract(job);
    console.log(JSON.stringify({ ok: true, manifest }));
    return 0;
  } catch (err) {
    if (err instanceof UnsupportedConditionError) {
      console.error(JSON.stringify({ ok: false, error: "unsupported_condition", message: err.message }));
      return 3;
    }
    if (err instanceof ExtractionError || err instanceof CheckpointError) {
      console.error(JSON.stringify({ ok: false, error: "extraction", message: err.message }));
      return 3;
    }
    throw err;
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href;
if (invokedDirectly) {
  process.exit(main(process.argv.slice(2)));
}
