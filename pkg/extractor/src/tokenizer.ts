/** Word-level tokenizer driven by the checkpoint vocabulary. */

import type { Checkpoint } from "./checkpoint.js";

export const PAD_TOKEN = "[PAD]";
export const CLS_TOKEN = "[CLS]";
export const UNK_TOKEN = "[UNK]";

export function normalizeWords(sentence: string): string[] {
  return sentence
    .toLowerCase()
    .replace(/[^a-z0-9\s']/g, " ")
    .split(/\s+/)
    .filter((w) => w.length > 0);
}

/**
 * Token ids for one sentence. Bidirectional models get a leading [CLS];
 * unknown words map to [UNK]. Sequences are truncated to the model's
 * position budget.
 */
export function tokenize(checkpoint: Checkpoint, sentence: string): number[] {
  const unk = checkpoint.vocab[UNK_TOKEN];
  if (unk === undefined) {
    throw new Error("checkpoint vocabulary is missing [UNK]");
  }
  const ids = normalizeWords(sentence).map(
    (w) => checkpoint.vocab[w] ?? unk,
  );
  if (checkpoint.architecture === "bidirectional") {
    const cls = checkpoint.vocab[CLS_TOKEN];
    if (cls === undefined) {
      throw new Error("bidirectional checkpoint vocabulary is missing [CLS]");
    }
    ids.unshift(cls);
  }
  if (ids.length === 0) {
    ids.push(unk);
  }
  return ids.slice(0, checkpoint.maxPositions);
}
