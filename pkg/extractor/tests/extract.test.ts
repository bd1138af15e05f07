import { execFileSync, spawnSync } from "node:child_process";
import { createHash } from "node:crypto";
import { mkdtempSync, readFileSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";
import { beforeAll, describe, expect, it } from "vitest";

import { loadCheckpoint, saveCheckpoint } from "../src/checkpoint.js";
import { extract, readStimuli } from "../src/extract.js";
import { readEntry, readManifest } from "../src/manifest.js";
import { forward, UnsupportedConditionError } from "../src/model.js";
import { generateCheckpoint, writeFixtureCheckpoints } from "../src/generate.js";
import { tokenize } from "../src/tokenizer.js";
import { main as cliMain } from "../src/cli.js";

let fixtureDir: string;
let bidirPath: string;
let causalPath: string;
let rotaryPath: string;
let stimuliPath: string;

beforeAll(() => {
  fixtureDir = mkdtempSync(join(tmpdir(), "repalign-extract-"));
  [bidirPath, causalPath, rotaryPath] = writeFixtureCheckpoints(fixtureDir);
  stimuliPath = join(fixtureDir, "stimuli.txt");
  writeFileSync(
    stimuliPath,
    [
      "The dog runs over the bright garden.",
      "A quiet child reads an old story today.",
      "The teacher writes here.",
      "The dog runs over the bright garden.", // duplicate of line 1
    ].join("\n"),
    "utf-8",
  );
});

function freshOut(): string {
  return mkdtempSync(join(tmpdir(), "repalign-out-"));
}

describe("checkpoint generation", () => {
  it("round-trips through the loader", () => {
    const checkpoint = loadCheckpoint(bidirPath);
    expect(checkpoint.modelId).toBe("tiny-bidir");
    expect(checkpoint.architecture).toBe("bidirectional");
    expect(checkpoint.nLayers).toBe(2);
    expect(checkpoint.tokenEmbedding.rows).toBe(
      Object.keys(checkpoint.vocab).length,
    );
  });

  it("is deterministic in the seed", () => {
    const a = generateCheckpoint({
      modelId: "m",
      architecture: "causal",
      positional: "learned_absolute",
      seed: 7,
    });
    const b = generateCheckpoint({
      modelId: "m",
      architecture: "causal",
      positional: "learned_absolute",
      seed: 7,
    });
    expect(JSON.stringify(a)).toBe(JSON.stringify(b));
  });
});

describe("tokenizer", () => {
  it("prepends [CLS] for bidirectional models only", () => {
    const bidir = loadCheckpoint(bidirPath);
    const causal = loadCheckpoint(causalPath);
    expect(tokenize(bidir, "the dog runs")[0]).toBe(bidir.vocab["[CLS]"]);
    expect(tokenize(causal, "the dog runs")[0]).toBe(causal.vocab["the"]);
  });

  it("maps unknown words to [UNK]", () => {
    const bidir = loadCheckpoint(bidirPath);
    const ids = tokenize(bidir, "the zyxwv");
    expect(ids[2]).toBe(bidir.vocab["[UNK]"]);
  });
});

describe("forward pass", () => {
  it("is deterministic", () => {
    const checkpoint = loadCheckpoint(causalPath);
    const ids = tokenize(checkpoint, "the dog runs over the river");
    const a = forward(checkpoint, ids, "pos");
    const b = forward(checkpoint, ids, "pos");
    expect(a.layerStates[2].data).toEqual(b.layerStates[2].data);
  });

  it("rejects nopos for rotary models, naming the mechanism", () => {
    const checkpoint = loadCheckpoint(rotaryPath);
    const ids = tokenize(checkpoint, "the dog runs");
    expect(() => forward(checkpoint, ids, "nopos")).toThrow(
      UnsupportedConditionError,
    );
    expect(() => forward(checkpoint, ids, "nopos")).toThrow(/rotary/);
  });

  it("causal attention never attends to the future", () => {
    const checkpoint = loadCheckpoint(causalPath);
    const ids = tokenize(checkpoint, "the dog runs over the river");
    const capture = forward(checkpoint, ids, "pos");
    const attn = capture.attentionWeights[0][0];
    for (let i = 0; i < attn.rows; i++) {
      for (let j = i + 1; j < attn.cols; j++) {
        expect(attn.data[i * attn.cols + j]).toBe(0);
      }
    }
  });

  it("attention rows are probability distributions", () => {
    const checkpoint = loadCheckpoint(bidirPath);
    const ids = tokenize(checkpoint, "a small bird sings");
    const capture = forward(checkpoint, ids, "pos");
    const attn = capture.attentionWeights[1][1];
    for (let i = 0; i < attn.rows; i++) {
      let total = 0;
      for (let j = 0; j < attn.cols; j++) total += attn.data[i * attn.cols + j];
      expect(total).toBeCloseTo(1.0, 6);
    }
  });
});

describe("extraction", () => {
  it("produces validating manifests with the right shapes", () => {
    const out = freshOut();
    const manifestPath = extract({
      modelPath: bidirPath,
      stimuliPath,
      conditions: ["pos", "nopos"],
      units: ["layer", "head_output", "attention_weights"],
      outDir: out,
    });
    const checkpoint = loadCheckpoint(bidirPath);
    const doc = readManifest(manifestPath);
    expect(doc.format).toBe("repalign-manifest/1");
    // 3 layer states (2 blocks + embedding), 4 heads, 4 attention maps, x2 conditions
    expect(doc.entries.length).toBe(2 * (3 + 4 + 4));
    for (const entry of doc.entries) {
      expect(entry.dtype).toBe("f32le");
      expect(entry.rows).toBe(4);
      expect(entry.meta.model_id).toBe("tiny-bidir");
    }
    const layer = readEntry(manifestPath, "layer:0:pos");
    expect(layer.cols).toBe(checkpoint.dModel);
    const head = readEntry(manifestPath, "head:1.0:pos");
    expect(head.cols).toBe(checkpoint.dModel / checkpoint.nHeads);
    const stimuli = readStimuli(stimuliPath);
    const tokensMax = Math.max(
      ...stimuli.map((s) => tokenize(checkpoint, s).length),
    );
    const attn = readEntry(manifestPath, "attn:0.1:nopos");
    expect(attn.cols).toBe(tokensMax * tokensMax);
  });

  it("keeps stimulus order and duplicates identical sentences exactly", () => {
    const out = freshOut();
    const manifestPath = extract({
      modelPath: causalPath,
      stimuliPath,
      conditions: ["pos"],
      units: ["layer"],
      outDir: out,
    });
    const layer = readEntry(manifestPath, "layer:2:pos");
    const first = layer.data.slice(0, layer.cols);
    const fourth = layer.data.slice(3 * layer.cols, 4 * layer.cols);
    expect(fourth).toEqual(first); // same sentence, same row
    const second = layer.data.slice(layer.cols, 2 * layer.cols);
    expect(second).not.toEqual(first);
  });

  it("pos and nopos tensors differ for multi-token inputs", () => {
    for (const path of [bidirPath, causalPath]) {
      const out = freshOut();
      const manifestPath = extract({
        modelPath: path,
        stimuliPath,
        conditions: ["pos", "nopos"],
        units: ["layer"],
        outDir: out,
      });
      const pos = readEntry(manifestPath, "layer:1:pos");
      const nopos = readEntry(manifestPath, "layer:1:nopos");
      let maxDiff = 0;
      for (let i = 0; i < pos.data.length; i++) {
        maxDiff = Math.max(maxDiff, Math.abs(pos.data[i] - nopos.data[i]));
      }
      expect(maxDiff).toBeGreaterThan(0);
    }
  });

  it("re-extraction is byte-identical", () => {
    const outA = freshOut();
    const outB = freshOut();
    const job = {
      modelPath: bidirPath,
      stimuliPath,
      conditions: ["pos"] as const,
      units: ["layer", "head_output"] as const,
    };
    const a = extract({ ...job, conditions: [...job.conditions], units: [...job.units], outDir: outA });
    const b = extract({ ...job, conditions: [...job.conditions], units: [...job.units], outDir: outB });
    const docA = readManifest(a);
    for (const entry of docA.entries) {
      const bytesA = readFileSync(join(outA, entry.path));
      const bytesB = readFileSync(join(outB, entry.path));
      expect(bytesA.equals(bytesB)).toBe(true);
    }
  });

  it("attention padding is zero beyond the true length", () => {
    const out = freshOut();
    const manifestPath = extract({
      modelPath: causalPath,
      stimuliPath,
      conditions: ["pos"],
      units: ["attention_weights"],
      outDir: out,
    });
    const doc = readManifest(manifestPath);
    const entry = doc.entries.find((e) => e.name === "attn:0.0:pos")!;
    const lengths = entry.meta.token_lengths as number[];
    const tokensMax = entry.meta.tokens_max as number;
    const attn = readEntry(manifestPath, "attn:0.0:pos");
    const short = lengths.indexOf(Math.min(...lengths));
    const t = lengths[short];
    // a padded row beyond the true length is all zeros
    for (let j = 0; j < tokensMax; j++) {
      expect(attn.data[short * tokensMax * tokensMax + t * tokensMax + j]).toBe(0);
    }
  });

  it("head tap point selects pre- or post-projection widths", () => {
    const checkpoint = loadCheckpoint(causalPath);
    const outPre = freshOut();
    const pre = extract({
      modelPath: causalPath,
      stimuliPath,
      conditions: ["pos"],
      units: ["head_output"],
      outDir: outPre,
    });
    expect(readEntry(pre, "head:0.0:pos").cols).toBe(
      checkpoint.dModel / checkpoint.nHeads,
    );
    const outPost = freshOut();
    const post = extract({
      modelPath: causalPath,
      stimuliPath,
      conditions: ["pos"],
      units: ["head_output"],
      outDir: outPost,
      headTap: "post_projection",
    });
    const doc = readManifest(post);
    expect(doc.entries[0].meta.tap_point).toBe("post_projection");
    expect(readEntry(post, "head:0.0:pos").cols).toBe(checkpoint.dModel);
  });
});

describe("cli", () => {
  it("extracts and reports the manifest path", () => {
    const out = freshOut();
    const code = cliMain([
      "--model", bidirPath,
      "--stimuli", stimuliPath,
      "--conditions", "pos,nopos",
      "--units", "layer",
      "--out", out,
    ]);
    expect(code).toBe(0);
    expect(readManifest(join(out, "manifest.json")).entries.length).toBe(6);
  });

  it("rejects rotary models under nopos with exit 3", () => {
    const out = freshOut();
    const code = cliMain([
      "--model", rotaryPath,
      "--stimuli", stimuliPath,
      "--conditions", "pos,nopos",
      "--units", "layer",
      "--out", out,
    ]);
    expect(code).toBe(3);
  });

  it("reports usage errors with exit 2", () => {
    expect(cliMain(["--model", "missing.json"])).toBe(2);
    expect(cliMain(["--bogus", "x"])).toBe(2);
  });
});

describe("interop with the analysis package", () => {
  it("python loader reads an extracted tensor bit-exactly", () => {
    const probe = spawnSync("python3", ["-c", "import repalign"], {
      encoding: "utf-8",
    });
    if (probe.status !== 0) {
      // analysis package not installed in this environment; covered by the
      // shape/byte assertions above
      return;
    }
    const out = freshOut();
    const manifestPath = extract({
      modelPath: bidirPath,
      stimuliPath,
      conditions: ["pos"],
      units: ["layer"],
      outDir: out,
    });
    const script = [
      "import hashlib, json, sys",
      "from repalign import tensorio",
      "m = tensorio.load_matrix(sys.argv[1], 'layer:0:pos')",
      "assert m.unit == 'layer' and m.condition == 'pos'",
      "digest = hashlib.sha256(m.data.tobytes()).hexdigest()",
      "print(json.dumps({'rows': int(m.data.shape[0]), 'cols': int(m.data.shape[1]), 'sha256': digest}))",
    ].join("\n");
    const result = execFileSync("python3", ["-c", script, manifestPath], {
      encoding: "utf-8",
    });
    const parsed = JSON.parse(result);
    const local = readEntry(manifestPath, "layer:0:pos");
    expect(parsed.rows).toBe(local.rows);
    expect(parsed.cols).toBe(local.cols);
    const buf = Buffer.alloc(local.data.length * 4);
    for (let i = 0; i < local.data.length; i++) buf.writeFloatLE(local.data[i], i * 4);
    const digest = createHash("sha256").update(buf).digest("hex");
    expect(parsed.sha256).toBe(digest);
  });
});
