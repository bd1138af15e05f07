/**
 * Writer (and test-oriented reader) for the repalign interchange format:
 * a `manifest.json` with an `entries` array next to raw row-major
 * little-endian float32 payload files, no header. Writes are atomic
 * (temp file + rename) so concurrent readers never observe torn files.
 */

import { mkdirSync, readFileSync, renameSync, writeFileSync } from "node:fs";
import { dirname, join } from "node:path";

import type { Matrix } from "./tensor.js";

export class ManifestError extends Error {}

export interface ManifestEntry {
  name: string;
  path: string;
  rows: number;
  cols: number;
  dtype: "f32le";
  meta: Record<string, unknown>;
}

export interface ManifestDoc {
  format: string;
  entries: ManifestEntry[];
}

export const MANIFEST_FORMAT = "repalign-manifest/1";

function sanitize(name: string): string {
  const stem = name.replace(/[^A-Za-z0-9._-]+/g, "_");
  return stem.length > 0 ? stem : "entry";
}

function atomicWrite(path: string, data: Buffer | string): void {
  const tmp = `${path}.tmp`;
  writeFileSync(tmp, data);
  renameSync(tmp, path);
}

export class ManifestWriter {
  private readonly manifestPath: string;
  private readonly dir: string;
  private readonly entries: ManifestEntry[] = [];
  private readonly usedPaths = new Set<string>();

  constructor(manifestPath: string) {
    this.manifestPath = manifestPath;
    this.dir = dirname(manifestPath);
    mkdirSync(this.dir, { recursive: true });
  }

  addMatrix(name: string, m: Matrix, meta: Record<string, unknown>): void {
    if (this.entries.some((e) => e.name === name)) {
      throw new ManifestError(`duplicate entry name ${name}`);
    }
    for (const value of m.data) {
      if (!Number.isFinite(value)) {
        throw new ManifestError(`entry ${name} contains NaN or Inf`);
      }
    }
    let relPath = `${sanitize(name)}.f32`;
    let suffix = 1;
    while (this.usedPaths.has(relPath)) {
      relPath = `${sanitize(name)}_${suffix}.f32`;
      suffix += 1;
    }
    this.usedPaths.add(relPath);
    const buf = Buffer.alloc(m.data.length * 4);
    for (let i = 0; i < m.data.length; i++) {
      buf.writeFloatLE(m.data[i], i * 4);
    }
    atomicWrite(join(this.dir, relPath), buf);
    this.entries.push({
      name,
      path: relPath,
      rows: m.rows,
      cols: m.cols,
      dtype: "f32le",
      meta,
    });
  }

  /** Writes manifest.json; payloads are already on disk. */
  finish(): string {
    const doc: ManifestDoc = { format: MANIFEST_FORMAT, entries: this.entries };
    atomicWrite(this.manifestPath, JSON.stringify(doc, null, 2));
    return this.manifestPath;
  }
}

export function readManifest(manifestPath: string): ManifestDoc {
  const doc = JSON.parse(readFileSync(manifestPath, "utf-8")) as ManifestDoc;
  if (!Array.isArray(doc.entries)) {
    throw new ManifestError(`manifest ${manifestPath} has no entries array`);
  }
  return doc;
}

export function readEntry(manifestPath: string, name: string): Matrix {
  const doc = readManifest(manifestPath);
  const entry = doc.entries.find((e) => e.name === name);
  if (!entry) throw new ManifestError(`entry ${name} not in ${manifestPath}`);
  const raw = readFileSync(join(dirname(manifestPath), entry.path));
  const expected = entry.rows * entry.cols * 4;
  if (raw.byteLength !== expected) {
    throw new ManifestError(
      `payload for ${name} is ${raw.byteLength} bytes, expected ${expected}`,
    );
  }
  const data = new Float32Array(entry.rows * entry.cols);
  for (let i = 0; i < data.length; i++) data[i] = raw.readFloatLE(i * 4);
  return { rows: entry.rows, cols: entry.cols, data };
}
