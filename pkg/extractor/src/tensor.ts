/**
 * Minimal dense matrix math over Float32Array, row-major.
 *
 * Everything runs single-threaded with double-precision accumulation, so
 * repeated runs over the same inputs are bitwise deterministic.
 */

export interface Matrix {
  rows: number;
  cols: number;
  data: Float32Array;
}

export function zeros(rows: number, cols: number): Matrix {
  return { rows, cols, data: new Float32Array(rows * cols) };
}

export function fromNested(values: number[][]): Matrix {
  const rows = values.length;
  const cols = values[0]?.length ?? 0;
  const out = zeros(rows, cols);
  for (let i = 0; i < rows; i++) {
    for (let j = 0; j < cols; j++) {
      out.data[i * cols + j] = values[i][j];
    }
  }
  return out;
}

export function get(m: Matrix, i: number, j: number): number {
  return m.data[i * m.cols + j];
}

export function set(m: Matrix, i: number, j: number, value: number): void {
  m.data[i * m.cols + j] = value;
}

export function copy(m: Matrix): Matrix {
  return { rows: m.rows, cols: m.cols, data: new Float32Array(m.data) };
}

/** out = a @ b, with fresh storage. */
export function matmul(a: Matrix, b: Matrix): Matrix {
  if (a.cols !== b.rows) {
    throw new Error(`matmul: inner dims differ (${a.cols} vs ${b.rows})`);
  }
  const out = zeros(a.rows, b.cols);
  for (let i = 0; i < a.rows; i++) {
    for (let j = 0; j < b.cols; j++) {
      let acc = 0;
      for (let k = 0; k < a.cols; k++) {
        acc += a.data[i * a.cols + k] * b.data[k * b.cols + j];
      }
      out.data[i * b.cols + j] = acc;
    }
  }
  return out;
}

/** Adds a length-cols bias vector to every row, in place. */
export function addRowVector(m: Matrix, bias: Float32Array): Matrix {
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < m.cols; j++) {
      m.data[i * m.cols + j] += bias[j];
    }
  }
  return m;
}

export function addInPlace(a: Matrix, b: Matrix): Matrix {
  for (let i = 0; i < a.data.length; i++) {
    a.data[i] += b.data[i];
  }
  return a;
}

/** Per-row layer normalization with learned gain and bias. */
export function layerNorm(
  m: Matrix,
  gain: Float32Array,
  bias: Float32Array,
  eps = 1e-5,
): Matrix {
  const out = zeros(m.rows, m.cols);
  for (let i = 0; i < m.rows; i++) {
    let mean = 0;
    for (let j = 0; j < m.cols; j++) mean += m.data[i * m.cols + j];
    mean /= m.cols;
    let variance = 0;
    for (let j = 0; j < m.cols; j++) {
      const d = m.data[i * m.cols + j] - mean;
      variance += d * d;
    }
    variance /= m.cols;
    const inv = 1 / Math.sqrt(variance + eps);
    for (let j = 0; j < m.cols; j++) {
      out.data[i * m.cols + j] =
        (m.data[i * m.cols + j] - mean) * inv * gain[j] + bias[j];
    }
  }
  return out;
}

/** Tanh-approximation GELU, in place. */
export function gelu(m: Matrix): Matrix {
  const c = Math.sqrt(2 / Math.PI);
  for (let i = 0; i < m.data.length; i++) {
    const x = m.data[i];
    m.data[i] = 0.5 * x * (1 + Math.tanh(c * (x + 0.044715 * x * x * x)));
  }
  return m;
}

/** Row-wise softmax in place; entries at masked positions must be -Infinity. */
export function softmaxRows(m: Matrix): Matrix {
  for (let i = 0; i < m.rows; i++) {
    let max = -Infinity;
    for (let j = 0; j < m.cols; j++) {
      max = Math.max(max, m.data[i * m.cols + j]);
    }
    let total = 0;
    for (let j = 0; j < m.cols; j++) {
      const e = Math.exp(m.data[i * m.cols + j] - max);
      m.data[i * m.cols + j] = e;
      total += e;
    }
    for (let j = 0; j < m.cols; j++) {
      m.data[i * m.cols + j] /= total;
    }
  }
  return m;
}

/** Columns [start, end) as a fresh matrix. */
export function sliceCols(m: Matrix, start: number, end: number): Matrix {
  const cols = end - start;
  const out = zeros(m.rows, cols);
  for (let i = 0; i < m.rows; i++) {
    for (let j = 0; j < cols; j++) {
      out.data[i * cols + j] = m.data[i * m.cols + start + j];
    }
  }
  return out;
}

/** Rows [start, end) as a fresh matrix. */
export function sliceRows(m: Matrix, start: number, end: number): Matrix {
  const rows = end - start;
  const out = zeros(rows, m.cols);
  out.data.set(m.data.subarray(start * m.cols, end * m.cols));
  return out;
}

export function meanOfRows(m: Matrix): Float32Array {
  const out = new Float32Array(m.cols);
  for (let j = 0; j < m.cols; j++) {
    let acc = 0;
    for (let i = 0; i < m.rows; i++) acc += m.data[i * m.cols + j];
    out[j] = acc / m.rows;
  }
  return out;
}

export function row(m: Matrix, i: number): Float32Array {
  return m.data.slice(i * m.cols, (i + 1) * m.cols);
}
