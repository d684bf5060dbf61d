/**
 * Pooling over per-token embedding vectors.
 *
 * Mean pooling averages the last-layer token vectors across all tokens of
 * one unit of text. Padding and special/begin tokens are expected to be
 * excluded by the embedder before vectors reach this function.
 */

export function meanPool(tokenVectors: number[][]): number[] {
  if (tokenVectors.length === 0) {
    throw new Error("mean pooling needs at least one token vector");
  }
  const dim = tokenVectors[0].length;
  if (dim === 0) {
    throw new Error("token vectors must be non-empty");
  }
  const sum = new Array<number>(dim).fill(0);
  for (const vec of tokenVectors) {
    if (vec.length !== dim) {
      throw new Error(
        `token vector length drift: expected ${dim}, got ${vec.length}`,
      );
    }
    for (let j = 0; j < dim; j++) {
      sum[j] += vec[j];
    }
  }
  return sum.map((s) => s / tokenVectors.length);
}

/** Round every component to float32 resolution (model outputs are f32). */
export function toFloat32(vector: number[]): number[] {
  return vector.map((x) => Math.fround(x));
}

export function assertFinite(vector: number[], id: string): void {
  for (const x of vector) {
    if (!Number.isFinite(x)) {
      throw new Error(`non-finite embedding component for id ${JSON.stringify(id)}`);
    }
  }
}
