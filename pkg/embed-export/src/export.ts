/**
 * Batch-sequential export of an embedding table from a text corpus.
 *
 * One output row per corpus id, in corpus order. The header dim is the
 * model's hidden size, locked by the first embedded text; any drift in a
 * later batch aborts the export (and the atomic write leaves no partial
 * file behind). Components are serialized at float32 round-trip
 * precision by default, matching model output precision.
 */

import { readCorpusTexts } from "./corpus.js";
import { TokenEmbedder } from "./embedder.js";
import { assertFinite, meanPool, toFloat32 } from "./pooling.js";
import { TableRow, writeTableAtomic } from "./table.js";

export type Pooling = "mean" | "native";
export type Precision = "float32" | "float64";

export interface ExportJob {
  corpusPath: string;
  model: string;
  pooling: Pooling;
  outPath: string;
  batchSize: number;
  precision?: Precision;
}

export interface ExportSummary {
  rows: number;
  dim: number;
  pooling: Pooling;
  model: string;
}

export async function exportEmbeddings(
  job: ExportJob,
  embedder: TokenEmbedder,
): Promise<ExportSummary> {
  if (job.batchSize < 1 || !Number.isInteger(job.batchSize)) {
    throw new Error(`batch size must be a positive integer, got ${job.batchSize}`);
  }
  if (job.pooling === "native" && embedder.nativeVectors === undefined) {
    throw new Error(
      `model ${embedder.modelName} does not define a text-level vector; ` +
        "use mean pooling",
    );
  }
  const texts = readCorpusTexts(job.corpusPath);
  const round = (job.precision ?? "float32") === "float32" ? toFloat32 : (v: number[]) => v;

  const rows: TableRow[] = [];
  let dim = embedder.dim ?? 0;
  for (let start = 0; start < texts.length; start += job.batchSize) {
    const batch = texts.slice(start, start + job.batchSize);
    const batchTexts = batch.map((t) => t.text);
    let vectors: number[][];
    if (job.pooling === "mean") {
      const tokens = await embedder.tokenVectors(batchTexts);
      vectors = tokens.map((doc, i) => {
        if (doc.length === 0) {
          throw new Error(`no tokens to pool for id ${JSON.stringify(batch[i].id)}`);
        }
        return meanPool(doc);
      });
    } else {
      vectors = await embedder.nativeVectors!(batchTexts);
    }
    if (vectors.length !== batch.length) {
      throw new Error(
        `embedder returned ${vectors.length} vectors for a batch of ${batch.length}`,
      );
    }
    for (let i = 0; i < batch.length; i++) {
      const vec = round(vectors[i]);
      if (dim === 0) {
        dim = vec.length;
      } else if (vec.length !== dim) {
        throw new Error(
          `dimension drift at id ${JSON.stringify(batch[i].id)}: ` +
            `got ${vec.length}, expected ${dim}`,
        );
      }
      assertFinite(vec, batch[i].id);
      rows.push({ id: batch[i].id, vector: vec });
    }
  }
  if (dim === 0) {
    throw new Error("embedder produced no vectors");
  }
  const written = writeTableAtomic(
    job.outPath,
    { dim, pooling: job.pooling, model: job.model },
    rows,
  );
  return { rows: written, dim, pooling: job.pooling, model: job.model };
}
