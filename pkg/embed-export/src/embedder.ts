/**
 * Embedding backends.
 *
 * An embedder yields last-attention-layer token vectors per text (for
 * mean pooling here) and, when the model defines one, a single
 * text-level vector (pooling "native"). The production backend wraps
 * @huggingface/transformers and is loaded lazily so the exporter
 * installs and tests without the model runtime present.
 */

export interface TokenEmbedder {
  readonly modelName: string;
  /** Hidden size, when known before the first batch. */
  readonly dim?: number;
  /** Last-layer vectors per text, padding and special tokens excluded. */
  tokenVectors(texts: string[]): Promise<number[][][]>;
  /** Model-defined single vector per text; absent for bare encoders. */
  nativeVectors?(texts: string[]): Promise<number[][]>;
}

interface TensorLike {
  data: ArrayLike<number | bigint>;
  dims: number[];
}

function tensorRows(tensor: TensorLike): number[][][] {
  const [batch, tokens, hidden] = tensor.dims;
  const out: number[][][] = [];
  for (let b = 0; b < batch; b++) {
    const doc: number[][] = [];
    for (let t = 0; t < tokens; t++) {
      const start = (b * tokens + t) * hidden;
      const vec = new Array<number>(hidden);
      for (let h = 0; h < hidden; h++) {
        vec[h] = Number(tensor.data[start + h]);
      }
      doc.push(vec);
    }
    out.push(doc);
  }
  return out;
}

function maskRow(tensor: TensorLike, row: number, width: number): number[] {
  const out = new Array<number>(width);
  for (let i = 0; i < width; i++) {
    out[i] = Number(tensor.data[row * width + i]);
  }
  return out;
}

export async function createTransformersEmbedder(
  modelName: string,
): Promise<TokenEmbedder> {
  // Optional peer dependency: resolve at call time so the exporter builds
  // and tests without the model runtime installed.
  const runtime = "@huggingface/transformers";
  let hf: any;
  try {
    hf = await import(/* @vite-ignore */ runtime);
  } catch (err) {
    throw new Error(
      `${runtime} is not installed; install it to export ` +
        `from published models (${(err as Error).message})`,
    );
  }
  const tokenizer = await hf.AutoTokenizer.from_pretrained(modelName);
  const model = await hf.AutoModel.from_pretrained(modelName);
  const specialIds = new Set<number>(
    (tokenizer.all_special_ids ?? []).map((x: number | bigint) => Number(x)),
  );

  return {
    modelName,
    async tokenVectors(texts: string[]): Promise<number[][][]> {
      const enc = await tokenizer(texts, { padding: true, truncation: true });
      const output = await model(enc);
      const hidden: TensorLike = output.last_hidden_state;
      const [, tokens] = hidden.dims;
      const all = tensorRows(hidden);
      const result: number[][][] = [];
      for (let b = 0; b < texts.length; b++) {
        const attention = maskRow(enc.attention_mask, b, tokens);
        const ids = maskRow(enc.input_ids, b, tokens);
        const kept: number[][] = [];
        for (let t = 0; t < tokens; t++) {
          if (attention[t] !== 1) continue; // padding
          if (specialIds.has(ids[t])) continue; // begin/end markers
          kept.push(all[b][t]);
        }
        result.push(kept);
      }
      return result;
    },
    async nativeVectors(texts: string[]): Promise<number[][]> {
      const pipe = await hf.pipeline("feature-extraction", modelName);
      const out = await pipe(texts, { pooling: "mean", normalize: true });
      const [batch, width] = out.dims;
      const rows: number[][] = [];
      for (let b = 0; b < batch; b++) {
        rows.push(maskRow(out, b, width));
      }
      return rows;
    },
  };
}
