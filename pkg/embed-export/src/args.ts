/** CLI argument parsing, separated from main() so it can be unit-tested. */

import { parseArgs } from "node:util";

import { ExportJob, Pooling } from "./export.js";

export function parseExportArgs(argv: string[]): ExportJob {
  if (argv[0] !== "export") {
    throw new Error("usage: embed-export export --corpus PATH --model NAME --pooling {mean,native} --out PATH --batch-size N");
  }
  const { values } = parseArgs({
    args: argv.slice(1),
    options: {
      corpus: { type: "string" },
      model: { type: "string" },
      pooling: { type: "string", default: "mean" },
      out: { type: "string" },
      "batch-size": { type: "string", default: "32" },
      precision: { type: "string", default: "float32" },
    },
  });
  for (const key of ["corpus", "model", "out"] as const) {
    if (!values[key]) {
      throw new Error(`missing required flag --${key}`);
    }
  }
  if (values.pooling !== "mean" && values.pooling !== "native") {
    throw new Error(`--pooling must be 'mean' or 'native', got '${values.pooling}'`);
  }
  if (values.precision !== "float32" && values.precision !== "float64") {
    throw new Error(`--precision must be 'float32' or 'float64', got '${values.precision}'`);
  }
  const batchSize = Number(values["batch-size"]);
  if (!Number.isInteger(batchSize) || batchSize < 1) {
    throw new Error(`--batch-size must be a positive integer, got '${values["batch-size"]}'`);
  }
  return {
    corpusPath: values.corpus!,
    model: values.model!,
    pooling: values.pooling as Pooling,
    outPath: values.out!,
    batchSize,
    precision: values.precision as "float32" | "float64",
  };
}
