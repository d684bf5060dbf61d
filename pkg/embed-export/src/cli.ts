#!/usr/bin/env node
import { parseExportArgs } from "./args.js";
import { createTransformersEmbedder } from "./embedder.js";
import { exportEmbeddings } from "./export.js";

async function main(): Promise<number> {
  let job;
  try {
    job = parseExportArgs(process.argv.slice(2));
  } catch (err) {
    console.error((err as Error).message);
    return 2;
  }
  try {
    const embedder = await createTransformersEmbedder(job.model);
    const summary = await exportEmbeddings(job, embedder);
    console.log(
      `wrote ${summary.rows} rows (dim=${summary.dim}, pooling=${summary.pooling}) to ${job.outPath}`,
    );
    return 0;
  } catch (err) {
    console.error(`export failed: ${(err as Error).message}`);
    return 1;
  }
}

main().then((code) => {
  process.exitCode = code;
});
