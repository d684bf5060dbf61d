export { meanPool, toFloat32 } from "./pooling.js";
export { readCorpusTexts } from "./corpus.js";
export { writeTableAtomic } from "./table.js";
export { exportEmbeddings } from "./export.js";
export type { ExportJob, ExportSummary, Pooling, Precision } from "./export.js";
export { createTransformersEmbedder } from "./embedder.js";
export type { TokenEmbedder } from "./embedder.js";
export { parseExportArgs } from "./args.js";
