/**
 * Embedding-table file emission: header line with dim / pooling / model,
 * then one {id, vector} object per line. The file is written to a
 * temporary sibling and renamed into place so readers never observe a
 * partial table.
 */

import { closeSync, fsyncSync, openSync, renameSync, rmSync, writeSync } from "node:fs";
import { dirname, join } from "node:path";

export interface TableRow {
  id: string;
  vector: number[];
}

export function writeTableAtomic(
  outPath: string,
  header: { dim: number; pooling: string; model: string },
  rows: Iterable<TableRow>,
): number {
  const tmpPath = join(
    dirname(outPath),
    `.${Date.now()}-${process.pid}.embtmp`,
  );
  const fd = openSync(tmpPath, "w");
  let count = 0;
  try {
    writeSync(fd, JSON.stringify(header) + "\n");
    for (const row of rows) {
      writeSync(fd, JSON.stringify({ id: row.id, vector: row.vector }) + "\n");
      count++;
    }
    fsyncSync(fd);
    closeSync(fd);
    renameSync(tmpPath, outPath);
  } catch (err) {
    try {
      closeSync(fd);
    } catch {
      // already closed on the success path
    }
    rmSync(tmpPath, { force: true });
    throw err;
  }
  return count;
}
