/** Minimal reader for the numeric flow CSV format: one header row, one flow
 * per line, all feature cells numeric, binary 0/1 label column. */

export interface FlowTable {
  featureNames: string[];
  records: number[][];
  labels: number[];
}

export function parseFlowCsv(text: string, labelColumn = "Label"): FlowTable {
  const lines = text.split("\n").filter((line) => line.trim().length > 0);
  if (lines.length < 2) {
    throw new Error("flow CSV needs a header row and at least one record");
  }
  const header = lines[0].split(",").map((h) => h.trim());
  const labelIndex = header.indexOf(labelColumn);
  if (labelIndex < 0) {
    throw new Error(`label column ${JSON.stringify(labelColumn)} not in header`);
  }
  const featureNames = header.filter((_, i) => i !== labelIndex);
  const records: number[][] = [];
  const labels: number[] = [];
  for (let row = 1; row < lines.length; row++) {
    const cells = lines[row].split(",");
    if (cells.length !== header.length) {
      throw new Error(`row ${row + 1}: expected ${header.length} fields, got ${cells.length}`);
    }
    const features: number[] = [];
    for (let col = 0; col < cells.length; col++) {
      const value = Number(cells[col]);
      if (!Number.isFinite(value)) {
        throw new Error(`row ${row + 1}, column ${header[col]}: non-numeric cell`);
      }
      if (col === labelIndex) {
        if (value !== 0 && value !== 1) {
          throw new Error(`row ${row + 1}: label must be 0 or 1`);
        }
        labels.push(value);
      } else {
        features.push(value);
      }
    }
    records.push(features);
  }
  return { featureNames, records, labels };
}
