/** Streams a flow table through a device and collects per-record results. */

import type { Device } from "./device.js";
import { summarize, type DeviceResponse, type TimingSummary } from "./protocol.js";

export interface RecordResult extends DeviceResponse {
  index: number;
  label: number;
}

export interface RunResult {
  perRecord: RecordResult[];
  summary: TimingSummary;
  agreementWithLabels: number;
}

export async function streamRecords(
  device: Device,
  records: readonly number[][],
  labels: readonly number[],
  onRecord?: (result: RecordResult) => void,
): Promise<RunResult> {
  if (records.length === 0) {
    throw new Error("no records to stream");
  }
  if (records.length !== labels.length) {
    throw new Error("record/label count mismatch");
  }
  const arity = records[0].length;
  for (const record of records) {
    if (record.length !== arity) {
      throw new Error("inconsistent feature counts; aborting before sending");
    }
  }
  const perRecord: RecordResult[] = [];
  for (let i = 0; i < records.length; i++) {
    const response = await device.exchange(records[i]);
    const result: RecordResult = { index: i, label: labels[i], ...response };
    perRecord.push(result);
    onRecord?.(result);
  }
  const agreed = perRecord.filter((r) => r.predictedClass === r.label).length;
  return {
    perRecord,
    summary: summarize(perRecord),
    agreementWithLabels: agreed / perRecord.length,
  };
}
