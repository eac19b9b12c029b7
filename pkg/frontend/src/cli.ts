#!/usr/bin/env node
/** edgetree-console: stream a flow CSV to a timing-harness binary and print
 * per-record predictions plus the aggregate inference time. */

import { readFileSync } from "node:fs";

import yargs from "yargs";
import { hideBin } from "yargs/helpers";

import { parseFlowCsv } from "./csv.js";
import { HostProcessDevice } from "./device.js";
import { streamRecords } from "./runner.js";

async function main(): Promise<number> {
  const argv = await yargs(hideBin(process.argv))
    .option("binary", {
      type: "string",
      demandOption: true,
      describe: "host-compiled firmware binary",
    })
    .option("csv", {
      type: "string",
      demandOption: true,
      describe: "flow dataset to stream",
    })
    .option("label-column", { type: "string", default: "Label" })
    .option("limit", { type: "number", describe: "send only the first N records" })
    .strict()
    .parse();

  const table = parseFlowCsv(readFileSync(argv.csv, "utf-8"), argv.labelColumn);
  const limit = argv.limit ?? table.records.length;
  const records = table.records.slice(0, limit);
  const labels = table.labels.slice(0, limit);

  const device = new HostProcessDevice(argv.binary);
  try {
    const run = await streamRecords(device, records, labels, (r) => {
      console.log(`${r.predictedClass},${r.elapsedMicros},${r.iterations}`);
    });
    const s = run.summary;
    console.log(
      `records=${s.records} mean_elapsed_us=${s.meanElapsedMicros.toFixed(1)} ` +
        `mean_ns_per_inference=${s.avgNsPerInference.toFixed(2)} ` +
        `label_agreement=${(run.agreementWithLabels * 100).toFixed(2)}%`,
    );
    return 0;
  } finally {
    await device.close();
  }
}

main()
  .then((code) => process.exit(code))
  .catch((err) => {
    console.error(`error: ${err.message}`);
    process.exit(1);
  });
