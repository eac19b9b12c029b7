/**
 * Wire protocol spoken by the timing-harness firmware.
 *
 * request:  comma-separated feature values, newline-terminated
 * response: P,<class>,T,<total_elapsed_microseconds>,N,<iterations>
 *
 * The device times only its inner prediction loop, so transfer time never
 * enters the elapsed figure. Average per-inference time is computed here,
 * on the host side, as total / iterations.
 */

export interface DeviceResponse {
  predictedClass: 0 | 1;
  elapsedMicros: number;
  iterations: number;
}

export interface TimingSummary {
  records: number;
  totalElapsedMicros: number;
  iterations: number;
  meanElapsedMicros: number;
  avgNsPerInference: number;
}

const RESPONSE_RE = /^P,([01]),T,(\d+),N,(\d+)$/;

export function formatRequest(features: readonly number[]): string {
  if (features.length === 0) {
    throw new Error("cannot send an empty feature vector");
  }
  for (const value of features) {
    if (!Number.isFinite(value)) {
      throw new Error(`non-finite feature value: ${value}`);
    }
  }
  return features.map((v) => v.toString()).join(",") + "\n";
}

export function parseResponse(line: string): DeviceResponse {
  const match = RESPONSE_RE.exec(line.trim());
  if (!match) {
    throw new Error(`malformed device response: ${JSON.stringify(line)}`);
  }
  return {
    predictedClass: Number(match[1]) as 0 | 1,
    elapsedMicros: Number(match[2]),
    iterations: Number(match[3]),
  };
}

export function summarize(responses: readonly DeviceResponse[]): TimingSummary {
  if (responses.length === 0) {
    throw new Error("no responses to summarize");
  }
  const iterations = responses[0].iterations;
  for (const r of responses) {
    if (r.iterations !== iterations) {
      throw new Error(
        `inconsistent iteration counts: ${r.iterations} vs ${iterations}`,
      );
    }
  }
  const total = responses.reduce((sum, r) => sum + r.elapsedMicros, 0);
  return {
    records: responses.length,
    totalElapsedMicros: total,
    iterations,
    meanElapsedMicros: total / responses.length,
    avgNsPerInference: (total * 1000) / (iterations * responses.length),
  };
}
