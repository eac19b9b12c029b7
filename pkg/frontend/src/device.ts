/** Transport to a running timing-harness: a host-compiled firmware binary
 * spoken to over stdio. Requests are answered strictly in order, one
 * response line per request line. */

import { spawn, type ChildProcessWithoutNullStreams } from "node:child_process";
import { createInterface, type Interface } from "node:readline";

import { formatRequest, parseResponse, type DeviceResponse } from "./protocol.js";

export interface Device {
  exchange(features: readonly number[]): Promise<DeviceResponse>;
  close(): Promise<void>;
}

export class HostProcessDevice implements Device {
  private proc: ChildProcessWithoutNullStreams;
  private lines: Interface;
  private queue: Array<(line: string) => void> = [];
  private failure: Error | null = null;

  constructor(binaryPath: string) {
    this.proc = spawn(binaryPath, [], { stdio: ["pipe", "pipe", "pipe"] });
    this.lines = createInterface({ input: this.proc.stdout });
    this.lines.on("line", (line) => {
      const pending = this.queue.shift();
      if (pending) pending(line);
    });
    this.proc.on("error", (err) => this.fail(err));
    // EPIPE from writing to a dead process surfaces here, not in the write callback
    this.proc.stdin.on("error", (err) => this.fail(err));
    this.proc.on("exit", (code) => {
      // any exit makes the device unusable; pending exchanges reject
      this.fail(new Error(`device process exited (code ${code})`));
    });
  }

  private fail(err: Error): void {
    this.failure = err;
    for (const pending of this.queue.splice(0)) pending("");
  }

  exchange(features: readonly number[]): Promise<DeviceResponse> {
    if (this.failure) return Promise.reject(this.failure);
    const request = formatRequest(features);
    return new Promise<DeviceResponse>((resolve, reject) => {
      this.queue.push((line) => {
        if (this.failure) return reject(this.failure);
        try {
          resolve(parseResponse(line));
        } catch (err) {
          reject(err);
        }
      });
      this.proc.stdin.write(request, (err) => {
        if (err) this.fail(err);
      });
    });
  }

  close(): Promise<void> {
    return new Promise((resolve) => {
      if (this.proc.exitCode !== null || this.proc.signalCode !== null) {
        resolve();
        return;
      }
      this.proc.once("exit", () => resolve());
      this.proc.stdin.end();
      setTimeout(() => {
        this.proc.kill();
        resolve();
      }, 5000).unref();
    });
  }
}
