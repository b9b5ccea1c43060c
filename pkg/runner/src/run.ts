/**
 * Core execution: run one snippet file under a wall-clock limit, capture
 * both streams through pipes, and kill the whole process group on timeout
 * (SIGTERM, then SIGKILL after a grace period).
 *
 * The snippet starts detached in its own process group, so children it
 * spawns die with it instead of orphaning past the runner's lifetime.
 */

import { spawn } from "child_process";
import { RunnerReport, STREAM_CAP_BYTES, truncate } from "./report";

export const GRACE_MS = 2000;

export interface RunOptions {
  snippetFile: string;
  timeoutS: number;
  workdir: string;
  /** Overridable for tests; defaults to SNIPPET_PYTHON or python3. */
  interpreter?: string;
}

function killGroup(pid: number, signal: NodeJS.Signals): void {
  try {
    process.kill(-pid, signal);
  } catch {
    // group already gone
  }
}

export function run(options: RunOptions): Promise<RunnerReport> {
  const interpreter =
    options.interpreter ?? process.env.SNIPPET_PYTHON ?? "python3";
  const started = process.hrtime.bigint();
  const wallSeconds = () =>
    Number(process.hrtime.bigint() - started) / 1e9;

  return new Promise((resolve) => {
    let settled = false;
    let timedOut = false;
    let stdoutBuf = "";
    let stderrBuf = "";
    const timers: NodeJS.Timeout[] = [];

    const finish = (report: RunnerReport) => {
      if (settled) return;
      settled = true;
      for (const t of timers) clearTimeout(t);
      resolve(report);
    };

    let child;
    try {
      child = spawn(interpreter, [options.snippetFile], {
        cwd: options.workdir,
        detached: true,
        stdio: ["ignore", "pipe", "pipe"],
      });
    } catch (err) {
      finish({
        exit_code: 127,
        timed_out: false,
        stdout: "",
        stderr: `cannot start interpreter '${interpreter}': ${String(err)}`,
        wall_time_s: wallSeconds(),
      });
      return;
    }

    child.stdout.on("data", (chunk: Buffer) => {
      stdoutBuf += chunk.toString("utf-8");
    });
    child.stderr.on("data", (chunk: Buffer) => {
      stderrBuf += chunk.toString("utf-8");
    });

    child.on("error", (err: NodeJS.ErrnoException) => {
      finish({
        exit_code: 127,
        timed_out: false,
        stdout: "",
        stderr: `cannot start interpreter '${interpreter}': ${err.message}`,
        wall_time_s: wallSeconds(),
      });
    });

    const pid = child.pid;
    timers.push(
      setTimeout(() => {
        timedOut = true;
        if (pid) killGroup(pid, "SIGTERM");
        timers.push(
          setTimeout(() => {
            if (pid) killGroup(pid, "SIGKILL");
          }, GRACE_MS)
        );
        // Absolute backstop: emit even if 'close' never fires because some
        // descendant holds the pipes open despite the group SIGKILL.
        timers.push(
          setTimeout(() => {
            finish({
              exit_code: 124,
              timed_out: true,
              stdout: truncate(stdoutBuf),
              stderr: truncate(stderrBuf),
              wall_time_s: wallSeconds(),
            });
          }, GRACE_MS * 2)
        );
      }, options.timeoutS * 1000)
    );

    child.on("close", (code, signal) => {
      // One last sweep so nothing in the group outlives the report.
      if (pid) killGroup(pid, "SIGKILL");
      let exitCode = code ?? (signal ? 128 : -1);
      if (signal === "SIGTERM") exitCode = 124;
      if (signal === "SIGKILL") exitCode = 137;
      if (timedOut && exitCode === 0) exitCode = 124;
      finish({
        exit_code: exitCode,
        timed_out: timedOut,
        stdout: truncate(stdoutBuf, STREAM_CAP_BYTES),
        stderr: truncate(stderrBuf, STREAM_CAP_BYTES),
        wall_time_s: wallSeconds(),
      });
    });
  });
}
