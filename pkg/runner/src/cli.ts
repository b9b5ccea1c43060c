#!/usr/bin/env node
/**
 * CLI contract: snippet-runner --timeout <secs> --workdir <dir> <snippet-file>
 *
 * Exactly one JSON report goes to stdout, whatever happens; diagnostics of
 * the runner itself go to stderr. The runner process exits 0 whenever a
 * report was produced, so a nonzero exit means infrastructure failure.
 */

import { emit } from "./report";
import { run } from "./run";

interface CliArgs {
  timeoutS: number;
  workdir: string;
  snippetFile: string;
}

export function parseArgs(argv: string[]): CliArgs {
  let timeoutS: number | undefined;
  let workdir: string | undefined;
  let snippetFile: string | undefined;
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i];
    if (arg === "--timeout") {
      timeoutS = Number(argv[++i]);
    } else if (arg === "--workdir") {
      workdir = argv[++i];
    } else if (arg.startsWith("--")) {
      throw new Error(`unknown flag ${arg}`);
    } else if (snippetFile === undefined) {
      snippetFile = arg;
    } else {
      throw new Error(`unexpected extra argument ${arg}`);
    }
  }
  if (timeoutS === undefined || Number.isNaN(timeoutS) || timeoutS <= 0) {
    throw new Error("--timeout <secs> is required and must be positive");
  }
  if (!workdir) throw new Error("--workdir <dir> is required");
  if (!snippetFile) throw new Error("a snippet file argument is required");
  return { timeoutS, workdir, snippetFile };
}

async function main(): Promise<number> {
  let args: CliArgs;
  try {
    args = parseArgs(process.argv.slice(2));
  } catch (err) {
    // Unusable arguments: no meaningful report is possible. This is the one
    // case where the runner exits nonzero without a report.
    process.stderr.write(`snippet-runner: ${String(err)}\n`);
    return 64;
  }
  try {
    const report = await run({
      snippetFile: args.snippetFile,
      timeoutS: args.timeoutS,
      workdir: args.workdir,
    });
    emit(report);
  } catch (err) {
    // The report channel must never go silent once arguments were valid.
    emit({
      exit_code: 125,
      timed_out: false,
      stdout: "",
      stderr: `runner failure: ${String(err)}`,
      wall_time_s: 0,
    });
  }
  return 0;
}

main().then((code) => {
  process.exitCode = code;
});
