/**
 * The single structured report a runner invocation emits on its own stdout.
 * The snippet's streams live inside the report; they are never interleaved
 * with it, so the report channel stays parseable whatever the snippet prints.
 */
export interface RunnerReport {
  exit_code: number;
  timed_out: boolean;
  stdout: string;
  stderr: string;
  wall_time_s: number;
}

export const STREAM_CAP_BYTES = 64 * 1024;

export function truncate(text: string, cap: number = STREAM_CAP_BYTES): string {
  return text.length <= cap ? text : text.slice(0, cap);
}

/** Emit exactly one report object and nothing else on stdout. */
export function emit(report: RunnerReport): void {
  process.stdout.write(JSON.stringify(report) + "\n");
}
