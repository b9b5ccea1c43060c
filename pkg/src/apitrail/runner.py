"""Bundled snippet runner (``python -m apitrail.runner``).

Executes one snippet file under a wall-clock limit and emits exactly one
JSON report object on its own standard output, whatever the snippet does:
the snippet's streams are captured through pipes, so even report-like text
printed by the snippet lands inside the report's ``stdout`` field. The
snippet runs in its own session; on timeout the whole process group gets
SIGTERM, then SIGKILL after a grace period.

The interpreter defaults to the running Python and can be overridden with
the ``SNIPPET_PYTHON`` environment variable. A plug-compatible runner can
be swapped in through the sandbox's ``runner_cmd`` setting.
"""

from __future__ import annotations

import argparse
import json
import os
import signal
import subprocess
import sys
import time

GRACE_S = 2.0
STREAM_CAP_BYTES = 64 * 1024


def _truncate(text: str, cap: int = STREAM_CAP_BYTES) -> str:
    return text if len(text) <= cap else text[:cap]


def _kill_group(proc: subprocess.Popen, sig: int) -> None:
    try:
        os.killpg(proc.pid, sig)
    except (ProcessLookupError, PermissionError):
        pass


def run(snippet_file: str, timeout: float, workdir: str) -> dict:
    """Execute the snippet and build the report dict."""
    interpreter = os.environ.get("SNIPPET_PYTHON") or sys.executable
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            [interpreter, snippet_file],
            cwd=workdir,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            text=True,
            errors="replace",
            start_new_session=True,
        )
    except (FileNotFoundError, PermissionError, NotADirectoryError) as exc:
        return {
            "exit_code": 127,
            "timed_out": False,
            "stdout": "",
            "stderr": f"cannot start interpreter {interpreter!r}: {exc}",
            "wall_time_s": time.monotonic() - start,
        }

    timed_out = False
    try:
        stdout, stderr = proc.communicate(timeout=timeout)
    except subprocess.TimeoutExpired:
        timed_out = True
        _kill_group(proc, signal.SIGTERM)
        try:
            stdout, stderr = proc.communicate(timeout=GRACE_S)
        except subprocess.TimeoutExpired:
            _kill_group(proc, signal.SIGKILL)
            try:
                stdout, stderr = proc.communicate(timeout=GRACE_S)
            except subprocess.TimeoutExpired:
                stdout, stderr = "", "process group would not die after SIGKILL"
    finally:
        # Whatever happened above, nothing from the snippet's group survives.
        if proc.poll() is None:
            _kill_group(proc, signal.SIGKILL)

    wall = time.monotonic() - start
    exit_code = proc.returncode if proc.returncode is not None else -9
    if timed_out and exit_code == 0:
        exit_code = 124
    return {
        "exit_code": int(exit_code),
        "timed_out": timed_out,
        "stdout": _truncate(stdout or ""),
        "stderr": _truncate(stderr or ""),
        "wall_time_s": wall,
    }


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="apitrail-runner")
    parser.add_argument("--timeout", type=float, required=True)
    parser.add_argument("--workdir", required=True)
    parser.add_argument("snippet_file")
    args = parser.parse_args(argv)
    try:
        report = run(args.snippet_file, args.timeout, args.workdir)
    except Exception as exc:  # the report channel must never go silent
        report = {
            "exit_code": 125,
            "timed_out": False,
            "stdout": "",
            "stderr": f"runner failure: {type(exc).__name__}: {exc}",
            "wall_time_s": 0.0,
        }
    json.dump(report, sys.stdout)
    sys.stdout.write("\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
