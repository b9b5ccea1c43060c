"""Isolated execution of experimental snippets.

A snippet runs as a child process inside its own workspace directory via a
runner command implementing a fixed contract: the runner is invoked as
``<runner-cmd> --timeout <secs> --workdir <dir> <snippet-file>`` and writes
exactly one JSON report object to its standard output with fields
``exit_code`` (int), ``timed_out`` (bool), ``stdout`` (str), ``stderr``
(str) and ``wall_time_s`` (float). A nonzero runner exit with no report is
an infrastructure error, never a snippet failure.

What comes back is the structured observation the rest of the pipeline
reasons about: executability, error message, and captured program output.
Isolation is process + fresh directory + environment allowlist; OS-level
containment is out of scope.
"""

from __future__ import annotations

import json
import logging
import os
import shutil
import subprocess
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InfrastructureError, SandboxEnvironmentError, WorkspaceError

logger = logging.getLogger(__name__)

DEFAULT_TIMEOUT_S = 10.0
OUTPUT_CAP_CHARS = 8192
ERROR_TAIL_CHARS = 2000
TRUNCATION_MARKER = "…[truncated]"
RUNNER_GRACE_S = 2.0
# Extra slack for the runner process itself on top of the snippet budget.
RUNNER_OVERHEAD_S = 10.0
SNIPPET_FILENAME = "snippet.py"
DEFAULT_ENV_ALLOWLIST = ("PATH", "HOME", "LANG", "LC_ALL", "TMPDIR", "SNIPPET_PYTHON")


def default_runner_cmd() -> list[str]:
    """The bundled runner: same interpreter, module entry point."""
    return [sys.executable, "-m", "apitrail.runner"]


@dataclass
class ExecutionRequest:
    """One snippet bound to a workspace and a time budget."""

    snippet: str
    workspace: Path
    timeout: float = DEFAULT_TIMEOUT_S
    env_allowlist: tuple[str, ...] = DEFAULT_ENV_ALLOWLIST

    def __post_init__(self):
        self.workspace = Path(self.workspace)
        if self.timeout <= 0:
            raise ValueError("timeout must be positive")


@dataclass
class Observation:
    """What happened when a snippet ran.

    ``executable`` holds iff the exit code was zero and no timeout fired;
    ``error_message`` is empty exactly when the run was executable; the
    captured output is capped, with truncation flagged.
    """

    executable: bool
    error_message: str
    output: str
    exit_code: int
    wall_time: float
    timed_out: bool
    output_truncated: bool = False

    def to_json_dict(self) -> dict:
        """Persistable form. Wall time is volatile across runs and is kept
        out of artifacts so reruns with the same seed are byte-identical."""
        return {
            "executable": self.executable,
            "error_message": self.error_message,
            "output": self.output,
            "exit_code": self.exit_code,
            "timed_out": self.timed_out,
            "output_truncated": self.output_truncated,
        }


def _cap_output(text: str) -> tuple[str, bool]:
    if len(text) <= OUTPUT_CAP_CHARS:
        return text, False
    keep = OUTPUT_CAP_CHARS - len(TRUNCATION_MARKER)
    return text[:keep] + TRUNCATION_MARKER, True


def _child_env(allowlist: tuple[str, ...]) -> dict[str, str]:
    env = {name: os.environ[name] for name in allowlist if name in os.environ}
    env.setdefault("PYTHONDONTWRITEBYTECODE", "1")
    return env


def execute_snippet(
    req: ExecutionRequest, runner_cmd: list[str] | None = None
) -> Observation:
    """Run one snippet through the runner and structure the outcome.

    The snippet is written into the workspace (so its own directory is the
    working directory and earlier chain artifacts are visible) and the
    runner is invoked as a child process with a filtered environment.

    Raises:
        SandboxEnvironmentError: the runner command cannot be started.
        InfrastructureError: the runner produced no parseable report.
    """
    cmd = list(runner_cmd) if runner_cmd else default_runner_cmd()
    workspace = req.workspace
    if not workspace.is_dir():
        raise WorkspaceError(f"workspace {workspace} does not exist")
    snippet_path = workspace / SNIPPET_FILENAME
    snippet_path.write_text(req.snippet, encoding="utf-8")
    argv = cmd + ["--timeout", f"{req.timeout:g}", "--workdir", str(workspace), str(snippet_path)]
    try:
        proc = subprocess.run(
            argv,
            capture_output=True,
            text=True,
            env=_child_env(req.env_allowlist),
            timeout=req.timeout + RUNNER_GRACE_S + RUNNER_OVERHEAD_S,
        )
    except FileNotFoundError as exc:
        raise SandboxEnvironmentError(f"runner command not found: {cmd[0]!r}") from exc
    except subprocess.TimeoutExpired as exc:
        raise InfrastructureError(f"runner process hung past its own deadline: {argv}") from exc

    try:
        report = json.loads(proc.stdout)
        exit_code = int(report["exit_code"])
        timed_out = bool(report["timed_out"])
        stdout = str(report["stdout"])
        stderr = str(report["stderr"])
        wall_time = float(report["wall_time_s"])
    except (ValueError, KeyError, TypeError) as exc:
        raise InfrastructureError(
            f"unparseable runner report (runner exit {proc.returncode}): "
            f"stdout={proc.stdout[:300]!r} stderr={proc.stderr[:300]!r}"
        ) from exc

    executable = exit_code == 0 and not timed_out
    # Workspace paths are per-run temp dirs; scrubbing them keeps artifacts
    # (and prompts) byte-stable across reruns.
    scrub = lambda text: text.replace(str(workspace), "<workspace>")
    output, truncated = _cap_output(scrub(stdout))
    if executable:
        error_message = ""
    elif timed_out:
        error_message = f"timed out after {req.timeout:g} s"
        tail = scrub(stderr[-ERROR_TAIL_CHARS:].strip())
        if tail:
            error_message += f"\n{tail}"
    else:
        error_message = scrub(stderr[-ERROR_TAIL_CHARS:].strip()) or f"exited with code {exit_code}"
    return Observation(
        executable=executable,
        error_message=error_message,
        output=output,
        exit_code=exit_code,
        wall_time=wall_time,
        timed_out=timed_out,
        output_truncated=truncated,
    )


def prepare_workspace(
    problem_id: str,
    resource_manifest: list[str],
    resources_root: str | Path,
    base_dir: str | Path | None = None,
) -> Path:
    """Create a fresh workspace populated with a problem's resource files.

    Manifest paths resolve under ``resources_root/<problem_id>/``; entries
    prefixed ``shared/`` resolve under ``resources_root/shared/`` instead
    and are copied with the prefix stripped, so libraries common to many
    problems exist once on disk.

    Raises:
        WorkspaceError: when a declared resource file is missing.
    """
    resources_root = Path(resources_root)
    workspace = Path(tempfile.mkdtemp(prefix=f"apitrail-{problem_id}-", dir=base_dir))
    for rel in resource_manifest:
        rel_path = Path(rel)
        if rel_path.is_absolute() or ".." in rel_path.parts:
            raise WorkspaceError(f"{problem_id}: illegal resource path {rel!r}")
        if rel_path.parts and rel_path.parts[0] == "shared":
            source = resources_root / rel_path
            dest = workspace / Path(*rel_path.parts[1:])
        else:
            source = resources_root / problem_id / rel_path
            dest = workspace / rel_path
        if not source.is_file():
            raise WorkspaceError(f"{problem_id}: missing resource file {source}")
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(source, dest)
    return workspace


def clone_workspace(src: Path, base_dir: str | Path | None = None) -> Path:
    """Snapshot a workspace so sibling candidates can run independently."""
    dest = Path(tempfile.mkdtemp(prefix="apitrail-clone-", dir=base_dir))
    shutil.copytree(src, dest, dirs_exist_ok=True)
    return dest


def remove_workspace(path: Path) -> None:
    shutil.rmtree(path, ignore_errors=True)


@dataclass
class SandboxConfig:
    """How snippets get executed: runner command, timeout, retention."""

    runner_cmd: list[str] = field(default_factory=default_runner_cmd)
    timeout: float = DEFAULT_TIMEOUT_S
    keep_workspaces: bool = False
    workspace_root: Path | None = None

    def request(self, snippet: str, workspace: Path) -> ExecutionRequest:
        return ExecutionRequest(snippet=snippet, workspace=workspace, timeout=self.timeout)
