"""Sandbox walk-through: the three observation shapes.

Every experimental program yields an observation: did it run (executable),
what went wrong (error_message), what it printed (output). The engine
reasons over these; a crash is data, not an exception.
"""

import tempfile
from pathlib import Path

from apitrail.sandbox import ExecutionRequest, execute_snippet


def show(title, snippet, timeout=10.0):
    workspace = Path(tempfile.mkdtemp(prefix="demo-sandbox-"))
    obs = execute_snippet(ExecutionRequest(snippet, workspace, timeout=timeout))
    print(f"--- {title}")
    print(f"  executable: {obs.executable}   exit={obs.exit_code}   "
          f"timed_out={obs.timed_out}")
    if obs.error_message:
        print(f"  error: {obs.error_message.splitlines()[-1]}")
    print(f"  output: {obs.output!r}")
    print()


show("clean run", "print(6 * 7)")

show("crash (output before the raise survives)",
     "print('progress so far')\nraise ValueError('wrong column')")

show("timeout (killed with a grace period)",
     "import time\nprint('starting', flush=True)\ntime.sleep(60)",
     timeout=1.5)

print("Workspaces chain: a program can read what the previous step wrote.")
workspace = Path(tempfile.mkdtemp(prefix="demo-sandbox-"))
execute_snippet(ExecutionRequest("open('state.txt', 'w').write('carried')", workspace))
obs = execute_snippet(ExecutionRequest("print(open('state.txt').read())", workspace))
print(f"  second step read: {obs.output!r}")
