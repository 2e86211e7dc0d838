"""Backend registry: the embedded branch-and-bound or a file-based external adapter."""

from __future__ import annotations

import shlex
import subprocess
import tempfile
from pathlib import Path
from typing import Callable

from .bnb import branch_and_bound
from .lp import CutPool
from .program import (ConicProgram, SolveResult, SolverError, SolverOptions, read_result,
                      write_program)

Backend = Callable[[ConicProgram, SolverOptions], SolveResult]

_BACKENDS: dict[str, Backend] = {"embedded": branch_and_bound}


def register_backend(name: str, backend: Backend) -> None:
    _BACKENDS[name] = backend


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


class ExternalBackend:
    """Run ``command PROGRAM_FILE RESULT_FILE GAP`` and read the result file back.

    The program file is written by :func:`write_program`; the command must
    write a file readable by :func:`read_result`.
    """

    def __init__(self, command: str | list[str], timeout: float | None = None):
        self.command = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout = timeout

    def __call__(self, p: ConicProgram, opts: SolverOptions) -> SolveResult:
        with tempfile.TemporaryDirectory(prefix="iesuc-") as tmp:
            prog = Path(tmp) / "program.txt"
            out = Path(tmp) / "result.txt"
            write_program(p, prog)
            proc = subprocess.run([*self.command, str(prog), str(out), repr(opts.gap)],
                                  capture_output=True, text=True, timeout=self.timeout)
            if proc.returncode != 0 or not out.exists():
                raise SolverError(f"external solver failed ({proc.returncode}): "
                                  f"{proc.stderr.strip()[-500:]}")
            return read_result(out)


def solve(p: ConicProgram, opts: SolverOptions | None = None,
          backend: str = "embedded", pool: CutPool | None = None) -> SolveResult:
    """Solve with the named backend.

    ``pool`` carries outer-approximation cuts between embedded solves of
    programs that share rows and cones; other backends ignore it.
    """
    opts = opts or SolverOptions()
    if backend == "embedded" and _BACKENDS["embedded"] is branch_and_bound:
        return branch_and_bound(p, opts, pool)
    if backend.startswith("external:"):
        return ExternalBackend(backend.split(":", 1)[1])(p, opts)
    try:
        fn = _BACKENDS[backend]
    except KeyError:
        raise ValueError(f"unknown backend {backend!r}; available: "
                         f"{', '.join(available_backends())}, external:<command>") from None
    return fn(p, opts)
