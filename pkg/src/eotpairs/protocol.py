"""Line-delimited subprocess drift protocol.

Candidate solvers integrate as child processes, never by linking. Request
lines carry ``x_1 ... x_D t`` in decimal text; the child answers one line
``v_1 ... v_D`` per request. Any malformed or wrong-arity line is a
protocol violation.
"""

from __future__ import annotations

import shlex
import subprocess
import threading
from typing import IO, Sequence

import numpy as np

from .dynamics import DriftField, optimal_drift
from .errors import ProtocolError
from .pair import BenchmarkPair


def _fmt(values: Sequence[float]) -> str:
    return " ".join("%.17g" % float(v) for v in values)


class SubprocessDrift(DriftField):
    """Drift field evaluated by a child process over the line protocol."""

    def __init__(self, command: str | list[str], dim: int):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.dim = dim
        self._proc = subprocess.Popen(
            argv, stdin=subprocess.PIPE, stdout=subprocess.PIPE, text=True, bufsize=1
        )

    def __call__(self, x: np.ndarray, t: float) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        lines = [_fmt(list(row) + [float(t)]) for row in x]
        payload = "\n".join(lines) + "\n"

        def pump() -> None:
            try:
                self._proc.stdin.write(payload)
                self._proc.stdin.flush()
            except (BrokenPipeError, ValueError):
                pass

        writer = threading.Thread(target=pump)
        writer.start()
        out = np.empty_like(x)
        try:
            for i in range(x.shape[0]):
                line = self._proc.stdout.readline()
                if not line:
                    raise ProtocolError("drift child closed its output mid-batch")
                parts = line.split()
                if len(parts) != self.dim:
                    raise ProtocolError(
                        f"drift child answered {len(parts)} values, expected {self.dim}"
                    )
                try:
                    out[i] = [float(p) for p in parts]
                except ValueError:
                    raise ProtocolError(f"drift child answered a malformed line: {line!r}") from None
        finally:
            writer.join()
        return out

    def close(self) -> None:
        if self._proc.stdin:
            try:
                self._proc.stdin.close()
            except (BrokenPipeError, ValueError):
                pass
        self._proc.wait(timeout=30)

    def __enter__(self) -> "SubprocessDrift":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def serve_drift(pair: BenchmarkPair, in_stream: IO[str], out_stream: IO[str]) -> None:
    """Answer drift requests for the pair's optimal drift until EOF."""
    d = pair.dim
    for line in in_stream:
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != d + 1:
            raise ProtocolError(f"request has {len(parts)} fields, expected {d + 1}")
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise ProtocolError(f"malformed request line: {line!r}") from None
        v = optimal_drift(pair, np.asarray(values[:d]), values[d])
        out_stream.write(_fmt(v) + "\n")
        out_stream.flush()
