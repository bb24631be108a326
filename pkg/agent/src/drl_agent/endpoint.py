"""Environment endpoints: line-delimited JSON over stdio or TCP.

An :class:`Endpoint` wraps one protocol conversation.  The usual way to
get one is :meth:`Endpoint.spawn`, which starts an environment server
subprocess (``<server_cmd> serve <instance> ...``) and owns its pipes;
:meth:`Endpoint.connect_tcp` joins a server that is already listening,
and the plain constructor wraps arbitrary text streams (that is how the
process acts as a pure stdio client under an external harness).  Instance
files for training come from :func:`generate_instance_file`, which runs
the server package's generator CLI.
"""

from __future__ import annotations

import json
import shlex
import socket
import subprocess
from pathlib import Path
from typing import IO

from .errors import ServerError

__all__ = ["Endpoint", "generate_instance_file"]


class Endpoint:
    """One live protocol conversation (reads messages, writes acts)."""

    def __init__(self, infile: IO[str], outfile: IO[str], *,
                 proc: subprocess.Popen | None = None, name: str = ""):
        self.infile = infile
        self.outfile = outfile
        self.proc = proc
        self.name = name
        self.closed = False

    @classmethod
    def spawn(
        cls,
        instance: str | Path,
        *,
        server_cmd: str = "ipps",
        reward: str = "naive",
        episodes: int | None = None,
    ) -> "Endpoint":
        """Start a server subprocess playing ``instance`` on stdio."""
        cmd = shlex.split(server_cmd) + ["serve", str(instance),
                                         "--reward", reward]
        if episodes is not None:
            cmd += ["--episodes", str(episodes)]
        try:
            proc = subprocess.Popen(
                cmd, stdin=subprocess.PIPE, stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL, text=True, bufsize=1)
        except OSError as exc:
            raise ServerError(f"cannot start server {cmd!r}: {exc}") from exc
        return cls(proc.stdout, proc.stdin, proc=proc, name=str(instance))

    @classmethod
    def connect_tcp(cls, host: str, port: int) -> "Endpoint":
        try:
            sock = socket.create_connection((host, port))
        except OSError as exc:
            raise ServerError(f"cannot connect to {host}:{port}: {exc}") from exc
        endpoint = cls(sock.makefile("r", encoding="utf-8"),
                       sock.makefile("w", encoding="utf-8"),
                       name=f"tcp:{host}:{port}")
        endpoint._sock = sock
        return endpoint

    def read(self) -> dict | None:
        """Next message, or None on EOF."""
        line = self.infile.readline()
        if not line:
            return None
        try:
            msg = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ServerError(
                f"{self.name or 'server'}: invalid JSON from server: {exc}"
            ) from exc
        if not isinstance(msg, dict):
            raise ServerError(f"{self.name or 'server'}: message must be an object")
        return msg

    def send(self, msg: dict) -> bool:
        """Write one message; returns False if the peer hung up."""
        try:
            self.outfile.write(json.dumps(msg) + "\n")
            self.outfile.flush()
            return True
        except (BrokenPipeError, ValueError, OSError):
            return False

    def close(self) -> None:
        if self.closed:
            return
        self.closed = True
        for stream in (self.outfile, self.infile):
            try:
                stream.close()
            except OSError:
                pass
        sock = getattr(self, "_sock", None)
        if sock is not None:
            try:
                sock.close()
            except OSError:
                pass
        if self.proc is not None:
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait(timeout=10)

    def __enter__(self) -> "Endpoint":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def generate_instance_file(
    path: str | Path,
    *,
    jobs: int,
    machines: int,
    seed: int,
    cfg_path: str | Path | None = None,
    server_cmd: str = "ipps",
) -> Path:
    """Write one synthetic instance via the server package's generator."""
    path = Path(path)
    cmd = shlex.split(server_cmd) + [
        "generate", "--jobs", str(jobs), "--machines", str(machines),
        "--seed", str(seed), "-o", str(path),
    ]
    if cfg_path is not None:
        cmd += ["--cfg", str(cfg_path)]
    try:
        done = subprocess.run(cmd, capture_output=True, text=True, timeout=120)
    except (OSError, subprocess.TimeoutExpired) as exc:
        raise ServerError(f"generator failed: {cmd!r}: {exc}") from exc
    if done.returncode != 0:
        raise ServerError(
            f"generator exited {done.returncode}: {done.stderr.strip()}")
    return path
