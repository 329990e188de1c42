"""Run-directory management: creation, locking, config snapshots.

Every command executes inside a run directory. The fully resolved config is
snapshotted to config.json before any work starts, and a file lock guards
the directory against concurrent writers for the lifetime of the command.
"""

from __future__ import annotations

import datetime
import json
import os

from filelock import FileLock, Timeout

from .errors import VidbankError

RUN_ROOT_ENV = "VIDBANK_RUN_ROOT"


class RunLocked(VidbankError):
    """Another process is writing to this run directory."""


def default_run_dir(command: str) -> str:
    root = os.environ.get(RUN_ROOT_ENV, os.path.join(os.getcwd(), "runs"))
    stamp = datetime.datetime.now().strftime("%Y%m%d-%H%M%S-%f")
    return os.path.join(root, f"{command}-{stamp}")


class RunDirectory:
    """Context manager: create, lock, snapshot, then hand over the path."""

    def __init__(self, path: str, command: str, config_payload: dict):
        self.path = path
        self.command = command
        self.config_payload = config_payload
        self._lock = None

    def __enter__(self) -> str:
        os.makedirs(self.path, exist_ok=True)
        self._lock = FileLock(os.path.join(self.path, ".lock"))
        try:
            self._lock.acquire(timeout=0)
        except Timeout:
            raise RunLocked(f"run directory {self.path} is locked by "
                            f"another process") from None
        snapshot = {"command": self.command, "config": self.config_payload}
        with open(os.path.join(self.path, "config.json"), "w") as fh:
            json.dump(snapshot, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return self.path

    def __exit__(self, *exc):
        if self._lock is not None:
            self._lock.release()
        return False
