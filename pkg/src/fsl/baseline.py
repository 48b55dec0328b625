"""Append-only JSONL store of recorded ratio bands.

Records are keyed by (check, fixture, canonical params). Lookups scan the
shipped read-only layer first and the user store second, so the latest
line wins. Nothing is written unless the caller asks for it.
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import subprocess
from pathlib import Path

ENV_VAR = "FSL_BASELINE_DIR"
FILENAME = "baselines.jsonl"
SHIPPED = Path(__file__).with_name("data") / FILENAME


def canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=True)


def digest(obj) -> str:
    return hashlib.sha256(canonical(obj).encode()).hexdigest()[:16]


def record_key(check: str, fixture: str, params: dict) -> str:
    return f"{check}|{fixture}|{digest(params)}"


def default_dir() -> Path:
    env = os.environ.get(ENV_VAR)
    if env:
        return Path(env)
    base = os.environ.get("XDG_DATA_HOME") or os.path.join(os.path.expanduser("~"), ".local", "share")
    return Path(base) / "fsl" / "baselines"


def git_commit() -> str:
    try:
        out = subprocess.run(["git", "rev-parse", "--short", "HEAD"], cwd=Path(__file__).parent,
                             capture_output=True, text=True, timeout=5)
    except (OSError, subprocess.SubprocessError):
        return "unknown"
    return out.stdout.strip() if out.returncode == 0 and out.stdout.strip() else "unknown"


class BaselineStore:
    def __init__(self, root: Path | str | None = None, *, shipped: Path | None = SHIPPED):
        self.root = Path(root) if root is not None else default_dir()
        self.path = self.root / FILENAME
        self.shipped = shipped
        self._index: dict[str, dict] | None = None

    def _layers(self):
        if self.shipped is not None and self.shipped.exists() and self.shipped.resolve() != self.path.resolve():
            yield self.shipped
        if self.path.exists():
            yield self.path

    def _load(self) -> dict[str, dict]:
        if self._index is None:
            idx: dict[str, dict] = {}
            for layer in self._layers():
                with open(layer, encoding="utf-8") as fh:
                    for line in fh:
                        line = line.strip()
                        if line:
                            rec = json.loads(line)
                            idx[rec["key"]] = rec
            self._index = idx
        return self._index

    def __len__(self) -> int:
        return len(self._load())

    def get(self, check: str, fixture: str, params: dict) -> dict | None:
        return self._load().get(record_key(check, fixture, params))

    def bands(self, check: str, fixture: str, params: dict) -> dict | None:
        rec = self.get(check, fixture, params)
        return None if rec is None else rec["bands"]

    def append(self, check: str, fixture: str, params: dict, bands: dict, config_hash: str,
               date: str | None = None) -> dict:
        rec = {"key": record_key(check, fixture, params), "check": check, "fixture": fixture, "params": params,
               "bands": bands,
               "provenance": {"date": date or _dt.date.today().isoformat(), "commit": git_commit(),
                              "config_hash": config_hash}}
        self.root.mkdir(parents=True, exist_ok=True)
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(canonical(rec) + "\n")
        self._load()[rec["key"]] = rec
        return rec
