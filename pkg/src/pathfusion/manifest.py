"""Run manifests: the record needed to audit or re-run a command.

A manifest stores the resolved configuration, the single seed, sha256
digests of every input file, the paths written, and wall-clock timestamps.
Checkpoints and metric logs stay timestamp-free so identical runs remain
bit-identical; the manifest is the one artifact allowed to differ.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone

from .errors import DataError, FormatError

MANIFEST_NAME = "manifest.json"


def sha256_file(path) -> str:
    digest = hashlib.sha256()
    try:
        with open(path, "rb") as fh:
            for chunk in iter(lambda: fh.read(1 << 20), b""):
                digest.update(chunk)
    except OSError as exc:
        raise DataError(f"cannot digest {path}: {exc}") from None
    return digest.hexdigest()


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    command: str
    seed: int
    config: dict
    inputs: dict = field(default_factory=dict)   # path -> sha256
    outputs: list = field(default_factory=list)  # paths written
    started: str = ""
    finished: str = ""

    @classmethod
    def begin(cls, command: str, seed: int, config: dict,
              input_paths=()) -> "RunManifest":
        inputs = {str(p): sha256_file(p) for p in input_paths}
        return cls(command=command, seed=int(seed), config=config,
                   inputs=inputs, started=_now())

    def add_output(self, path) -> None:
        self.outputs.append(str(path))

    def finish(self) -> None:
        self.finished = _now()


def write_manifest(path, manifest: RunManifest) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(asdict(manifest), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_manifest(path) -> RunManifest:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON: {exc}") from None
    required = {"command", "seed", "config", "inputs", "outputs", "started"}
    missing = required - raw.keys()
    if missing:
        raise FormatError(
            f"{path}: manifest missing keys: " + ", ".join(sorted(missing))
        )
    return RunManifest(
        command=raw["command"], seed=raw["seed"], config=raw["config"],
        inputs=dict(raw["inputs"]), outputs=list(raw["outputs"]),
        started=raw["started"], finished=raw.get("finished", ""),
    )


def verify_inputs(manifest: RunManifest) -> list:
    """Paths whose current digest no longer matches the manifest."""
    stale = []
    for path, recorded in sorted(manifest.inputs.items()):
        if not os.path.exists(path):
            stale.append(path)
        elif sha256_file(path) != recorded:
            stale.append(path)
    return stale
