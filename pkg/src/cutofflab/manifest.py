"""Run manifests: what was run, with what inputs, producing which files.

The configuration digest hashes the canonical JSON form (sorted keys), so
it is stable under key reordering. The summary digest covers the content
hashes of all output artifacts, which makes reruns comparable byte for
byte without the manifest's own timestamp getting in the way.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

from . import __version__

__all__ = ["RunManifest", "config_digest", "file_sha256", "summary_digest"]


def config_digest(config: dict) -> str:
    canonical = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def summary_digest(hashes_by_name: dict[str, str]) -> str:
    lines = "".join(f"{name}:{digest}\n" for name, digest in sorted(hashes_by_name.items()))
    return hashlib.sha256(lines.encode("utf-8")).hexdigest()


@dataclass
class RunManifest:
    command: str
    config_digest: str
    seed: int | None
    input_paths: list[str] = field(default_factory=list)
    output_paths: list[dict] = field(default_factory=list)
    tool_version: str = __version__
    timestamp: str = ""

    def add_output(self, path: str | Path) -> None:
        path = Path(path)
        self.output_paths.append({"path": path.name, "sha256": file_sha256(path)})

    def outputs_digest(self) -> str:
        return summary_digest({o["path"]: o["sha256"] for o in self.output_paths})

    def write(self, path: str | Path) -> None:
        self.timestamp = datetime.now(timezone.utc).isoformat()
        payload = {
            "command": self.command,
            "config_digest": self.config_digest,
            "seed": self.seed,
            "input_paths": self.input_paths,
            "output_paths": self.output_paths,
            "summary_digest": self.outputs_digest(),
            "tool_version": self.tool_version,
            "timestamp": self.timestamp,
        }
        Path(path).write_text(
            json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )
