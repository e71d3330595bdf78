"""Run manifest: config snapshot, stage keys, artifact checksums, metrics.

The manifest is pure content: no timestamps, no absolute paths. Two runs with
the same config, data, and seed therefore produce byte-identical manifests.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

from . import __version__


def sha256_file(path: str | Path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


class RunManifest:
    FILENAME = "manifest.json"

    def __init__(self, out_dir: str | Path, config_snapshot: dict):
        self.out_dir = Path(out_dir)
        self.data: dict = {
            "tool_version": __version__,
            "config": config_snapshot,
            "stages": {},
            "stage_runs": {},
            "folds": [],
            "results": {},
            "audit": {},
        }

    @property
    def path(self) -> Path:
        return self.out_dir / self.FILENAME

    @classmethod
    def load(cls, out_dir: str | Path) -> "RunManifest":
        out_dir = Path(out_dir)
        manifest = cls(out_dir, {})
        manifest.data = json.loads((out_dir / cls.FILENAME).read_text(encoding="utf-8"))
        return manifest

    @classmethod
    def load_or_new(cls, out_dir: str | Path, config_snapshot: dict) -> "RunManifest":
        out_dir = Path(out_dir)
        if (out_dir / cls.FILENAME).exists():
            manifest = cls.load(out_dir)
            if manifest.data.get("config") != config_snapshot:
                # Config changed: keep cached stage dirs on disk (their keys
                # no longer match, so they rebuild), but reset the book.
                manifest = cls(out_dir, config_snapshot)
            return manifest
        return cls(out_dir, config_snapshot)

    def save(self) -> None:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        self.path.write_text(
            json.dumps(self.data, sort_keys=True, indent=2) + "\n", encoding="utf-8"
        )

    # -- stage bookkeeping ----------------------------------------------------

    def record_stage(self, name: str, key: str, stage_dir: Path,
                     outputs: list[Path], built: bool) -> None:
        rel = {
            str(p.relative_to(self.out_dir)): sha256_file(p)
            for p in sorted(outputs)
        }
        self.data["stages"][name] = {"key": key, "outputs": rel}
        if built:
            runs = self.data["stage_runs"]
            runs[name.split("/")[-1]] = runs.get(name.split("/")[-1], 0) + 1

    def stage_entry(self, name: str) -> dict | None:
        return self.data["stages"].get(name)

    def stage_output(self, name: str, filename: str) -> Path | None:
        entry = self.stage_entry(name)
        if entry is None:
            return None
        for rel in entry["outputs"]:
            if Path(rel).name == filename:
                return self.out_dir / rel
        return None
