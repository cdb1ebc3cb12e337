# SPDX-FileCopyrightText: 2025-present Miguel Paraz <mparaz@mparaz.com>
#
# SPDX-License-Identifier: MIT

"""Module for writing and loading run manifests.

A run manifest records the command line, the input file digests, the seed
and the package version of one residkit invocation, so that the run can be
replayed and its outputs compared byte for byte.
"""

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence

from residkit.__about__ import __version__

MANIFEST_NAME = "manifest.json"
COMMANDS = ("residuals", "calibrate", "power", "diagnose", "simulate")


def file_digest(path: str | Path) -> str:
    """Return the sha256 hex digest of a file's bytes."""
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()


@dataclass
class RunManifest:
    """Reproducibility record for one command invocation.

    Attributes:
        command: Subcommand name
        argv: Arguments following the program name, replayable as given
        options: Resolved option values
        inputs: Input path to sha256 digest
        out_dir: Directory the outputs were written to
        base_dir: Working directory of the run, relative to the manifest's
            directory; relative paths in argv and inputs resolve against it
        seed: Master seed, when the command is stochastic
        version: residkit version that produced the outputs
    """

    command: str
    argv: List[str]
    options: Dict[str, Any] = field(default_factory=dict)
    inputs: Dict[str, str] = field(default_factory=dict)
    out_dir: str = "."
    base_dir: str = "."
    seed: int | None = None
    version: str = __version__

    @classmethod
    def create(
        cls,
        command: str,
        argv: Sequence[str],
        options: Dict[str, Any],
        input_paths: Sequence[str | Path],
        out_dir: str | Path,
        seed: int | None = None,
    ) -> "RunManifest":
        """Build a manifest, hashing every input file.

        Raises:
            ValueError: If the command is unknown
            FileNotFoundError: If an input path does not exist
        """
        if command not in COMMANDS:
            raise ValueError(f"Unknown command '{command}', expected one of {COMMANDS}")

        inputs = {}
        for path in input_paths:
            if not Path(path).is_file():
                raise FileNotFoundError(f"Input file not found: {path}")
            inputs[str(path)] = file_digest(path)

        return cls(
            command=command,
            argv=[str(arg) for arg in argv],
            options=options,
            inputs=inputs,
            out_dir=str(out_dir),
            base_dir=os.path.relpath(Path.cwd(), Path(out_dir).resolve()),
            seed=seed,
        )

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def write(self, out_dir: str | Path | None = None) -> Path:
        """Write the manifest as ``manifest.json`` into the output directory."""
        target = Path(out_dir if out_dir is not None else self.out_dir)
        target.mkdir(parents=True, exist_ok=True)
        path = target / MANIFEST_NAME
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.to_dict(), f, indent=2)
            f.write("\n")
        return path

    @classmethod
    def load(cls, manifest_path: str | Path) -> "RunManifest":
        """Load a manifest written by ``write``.

        Raises:
            FileNotFoundError: If the manifest doesn't exist
            ValueError: If the file is not valid JSON or misses fields
        """
        manifest_path = Path(manifest_path)
        if not manifest_path.exists():
            raise FileNotFoundError(f"Manifest file not found: {manifest_path}")

        if not manifest_path.is_file():
            raise ValueError(f"Manifest path is not a file: {manifest_path}")

        try:
            with open(manifest_path, encoding="utf-8") as f:
                data = json.load(f)
        except json.JSONDecodeError as e:
            raise ValueError(f"Invalid JSON in manifest file: {e}") from e

        missing = [key for key in ("command", "argv") if key not in data]
        if missing:
            raise ValueError(f"Manifest is missing field(s): {', '.join(missing)}")

        known = {key: data[key] for key in cls.__dataclass_fields__ if key in data}
        return cls(**known)

    def base_path(self, manifest_path: str | Path) -> Path:
        """Directory the recorded run was started from, located via the manifest file."""
        return Path(manifest_path).parent / self.base_dir

    def changed_inputs(self, base: str | Path = ".") -> List[str]:
        """Input paths whose current digest differs from the recorded one.

        Relative paths are resolved against ``base``.
        """
        changed = []
        for path, digest in self.inputs.items():
            resolved = Path(base) / path
            if not resolved.is_file() or file_digest(resolved) != digest:
                changed.append(path)
        return changed
