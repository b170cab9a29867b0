"""Output directory handling and the run manifest.

:class:`ArtifactWriter` is the only way the command-line tools write
files: each CSV or SVG goes through it and is listed in the
:class:`RunManifest` saved next to the outputs.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import pandas as pd
from matplotlib.figure import Figure

from gfm_gfl_duality.io.plots import save_svg
from gfm_gfl_duality.io.tables import write_csv

logger = logging.getLogger(__name__)

OUTPUT_ENV = "GFM_GFL_DUALITY_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "gfm_gfl_output"
MANIFEST_NAME = "manifest.json"


def resolve_output_dir(flag: str | Path | None = None) -> Path:
    """Output directory from the flag, then the environment, then the default."""
    if flag:
        return Path(flag)
    env = os.environ.get(OUTPUT_ENV)
    if env:
        return Path(env)
    return Path(DEFAULT_OUTPUT_DIR)


@dataclass(slots=True)
class RunManifest:
    """Record of one command-line run.

    Parameters
    ----------
    command : str
        Subcommand name.
    inputs : list of str
        Input files or shipped data names.
    output_dir : str
        Directory all ``files`` are relative to.
    version : str
        Package version.
    overrides : dict
        Parameter overrides given on the command line.
    parameters : dict
        Every resolved parameter the run used.
    files : list of str
        Emitted files, relative to ``output_dir``, in write order.
    deterministic : bool
        Always ``True``; no computation uses a random seed.
    """

    command: str
    inputs: list[str] = field(default_factory=list)
    output_dir: str = ""
    version: str = ""
    overrides: dict[str, Any] = field(default_factory=dict)
    parameters: dict[str, Any] = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    deterministic: bool = True

    def to_json(self) -> str:
        """Stable JSON text (sorted keys, trailing newline)."""
        return json.dumps(asdict(self), indent=2, sort_keys=True, default=str) + "\n"


class ArtifactWriter:
    """Writes artifacts under one directory and tracks them in a manifest.

    Parameters
    ----------
    root : Path
        Output directory; created if missing.
    manifest : RunManifest
        Manifest that receives every written file.

    Raises
    ------
    OSError
        If ``root`` cannot be created or is not writable.
    """

    def __init__(self, root: Path, manifest: RunManifest) -> None:
        root.mkdir(parents=True, exist_ok=True)
        if not os.access(root, os.W_OK):
            raise PermissionError(f"output directory {root} is not writable")
        self.root = root
        self.manifest = manifest
        self.manifest.output_dir = str(root)

    def _path(self, rel: str) -> Path:
        path = self.root / rel
        self.manifest.files.append(rel)
        return path

    def csv(self, rel: str, frame: pd.DataFrame) -> Path:
        """Write a table."""
        path = write_csv(frame, self._path(rel))
        logger.info("wrote %s", path)
        return path

    def svg(self, rel: str, fig: Figure) -> Path:
        """Write a figure."""
        path = save_svg(fig, self._path(rel))
        logger.info("wrote %s", path)
        return path

    def finish(self) -> Path:
        """Write the manifest and return its path."""
        path = self.root / MANIFEST_NAME
        path.write_text(self.manifest.to_json(), encoding="utf-8")
        logger.info("wrote %s", path)
        return path
