"""
Result cache keyed by the SHA-256 of the canonical JSON of a run configuration
and the package version. A manifest under <output>/.cache lists the artifacts
of the run with the SHA-256 of their contents; a hit requires every artifact to
still exist with the recorded digest.
"""

import hashlib
import json
import logging
from pathlib import Path

from pydantic import BaseModel

from composite_spectra import __version__
from composite_spectra.settings import ExperimentConfig

logger = logging.getLogger(__name__)

CACHE_DIR = ".cache"


class CacheManifest(BaseModel):
    key: str
    version: str
    command: str
    artifacts: list[str]
    digests: dict[str, str]
    exit_status: int


def cache_key(config: ExperimentConfig) -> str:
    payload = {"config": config.cache_payload(), "version": __version__}
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class ResultCache:
    """
    Lookup and store of run manifests.
    :param output_dir: Directory the artifacts are written to.
    """

    def __init__(self, output_dir: Path):
        self._output_dir = output_dir
        self._cache_dir = output_dir / CACHE_DIR

    def _manifest_path(self, key: str) -> Path:
        return self._cache_dir / f"{key}.json"

    def lookup(self, config: ExperimentConfig) -> CacheManifest | None:
        path = self._manifest_path(cache_key(config))
        if not path.exists():
            return None
        try:
            manifest = CacheManifest.model_validate_json(path.read_text())
        except ValueError:
            logger.info(f"Ignoring unreadable cache manifest {path.name}")
            return None
        missing = [a for a in manifest.artifacts if not (self._output_dir / a).exists()]
        if missing:
            logger.info(f"Cache entry {manifest.key[:12]} is stale, missing {missing}")
            return None
        # Artifact names are shared between configurations of a command
        changed = [
            a
            for a in manifest.artifacts
            if manifest.digests.get(a) != file_digest(self._output_dir / a)
        ]
        if changed:
            logger.info(f"Cache entry {manifest.key[:12]} is stale, overwritten {changed}")
            return None
        logger.info(f"Cache hit {manifest.key[:12]} for '{manifest.command}'")
        return manifest

    def store(
        self, config: ExperimentConfig, artifacts: list[Path], exit_status: int
    ) -> CacheManifest:
        key = cache_key(config)
        names = [str(p.relative_to(self._output_dir)) for p in artifacts]
        manifest = CacheManifest(
            key=key,
            version=__version__,
            command=config.command,
            artifacts=names,
            digests={name: file_digest(p) for name, p in zip(names, artifacts)},
            exit_status=exit_status,
        )
        self._cache_dir.mkdir(parents=True, exist_ok=True)
        self._manifest_path(key).write_text(manifest.model_dump_json(indent=2) + "\n")
        return manifest
