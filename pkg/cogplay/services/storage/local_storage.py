"""
Local filesystem artifact store.
Keeps track of what it wrote so a failed run can remove its partial outputs.
"""
import logging
from pathlib import Path
from typing import List

from ...errors import ArtifactIOError
from .base import ArtifactStore

logger = logging.getLogger(__name__)


class LocalArtifactStore(ArtifactStore):
    """Artifacts as plain files under one root directory."""

    def __init__(self, base_path: str | Path):
        self.base_path = Path(base_path)
        self._written: List[Path] = []

    def _ensure_dir(self, path: Path):
        """Ensure directory exists."""
        path.parent.mkdir(parents=True, exist_ok=True)

    def get_full_path(self, name: str) -> Path:
        return self.base_path / name

    def write_bytes(self, name: str, data: bytes) -> Path:
        dest_path = self.get_full_path(name)
        try:
            self._ensure_dir(dest_path)
            dest_path.write_bytes(data)
        except OSError as e:
            raise ArtifactIOError(f"cannot write {dest_path}: {e}")
        if dest_path not in self._written:
            self._written.append(dest_path)
        logger.debug(f"Wrote {len(data)} bytes to {dest_path}")
        return dest_path

    def read_bytes(self, name: str) -> bytes:
        source_path = self.get_full_path(name)
        try:
            return source_path.read_bytes()
        except FileNotFoundError:
            raise ArtifactIOError(f"artifact not found: {source_path}")
        except OSError as e:
            raise ArtifactIOError(f"cannot read {source_path}: {e}")

    def exists(self, name: str) -> bool:
        return self.get_full_path(name).exists()

    def list(self, pattern: str = "*") -> List[str]:
        if not self.base_path.exists():
            return []
        return sorted(
            str(p.relative_to(self.base_path)) for p in self.base_path.glob(pattern) if p.is_file()
        )

    def rollback(self) -> int:
        removed = 0
        for path in reversed(self._written):
            try:
                path.unlink()
                removed += 1
            except FileNotFoundError:
                continue
            except OSError as e:
                logger.error(f"Could not remove partial output {path}: {e}")
                continue

            # Drop directories the run created and left empty
            parent = path.parent
            try:
                while parent != self.base_path and parent.is_relative_to(self.base_path):
                    if any(parent.iterdir()):
                        break
                    parent.rmdir()
                    parent = parent.parent
            except OSError:
                pass

        self._written.clear()
        if removed:
            logger.info(f"Removed {removed} partial outputs from {self.base_path}")
        return removed
