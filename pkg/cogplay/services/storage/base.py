"""
Abstract base class for artifact stores.
Implements Strategy pattern so stages never touch the filesystem directly.
"""
from abc import ABC, abstractmethod
from pathlib import Path
from typing import List


class ArtifactStore(ABC):
    """Where a run's logs, tables and reports are written."""

    @abstractmethod
    def write_bytes(self, name: str, data: bytes) -> Path:
        """
        Write an artifact.

        Args:
            name: Path relative to the store root
            data: Raw content

        Returns:
            Location of the written artifact
        """
        pass

    @abstractmethod
    def read_bytes(self, name: str) -> bytes:
        """
        Read an artifact previously written to (or placed in) the store.

        Raises:
            ArtifactIOError: artifact missing or unreadable
        """
        pass

    @abstractmethod
    def exists(self, name: str) -> bool:
        pass

    @abstractmethod
    def list(self, pattern: str = "*") -> List[str]:
        """Names of stored artifacts matching a glob pattern, sorted."""
        pass

    @abstractmethod
    def rollback(self) -> int:
        """
        Remove every artifact written through this store instance.

        Returns:
            Number of artifacts removed
        """
        pass

    def write_text(self, name: str, text: str) -> Path:
        return self.write_bytes(name, text.encode("utf-8"))

    def read_text(self, name: str) -> str:
        return self.read_bytes(name).decode("utf-8")
