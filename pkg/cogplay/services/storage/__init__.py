from .base import ArtifactStore
from .local_storage import LocalArtifactStore

__all__ = ["ArtifactStore", "LocalArtifactStore"]
