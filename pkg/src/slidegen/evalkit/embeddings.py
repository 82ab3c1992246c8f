"""Embedding providers for coverage and text-image relevance.

Every provider returns unit-norm rows. The toy provider is a hashed bag of
words and embeds an image through its caption, which keeps tests offline and
deterministic. Live providers wrap sentence-transformers models, which can
embed both text and images when the model is a CLIP variant.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np

from ..errors import SlidegenError
from .text import tokenize


class ProviderFailure(SlidegenError):
    pass


@dataclass(frozen=True)
class EvalImage:
    image_id: str
    path: Path | None
    caption: str = ""


class EmbeddingProvider(Protocol):
    kind: str  # "live_text" | "live_image_text" | "toy_hash"
    dimension: int

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray: ...

    def embed_images(self, images: Sequence[EvalImage]) -> np.ndarray: ...


def _normalize(rows: np.ndarray) -> np.ndarray:
    rows = np.asarray(rows, dtype=float)
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ProviderFailure("provider returned a zero vector")
    return rows / norms


class ToyHashProvider:
    """Hashed bag of words: token counts folded into ``dimension`` buckets, then normalized."""

    kind = "toy_hash"

    def __init__(self, dimension: int = 256):
        if dimension < 1:
            raise ValueError("dimension must be positive")
        self.dimension = dimension

    def _bucket(self, token: str) -> int:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big") % self.dimension

    def embed_texts(self, texts: Sequence[str]) -> np.ndarray:
        out = np.zeros((len(texts), self.dimension))
        for i, text in enumerate(texts):
            # Text without tokens still needs a unit vector; give it a bucket of its own.
            for tok in tokenize(text) or ["\x00empty"]:
                out[i, self._bucket(tok)] += 1.0
        return _normalize(out) if len(texts) else out

    def embed_images(self, images: Sequence[EvalImage]) -> np.ndarray:
        return self.embed_texts([im.caption for im in images])


class StaticProvider:
    """Fixed vectors looked up by text (or image id); handy for precomputed embeddings."""

    kind = "static"

    def __init__(self, vectors: dict[str, Sequence[float]]):
        self._vectors = {k: np.asarray(v, dtype=float) for k, v in vectors.items()}
        dims = {v.shape for v in self._vectors.values()}
        if len(dims) != 1:
            raise ValueError("all vectors must have the same dimension")
        self.dimension = int(next(iter(dims))[0])

    def _lookup(self, keys) -> np.ndarray:
        try:
            rows = np.stack([self._vectors[k] for k in keys]) if keys else np.zeros((0, self.dimension))
        except KeyError as exc:
            raise ProviderFailure(f"no vector for {exc.args[0]!r}") from None
        return _normalize(rows) if len(keys) else rows

    def embed_texts(self, texts):
        return self._lookup(list(texts))

    def embed_images(self, images):
        return self._lookup([im.image_id for im in images])


class SentenceTransformerProvider:
    """A sentence-transformers model; image embedding requires a CLIP-style model."""

    def __init__(self, model_name: str, kind: str = "live_image_text", device: str | None = None):
        self.model_name = model_name
        self.kind = kind
        self._device = device
        self._model = None

    @property
    def model(self):
        if self._model is None:
            try:
                from sentence_transformers import SentenceTransformer
            except ImportError as exc:
                raise ProviderFailure("live embeddings need the 'embeddings' extra (sentence-transformers)") from exc
            try:
                self._model = SentenceTransformer(self.model_name, device=self._device)
            except Exception as exc:
                raise ProviderFailure(f"cannot load embedding model '{self.model_name}': {exc}") from exc
        return self._model

    @property
    def dimension(self) -> int:
        return int(self.model.get_sentence_embedding_dimension() or 0)

    def _encode(self, items) -> np.ndarray:
        try:
            rows = self.model.encode(items, normalize_embeddings=True, convert_to_numpy=True)
        except Exception as exc:
            raise ProviderFailure(f"{self.model_name}: {exc}") from exc
        return _normalize(rows)

    def embed_texts(self, texts):
        return self._encode(list(texts))

    def embed_images(self, images):
        from PIL import Image

        loaded = []
        for im in images:
            if im.path is None:
                raise ProviderFailure(f"image {im.image_id} has no file")
            with Image.open(im.path) as pic:
                loaded.append(pic.convert("RGB"))
        return self._encode(loaded)


def make_provider(spec: str, toy_dimension: int = 256, kind: str = "live_image_text") -> EmbeddingProvider:
    """``"toy"`` gives the hashed provider; anything else names a sentence-transformers model."""
    if spec == "toy":
        return ToyHashProvider(toy_dimension)
    return SentenceTransformerProvider(spec, kind)
