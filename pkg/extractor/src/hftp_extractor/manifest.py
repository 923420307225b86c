"""Extraction manifests: what to run on which corpus, and where to put it."""

from __future__ import annotations

import json
from dataclasses import dataclass

BOUNDARY_FOR_LANGUAGE = {"zh": "syllable", "en": "word"}


@dataclass(frozen=True)
class ExtractionManifest:
    model: str
    corpus: str
    language: str
    boundary: str
    output: str
    seed: int = 0
    tap: str = "post"
    rate_hz: float = 4.0

    def __post_init__(self):
        if self.language not in BOUNDARY_FOR_LANGUAGE:
            raise ValueError(f"unknown language {self.language!r} (expected zh or en)")
        expected = BOUNDARY_FOR_LANGUAGE[self.language]
        if self.boundary != expected:
            raise ValueError(
                f"boundary policy {self.boundary!r} does not match language "
                f"{self.language!r} (expected {expected!r})"
            )
        if self.tap not in ("post", "pre"):
            raise ValueError(f"tap must be 'post' or 'pre', got {self.tap!r}")


def load_manifest(path) -> ExtractionManifest:
    with open(path, "r", encoding="utf-8") as fh:
        raw = json.load(fh)
    known = {"model", "corpus", "language", "boundary", "output", "seed", "tap", "rate_hz"}
    unknown = set(raw) - known
    if unknown:
        raise ValueError(f"unknown manifest keys: {sorted(unknown)}")
    return ExtractionManifest(**raw)
