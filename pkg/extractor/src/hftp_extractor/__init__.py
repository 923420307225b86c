"""Transformer activation extractor for the HFTP activation file format."""

from .corpus import BoundaryAlignmentError, read_corpus, segment_units, shuffle_control
from .manifest import ExtractionManifest, load_manifest
from .extract import extract_activations

__version__ = "0.1.0"
