"""Writer for the HFTP activation interchange format (HFTPACT1).

Layout: 8-byte magic, little-endian u32 n_layers / n_neurons / n_timepoints,
f64 rate_hz, u32 metadata length, UTF-8 JSON metadata (corpus_tag,
condition), float32 payload in (layer, neuron, timepoint) row-major order.
This mirrors the consumer's documented format; files are validated in tests
by reading them back with the hftp package.
"""

from __future__ import annotations

import json
import struct

import numpy as np

MAGIC = b"HFTPACT1"


def write_activation_file(values: np.ndarray, rate_hz: float, corpus_tag: str, path) -> None:
    values = np.ascontiguousarray(values, dtype="<f4")
    if values.ndim != 3:
        raise ValueError("activation payload must be (layers, neurons, timepoints)")
    if not np.all(np.isfinite(values)):
        raise ValueError("activation payload contains non-finite values")
    meta = json.dumps(
        {"condition": None, "corpus_tag": corpus_tag}, sort_keys=True, separators=(",", ":")
    ).encode("utf-8")
    n_layers, n_neurons, n_timepoints = values.shape
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<III", n_layers, n_neurons, n_timepoints))
        fh.write(struct.pack("<d", rate_hz))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(values.tobytes())
