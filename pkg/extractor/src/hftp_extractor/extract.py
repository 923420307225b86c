"""Extraction pipeline: corpus -> forward pass -> sub-token averaging -> file."""

from __future__ import annotations

import numpy as np
import torch

from .actfile import write_activation_file
from .corpus import assign_tokens, concatenate, read_corpus, segment_units
from .manifest import ExtractionManifest
from .tap import TapRecorder


def load_model_and_tokenizer(model_ref: str):
    from transformers import AutoModelForCausalLM, AutoTokenizer

    tokenizer = AutoTokenizer.from_pretrained(model_ref)
    model = AutoModelForCausalLM.from_pretrained(model_ref, dtype=torch.float32)
    model.eval()
    return model, tokenizer


def averaged_unit_activations(
    model, tokenizer, text: str, boundary: str, tap: str = "post"
) -> np.ndarray:
    """(n_layers, inner_dim, n_units): sub-token activations averaged per
    linguistic unit over one continuous text."""
    unit_spans = segment_units(text, boundary)
    encoded = tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
    offsets = [tuple(span) for span in encoded["offset_mapping"]]
    token_groups = assign_tokens(offsets, unit_spans, text)

    input_ids = torch.tensor([encoded["input_ids"]], dtype=torch.long)
    n_threads = torch.get_num_threads()
    torch.set_num_threads(1)  # fixed reduction order keeps extraction byte-reproducible
    try:
        with TapRecorder(model, tap) as recorder, torch.no_grad():
            model(input_ids)
        acts = recorder.stacked().to(torch.float32).numpy()  # (layers, seq, inner)
    finally:
        torch.set_num_threads(n_threads)

    n_layers, _, inner = acts.shape
    out = np.empty((n_layers, inner, len(unit_spans)), dtype=np.float32)
    for u, toks in enumerate(token_groups):
        out[:, :, u] = acts[:, toks, :].mean(axis=1)
    return out


def extract_activations(manifest: ExtractionManifest) -> str:
    """Run the extraction described by the manifest; returns the output path."""
    lines = read_corpus(manifest.corpus)
    text = concatenate(lines, manifest.boundary)
    model, tokenizer = load_model_and_tokenizer(manifest.model)
    values = averaged_unit_activations(model, tokenizer, text, manifest.boundary, manifest.tap)
    tag = f"{manifest.language}:{manifest.boundary}:{manifest.corpus}"
    write_activation_file(values, manifest.rate_hz, tag, manifest.output)
    return manifest.output
