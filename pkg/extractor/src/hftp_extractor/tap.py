"""Locating the MLP intermediate tap point across transformer layouts.

The "post" tap is the post-activation intermediate vector, captured as the
input of the feed-forward block's final linear map (works for both plain
two-linear MLPs and gated variants). The "pre" tap is the output of the
first linear before the nonlinearity, supported where the activation is a
distinct module.
"""

from __future__ import annotations

import re

import torch

# final-linear module per block: its input is the post-activation vector
_FINAL_LINEAR = [
    re.compile(r"(?:^|\.)h\.(\d+)\.mlp\.c_proj$"),            # gpt2 family
    re.compile(r"(?:^|\.)layers\.(\d+)\.mlp\.down_proj$"),    # llama/gemma family
    re.compile(r"(?:^|\.)h\.(\d+)\.mlp\.dense_4h_to_h$"),     # neox/glm family
    re.compile(r"(?:^|\.)layers\.(\d+)\.feed_forward\.w2$"),
    re.compile(r"(?:^|\.)layers\.(\d+)\.mlp\.fc2$"),
]

# activation module per block: its input is the pre-nonlinearity vector
_ACT_MODULE = [
    re.compile(r"(?:^|\.)h\.(\d+)\.mlp\.act$"),
]


def _find(model: torch.nn.Module, patterns) -> dict[int, torch.nn.Module]:
    found: dict[int, torch.nn.Module] = {}
    for name, module in model.named_modules():
        for pat in patterns:
            m = pat.search(name)
            if m:
                found[int(m.group(1))] = module
    return found


def find_tap_modules(model: torch.nn.Module, tap: str) -> list[torch.nn.Module]:
    patterns = _FINAL_LINEAR if tap == "post" else _ACT_MODULE
    found = _find(model, patterns)
    if not found:
        kind = "final MLP linear" if tap == "post" else "MLP activation module"
        raise ValueError(f"could not locate the {kind} in this architecture ({tap=})")
    layers = sorted(found)
    if layers != list(range(len(layers))):
        raise ValueError(f"non-contiguous layer indices found: {layers}")
    return [found[i] for i in layers]


class TapRecorder:
    """Forward-pre hooks capturing each layer's tap input for one pass."""

    def __init__(self, model: torch.nn.Module, tap: str):
        self.modules = find_tap_modules(model, tap)
        self.captured: list[torch.Tensor | None] = [None] * len(self.modules)
        self._handles = []

    def __enter__(self):
        for idx, module in enumerate(self.modules):
            def hook(module, args, idx=idx):
                self.captured[idx] = args[0].detach()
            self._handles.append(module.register_forward_pre_hook(hook))
        return self

    def __exit__(self, *exc):
        for handle in self._handles:
            handle.remove()
        self._handles.clear()

    def stacked(self) -> torch.Tensor:
        """(n_layers, seq_len, inner_dim) for a single-sequence batch."""
        if any(c is None for c in self.captured):
            raise RuntimeError("tap hooks captured nothing; did the forward pass run?")
        return torch.stack([c[0] for c in self.captured], dim=0)
