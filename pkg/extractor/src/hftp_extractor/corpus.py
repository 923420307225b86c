"""Corpus handling: fixed-length sequence files, unit segmentation, and
word-order-randomized controls.

A corpus file holds one sequence per line (UTF-8). Units are whitespace
words for the word policy and individual non-whitespace characters for the
syllable policy.
"""

from __future__ import annotations

import numpy as np


class BoundaryAlignmentError(ValueError):
    """A token straddles a linguistic-unit boundary (or a unit got no token)."""


def read_corpus(path) -> list[str]:
    with open(path, "r", encoding="utf-8") as fh:
        lines = [line.strip() for line in fh]
    lines = [line for line in lines if line]
    if not lines:
        raise ValueError(f"{path}: corpus is empty")
    return lines


def sequence_units(line: str, boundary: str) -> list[str]:
    if boundary == "word":
        return line.split()
    if boundary == "syllable":
        return [ch for ch in line if not ch.isspace()]
    raise ValueError(f"unknown boundary policy {boundary!r}")


def join_units(units: list[str], boundary: str) -> str:
    return (" " if boundary == "word" else "").join(units)


def concatenate(lines: list[str], boundary: str) -> str:
    """One continuous text; words keep single-space separators."""
    return (" " if boundary == "word" else "").join(lines)


def segment_units(text: str, boundary: str) -> list[tuple[int, int]]:
    """Character spans [start, end) of every linguistic unit in ``text``."""
    spans = []
    if boundary == "word":
        start = None
        for i, ch in enumerate(text):
            if ch.isspace():
                if start is not None:
                    spans.append((start, i))
                    start = None
            elif start is None:
                start = i
        if start is not None:
            spans.append((start, len(text)))
    elif boundary == "syllable":
        for i, ch in enumerate(text):
            if not ch.isspace():
                spans.append((i, i + 1))
    else:
        raise ValueError(f"unknown boundary policy {boundary!r}")
    return spans


def assign_tokens(
    offsets: list[tuple[int, int]],
    unit_spans: list[tuple[int, int]],
    text: str,
) -> list[list[int]]:
    """Token indices per unit.

    A token is assigned to the unit its non-whitespace characters fall in;
    a token overlapping two units, or a unit that receives no token, is a
    boundary-alignment error (reported with the offending position).
    """
    unit_of_char = np.full(len(text), -1, dtype=np.int64)
    for u, (a, b) in enumerate(unit_spans):
        unit_of_char[a:b] = u
    token_unit: list[int] = []
    for t, (a, b) in enumerate(offsets):
        owners = {int(u) for u in unit_of_char[a:b] if u >= 0}
        if len(owners) > 1:
            raise BoundaryAlignmentError(
                f"token {t} spans characters {a}:{b} ({text[a:b]!r}) crossing units "
                f"{sorted(owners)}"
            )
        token_unit.append(owners.pop() if owners else -1)
    out: list[list[int]] = [[] for _ in unit_spans]
    for t, u in enumerate(token_unit):
        if u >= 0:
            out[u].append(t)
    for u, toks in enumerate(out):
        if not toks:
            a, b = unit_spans[u]
            raise BoundaryAlignmentError(
                f"unit {u} at characters {a}:{b} ({text[a:b]!r}) received no token"
            )
    return out


def shuffle_control(corpus_path, seed: int, output_path, boundary: str, mode: str = "within") -> None:
    """Write a word-order-randomized control corpus.

    ``within`` permutes units inside each sequence; ``global`` permutes the
    whole corpus' units across all slots. Both preserve the corpus' lexical
    multiset exactly and keep every sequence's length.
    """
    lines = read_corpus(corpus_path)
    per_line = [sequence_units(line, boundary) for line in lines]
    if all(len(u) < 2 for u in per_line):
        raise ValueError("corpus too small to permute: no sequence has 2+ units")
    rng = np.random.default_rng(seed)
    if mode == "within":
        shuffled = [[units[i] for i in rng.permutation(len(units))] for units in per_line]
    elif mode == "global":
        flat = [u for units in per_line for u in units]
        order = rng.permutation(len(flat))
        flat = [flat[i] for i in order]
        shuffled, pos = [], 0
        for units in per_line:
            shuffled.append(flat[pos : pos + len(units)])
            pos += len(units)
    else:
        raise ValueError(f"unknown shuffle mode {mode!r}")
    with open(output_path, "w", encoding="utf-8", newline="") as fh:
        for units in shuffled:
            fh.write(join_units(units, boundary) + "\n")
