"""Extraction tests against a locally built tiny checkpoint.

The fixture checkpoint mirrors the real loading path (AutoTokenizer /
AutoModelForCausalLM from a saved directory); output files are validated by
reading them back with the consumer package.
"""

import json
import time

import numpy as np
import pytest
import torch

import hftp.ingest as hingest
from hftp_extractor.cli import main
from hftp_extractor.corpus import BoundaryAlignmentError, concatenate, segment_units, assign_tokens
from hftp_extractor.extract import (
    averaged_unit_activations,
    extract_activations,
    load_model_and_tokenizer,
)
from hftp_extractor.manifest import ExtractionManifest, load_manifest
from hftp_extractor.tap import TapRecorder, find_tap_modules

from conftest import EN_LINES


def en_manifest(checkpoint, corpus, output) -> ExtractionManifest:
    return ExtractionManifest(
        model=str(checkpoint),
        corpus=str(corpus),
        language="en",
        boundary="word",
        output=str(output),
    )


class TestManifest:
    def test_boundary_language_mismatch_rejected(self):
        with pytest.raises(ValueError, match="boundary"):
            ExtractionManifest("m", "c", "zh", "word", "o")
        with pytest.raises(ValueError, match="boundary"):
            ExtractionManifest("m", "c", "en", "syllable", "o")

    def test_load_rejects_unknown_keys(self, tmp_path):
        path = tmp_path / "m.json"
        path.write_text(json.dumps({"model": "m", "corpus": "c", "language": "en",
                                    "boundary": "word", "output": "o", "extras": 1}))
        with pytest.raises(ValueError, match="unknown manifest keys"):
            load_manifest(path)


class TestTap:
    def test_gpt2_tap_modules_found(self, en_checkpoint):
        model, _ = load_model_and_tokenizer(en_checkpoint)
        mods = find_tap_modules(model, "post")
        assert len(mods) == model.config.n_layer
        pre = find_tap_modules(model, "pre")
        assert len(pre) == model.config.n_layer

    def test_post_tap_shape_is_inner_dim(self, en_checkpoint):
        model, tokenizer = load_model_and_tokenizer(en_checkpoint)
        ids = torch.tensor([tokenizer("red foxes", add_special_tokens=False)["input_ids"]])
        with TapRecorder(model, "post") as rec, torch.no_grad():
            model(ids)
        acts = rec.stacked()
        assert acts.shape == (model.config.n_layer, ids.shape[1], model.config.n_inner)


class TestExtraction:
    def test_acceptance_extractor(self, en_checkpoint, en_corpus, tmp_path):
        # output passes consumer validation, unit count equals corpus length,
        # and single-sub-token words carry unchanged activations
        t0 = time.perf_counter()
        out = tmp_path / "en.hftpact"
        extract_activations(en_manifest(en_checkpoint, en_corpus, out))
        tensor = hingest.read_activation_file(out)

        model, tokenizer = load_model_and_tokenizer(en_checkpoint)
        assert tensor.n_layers == model.config.n_layer
        assert tensor.n_neurons == model.config.n_inner
        assert tensor.n_timepoints == 4 * len(EN_LINES)
        assert tensor.rate_hz == 4.0

        text = concatenate(EN_LINES, "word")
        encoded = tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
        groups = assign_tokens(
            [tuple(o) for o in encoded["offset_mapping"]], segment_units(text, "word"), text
        )
        singles = [u for u, toks in enumerate(groups) if len(toks) == 1]
        assert singles, "fixture must contain single-sub-token words"

        ids = torch.tensor([encoded["input_ids"]])
        with TapRecorder(model, "post") as rec, torch.no_grad():
            model(ids)
        raw = rec.stacked().to(torch.float32).numpy()
        for u in singles[:8]:
            (tok,) = groups[u]
            assert np.array_equal(tensor.values[:, :, u], raw[:, tok, :])
        elapsed = time.perf_counter() - t0
        assert elapsed < 600.0
        print(
            f"\nACCEPTANCE PASS: extractor ({len(singles)} single-token units unchanged, "
            f"{tensor.n_timepoints} units, {elapsed:.1f}s)"
        )

    def test_deterministic_re_extraction(self, en_checkpoint, en_corpus, tmp_path):
        a, b = tmp_path / "a.hftpact", tmp_path / "b.hftpact"
        extract_activations(en_manifest(en_checkpoint, en_corpus, a))
        extract_activations(en_manifest(en_checkpoint, en_corpus, b))
        assert a.read_bytes() == b.read_bytes()

    def test_multi_subtoken_units_are_averaged(self, en_checkpoint, en_corpus):
        model, tokenizer = load_model_and_tokenizer(en_checkpoint)
        text = concatenate(EN_LINES, "word")
        values = averaged_unit_activations(model, tokenizer, text, "word")
        encoded = tokenizer(text, return_offsets_mapping=True, add_special_tokens=False)
        groups = assign_tokens(
            [tuple(o) for o in encoded["offset_mapping"]], segment_units(text, "word"), text
        )
        ids = torch.tensor([encoded["input_ids"]])
        with TapRecorder(model, "post") as rec, torch.no_grad():
            model(ids)
        raw = rec.stacked().to(torch.float32).numpy()
        for u, toks in enumerate(groups):
            expected = raw[:, toks, :].mean(axis=1)
            assert np.allclose(values[:, :, u], expected, atol=1e-7)

    def test_pre_tap_differs_from_post(self, en_checkpoint, en_corpus):
        model, tokenizer = load_model_and_tokenizer(en_checkpoint)
        text = concatenate(EN_LINES[:2], "word")
        post = averaged_unit_activations(model, tokenizer, text, "word", tap="post")
        pre = averaged_unit_activations(model, tokenizer, text, "word", tap="pre")
        assert post.shape == pre.shape
        assert not np.allclose(post, pre)

    def test_chinese_syllable_units(self, zh_checkpoint, tmp_path):
        # ordering avoids the tokenizer's one cross-character merge
        lines = ["马水木火", "火木水马", "水马火木"]
        corpus = tmp_path / "zh.txt"
        corpus.write_text("\n".join(lines) + "\n", encoding="utf-8")
        out = tmp_path / "zh.hftpact"
        manifest = ExtractionManifest(
            model=str(zh_checkpoint), corpus=str(corpus), language="zh",
            boundary="syllable", output=str(out),
        )
        extract_activations(manifest)
        tensor = hingest.read_activation_file(out)
        assert tensor.n_timepoints == 4 * len(lines)

    def test_crossing_token_raises_with_position(self, zh_checkpoint, tmp_path):
        # the training corpus made the tokenizer merge one two-character
        # sequence; using it must fail loudly
        corpus = tmp_path / "zh.txt"
        corpus.write_text("木马水火\n水火木马\n", encoding="utf-8")
        manifest = ExtractionManifest(
            model=str(zh_checkpoint), corpus=str(corpus), language="zh",
            boundary="syllable", output=str(tmp_path / "zh.hftpact"),
        )
        with pytest.raises(BoundaryAlignmentError, match="crossing units"):
            extract_activations(manifest)


class TestCli:
    def test_extract_command(self, en_checkpoint, en_corpus, tmp_path):
        out = tmp_path / "cli.hftpact"
        manifest = tmp_path / "m.json"
        manifest.write_text(
            json.dumps(
                {
                    "model": str(en_checkpoint),
                    "corpus": str(en_corpus),
                    "language": "en",
                    "boundary": "word",
                    "output": str(out),
                }
            )
        )
        assert main(["extract", "--manifest", str(manifest)]) == 0
        assert hingest.read_activation_file(out).n_timepoints == 4 * len(EN_LINES)

    def test_shuffle_command(self, en_corpus, tmp_path):
        out = tmp_path / "ctl.txt"
        assert main(["shuffle", "--corpus", str(en_corpus), "--out", str(out),
                     "--seed", "4", "--boundary", "word"]) == 0
        assert sorted(out.read_text().split()) == sorted(en_corpus.read_text().split())

    def test_boundary_error_exit_code(self, zh_checkpoint, tmp_path):
        corpus = tmp_path / "zh.txt"
        corpus.write_text("木马水火\n木马火水\n", encoding="utf-8")
        manifest = tmp_path / "m.json"
        manifest.write_text(
            json.dumps(
                {
                    "model": str(zh_checkpoint),
                    "corpus": str(corpus),
                    "language": "zh",
                    "boundary": "syllable",
                    "output": str(tmp_path / "o.hftpact"),
                }
            )
        )
        assert main(["extract", "--manifest", str(manifest)]) == 3
