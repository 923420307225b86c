"""Command-line pipeline: synth | probe-model | probe-brain | align | encode | report.

One JSON config file drives every stage; command-line flags override config
values and the HFTP_SEED environment variable overrides the config seed
(flags still win). All artifacts land under the output directory with stable
names, and re-running a stage with identical inputs and seed reproduces its
artifacts byte for byte.

Exit codes: 0 success, 2 config error, 3 input/format error, 4 statistical
degeneracy.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import alignment, encoding, ingest, probe_brain, probe_model
from .errors import ConfigError, DegeneracyError, HftpError, InputError
from .ingest import (
    CONDITION_ORDER,
    ActivationTensor,
    ChannelMeta,
    ConditionLabel,
    Plant,
    SynthSpec,
    TrialRecording,
    UnitId,
)

_TOP_KEYS = {
    "seed", "n_perm", "alpha", "k", "freqs", "split_policy", "workers",
    "out", "last_n", "trial_len", "inputs", "synth", "encode", "report",
}
_INPUT_KEYS = {
    "experiment", "control", "recording", "roi_map", "model_dir", "brain_dir",
    "unit_classes", "channel_classes",
}
_ENCODE_KEYS = {"stimulus_class"}
_REPORT_KEYS = {"compare", "svg_label"}


def _check_keys(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"unknown config key(s) in {where}: {sorted(unknown)}")


@dataclass
class RunConfig:
    """Parsed run configuration with documented defaults."""

    seed: int = 0
    n_perm: int = 1000
    alpha: float = 0.05
    k: int = 100
    freqs: tuple[float, float] = (1.0, 2.0)
    split_policy: str = "contiguous"
    workers: int = 1
    out: str = "out"
    last_n: int = 32
    trial_len: int = 36
    inputs: dict = field(default_factory=dict)
    synth: dict | None = None
    encode: dict = field(default_factory=dict)
    report: dict = field(default_factory=dict)

    @classmethod
    def load(cls, path: str, overrides: dict) -> "RunConfig":
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
        if not isinstance(raw, dict):
            raise ConfigError("config root must be a JSON object")
        _check_keys(raw, _TOP_KEYS, "config")
        _check_keys(raw.get("inputs", {}), _INPUT_KEYS, "inputs")
        _check_keys(raw.get("encode", {}), _ENCODE_KEYS, "encode")
        _check_keys(raw.get("report", {}), _REPORT_KEYS, "report")

        cfg = cls(**{k: v for k, v in raw.items() if k not in ("freqs",)})
        if "freqs" in raw:
            freqs = raw["freqs"]
            if not (isinstance(freqs, list) and len(freqs) == 2):
                raise ConfigError("freqs must be a two-element list [sentence_hz, phrase_hz]")
            cfg.freqs = (float(freqs[0]), float(freqs[1]))

        env_seed = os.environ.get("HFTP_SEED")
        if env_seed is not None:
            try:
                cfg.seed = int(env_seed)
            except ValueError as exc:
                raise ConfigError(f"HFTP_SEED must be an integer, got {env_seed!r}") from exc
        for key, value in overrides.items():
            if value is not None:
                setattr(cfg, key, value)

        if cfg.split_policy not in ("contiguous", "interleaved"):
            raise ConfigError(f"unknown split_policy {cfg.split_policy!r}")
        if cfg.workers < 1:
            raise ConfigError("workers must be >= 1")
        return cfg

    def input_path(self, name: str) -> Path:
        try:
            value = self.inputs[name]
        except KeyError:
            raise ConfigError(f"config inputs.{name} is required for this command") from None
        return Path(value)

    def roi_map(self) -> ingest.RoiMap:
        if self.inputs.get("roi_map"):
            return ingest.load_roi_map(self.inputs["roi_map"])
        return ingest.default_roi_map()


# ---------------------------------------------------------------------------
# deterministic writers
# ---------------------------------------------------------------------------


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(obj, fh, sort_keys=True, indent=2, allow_nan=True)
        fh.write("\n")


def _write_csv(path: Path, header: list[str], rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in row])


def _fmt(x) -> str:
    return repr(float(x))


# ---------------------------------------------------------------------------
# synth
# ---------------------------------------------------------------------------

_SYNTH_SINGLE_KEYS = {
    "kind", "shape", "rate_hz", "plants", "noise_sigma", "corpus_tag",
    "condition", "channel_layout", "filename",
}
_SYNTH_SUITE_KEYS = {
    "kind", "n_layers", "n_neurons", "planted_layer", "planted_neurons",
    "n_channels", "planted_channels", "n_trials_per_condition", "trial_len",
    "model_rate_hz", "brain_rate_hz", "freq_hz", "model_amplitude",
    "brain_amplitude", "condition_gains", "noise_sigma_model",
    "noise_sigma_brain", "channel_layout",
}


def _plants_from_config(raw) -> tuple[Plant, ...]:
    out = []
    for p in raw:
        out.append(
            Plant(
                where=tuple(p["where"]),
                freq_hz=float(p["freq_hz"]),
                amplitude=float(p["amplitude"]),
                phase=float(p.get("phase", 0.0)),
            )
        )
    return tuple(out)


def _synth_single(cfg: RunConfig, raw: dict, out: Path) -> list[str]:
    _check_keys(raw, _SYNTH_SINGLE_KEYS, "synth")
    condition = ConditionLabel.from_key(raw["condition"]) if raw.get("condition") else None
    tag = raw.get("corpus_tag")
    if tag is None:
        tag = json.dumps({"synth": raw, "seed": cfg.seed}, sort_keys=True, separators=(",", ":"))
    spec = SynthSpec(
        kind=raw["kind"],
        shape=tuple(raw["shape"]),
        rate_hz=float(raw["rate_hz"]),
        plants=_plants_from_config(raw.get("plants", [])),
        noise_sigma=float(raw.get("noise_sigma", 0.0)),
        seed=cfg.seed,
        corpus_tag=tag,
        condition=condition,
        channel_layout=tuple(map(tuple, raw["channel_layout"])) if raw.get("channel_layout") else None,
    )
    data = ingest.synth_generate(spec)
    default_name = "synth.hftpact" if spec.kind == "activation" else "synth.hftptri"
    name = raw.get("filename", default_name)
    if isinstance(data, ActivationTensor):
        ingest.write_activation_file(data, out / name)
    else:
        ingest.write_trial_recording(data, out / name)
    return [name]


def make_alignment_suite(raw: dict, seed: int) -> dict[str, object]:
    """Synthetic probe + six-condition model/recording set with a shared
    planted condition structure. Returns name -> tensor/recording."""
    _check_keys(raw, _SYNTH_SUITE_KEYS, "synth")
    n_layers = int(raw.get("n_layers", 2))
    n_neurons = int(raw.get("n_neurons", 16))
    planted_layer = int(raw.get("planted_layer", n_layers - 1))
    planted_neurons = [int(v) for v in raw.get("planted_neurons", [0, 1, 2, 3])]
    n_channels = int(raw.get("n_channels", 32))
    planted_channels = [int(v) for v in raw.get("planted_channels", [0, 1, 2, 3])]
    trials_per_cond = int(raw.get("n_trials_per_condition", 20))
    trial_len = int(raw.get("trial_len", 36))
    model_rate = float(raw.get("model_rate_hz", 4.0))
    brain_rate = float(raw.get("brain_rate_hz", 64.0))
    freq = float(raw.get("freq_hz", 1.0))
    model_amp = float(raw.get("model_amplitude", 8.0))
    brain_amp = float(raw.get("brain_amplitude", 2.0))
    sig_m = float(raw.get("noise_sigma_model", 1.0))
    sig_b = float(raw.get("noise_sigma_brain", 1.0))
    gains = raw.get(
        "condition_gains",
        {
            "sentence:A": 1.0, "sentence:B": 0.8, "phrase:A": 0.45,
            "phrase:B": 0.3, "random:A": 0.12, "random:B": 0.0,
        },
    )
    if raw.get("channel_layout"):
        layout = tuple((h, a) for h, a in raw["channel_layout"])
    else:
        labels = sorted(ingest.default_roi_map().entries)
        half = n_channels // 2
        layout = tuple(
            ("L" if i < half else "R", labels[i % len(labels)]) for i in range(n_channels)
        )
    metas = ingest.channel_metas_from_layout(layout)

    rng = np.random.default_rng([seed, 7])
    per_syll_b = int(round(brain_rate * ingest.SYLLABLE_SECONDS))
    n_samples = trial_len * per_syll_b
    t_model = np.arange(trial_len) / model_rate
    t_brain = np.arange(n_samples) / brain_rate
    probe_len = trials_per_cond * 2 * trial_len

    out: dict[str, object] = {}

    # probe pair: plants only in the experiment tensor
    exp = rng.normal(0.0, sig_m, (n_layers, n_neurons, probe_len))
    tp = np.arange(probe_len) / model_rate
    for nrn in planted_neurons:
        exp[planted_layer, nrn] += model_amp * np.cos(2 * np.pi * freq * tp)
    ctrl = rng.normal(0.0, sig_m, (n_layers, n_neurons, probe_len))
    out["exp.hftpact"] = ActivationTensor(exp.astype(np.float32), model_rate, corpus_tag="suite:exp")
    out["ctrl.hftpact"] = ActivationTensor(ctrl.astype(np.float32), model_rate, corpus_tag="suite:ctrl")

    for cond in CONDITION_ORDER:
        gain = float(gains.get(cond.key, 0.0))
        act = rng.normal(0.0, sig_m, (n_layers, n_neurons, trials_per_cond * trial_len))
        sig = model_amp * gain * np.cos(2 * np.pi * freq * t_model)
        for nrn in planted_neurons:
            act[planted_layer, nrn] += np.tile(sig, trials_per_cond)
        out[f"act_{cond.stimulus_class}_{cond.split}.hftpact"] = ActivationTensor(
            act.astype(np.float32), model_rate, corpus_tag=f"suite:{cond.key}", condition=cond
        )

        tri = rng.normal(0.0, sig_b, (n_channels, trials_per_cond, n_samples))
        bsig = brain_amp * gain * np.cos(2 * np.pi * freq * t_brain)
        for ch in planted_channels:
            tri[ch] += bsig
        out[f"tri_{cond.stimulus_class}_{cond.split}.hftptri"] = TrialRecording(
            tri.astype(np.float32), brain_rate, channels=metas, condition=cond
        )

    # probe recording: both splits of the sentence class, concatenated
    a = out["tri_sentence_A.hftptri"]
    b = out["tri_sentence_B.hftptri"]
    out["tri_probe.hftptri"] = TrialRecording(
        np.concatenate([a.values, b.values], axis=1), brain_rate, channels=metas
    )
    return out


def cmd_synth(cfg: RunConfig) -> int:
    if not cfg.synth:
        raise ConfigError("config must contain a 'synth' section")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = cfg.synth.get("kind")
    if kind in ("activation", "trial"):
        names = _synth_single(cfg, cfg.synth, out)
    elif kind == "alignment_suite":
        items = make_alignment_suite(cfg.synth, cfg.seed)
        names = sorted(items)
        for name in names:
            data = items[name]
            if isinstance(data, ActivationTensor):
                ingest.write_activation_file(data, out / name)
            else:
                ingest.write_trial_recording(data, out / name)
    else:
        raise ConfigError(f"unknown synth kind {kind!r}")
    _write_json(out / "synth_manifest.json", {"seed": cfg.seed, "spec": cfg.synth, "files": names})
    return 0


# ---------------------------------------------------------------------------
# probe-model
# ---------------------------------------------------------------------------


def cmd_probe_model(cfg: RunConfig) -> int:
    exp = ingest.read_activation_file(cfg.input_path("experiment"))
    ctrl = ingest.read_activation_file(cfg.input_path("control"))
    f1, f2 = cfg.freqs
    scan = probe_model.permutation_scan(
        exp, [f1, f2], n_perm=cfg.n_perm, alpha=cfg.alpha, seed=cfg.seed, workers=cfg.workers
    )
    hz1, hz2 = list(scan)
    s1 = frozenset(u for u, r in scan[hz1].items() if r.significant)
    s2 = frozenset(u for u, r in scan[hz2].items() if r.significant)
    z1 = probe_model.zscore_deviation(exp, ctrl, s1, hz1)
    z2 = probe_model.zscore_deviation(exp, ctrl, s2, hz2)
    classification = probe_model.classify_neurons(z1, z2)
    dist = probe_model.layer_distribution(classification)
    r, p = probe_model.covariance_trend(dist)

    out = Path(cfg.out)
    zmap1 = dict(zip(z1.units, z1.z_dev))
    zmap2 = dict(zip(z2.units, z2.z_dev))
    rows = []
    for unit in exp.units():
        rows.append(
            [
                unit.layer,
                unit.neuron,
                classification.class_of(unit),
                int(unit in s1),
                int(unit in s2),
                _fmt(zmap1[unit]) if unit in zmap1 else None,
                _fmt(zmap2[unit]) if unit in zmap2 else None,
            ]
        )
    _write_csv(
        out / "unit_classification.csv",
        ["layer", "neuron", "class", "in_s1", "in_s2", "z_dev_1", "z_dev_2"],
        rows,
    )
    props = dist.proportions("layer")
    _write_csv(
        out / "layer_distribution.csv",
        ["layer", "n_sentence", "n_phrase", "n_both", "proportion"],
        [
            [i, int(dist.n_sentence[i]), int(dist.n_phrase[i]), int(dist.n_both[i]),
             _fmt(props[i].sum())]
            for i in range(dist.n_layers)
        ],
    )
    summary = {
        "seed": cfg.seed,
        "n_perm": cfg.n_perm,
        "alpha": cfg.alpha,
        "freqs": [hz1, hz2],
        "n_significant": {"f1": len(s1), "f2": len(s2)},
        "n_classified": {
            "sentence": len(classification.sentence),
            "phrase": len(classification.phrase),
            "both": len(classification.both),
        },
        "thresholds": {"f1": z1.threshold, "f2": z2.threshold},
        "covariance": {"r": r, "p": p},
        "proportions_of_total": dist.proportions("total").tolist(),
        "proportions_of_layer": dist.proportions("layer").tolist(),
    }
    _write_json(out / "probe_model_summary.json", summary)
    return 0


# ---------------------------------------------------------------------------
# probe-brain
# ---------------------------------------------------------------------------


def cmd_probe_brain(cfg: RunConfig) -> int:
    rec = ingest.read_trial_recording(cfg.input_path("recording"))
    rec = ingest.slice_last(rec, cfg.last_n)
    roi_map = cfg.roi_map()
    f1, f2 = cfg.freqs
    classification = probe_brain.classify_channels(
        rec, n_perm=cfg.n_perm, alpha=cfg.alpha, seed=cfg.seed,
        sentence_hz=f1, phrase_hz=f2, workers=cfg.workers,
    )
    dist = probe_brain.roi_distribution(classification, roi_map)

    out = Path(cfg.out)
    spectra_rows = []
    for meta in rec.channels:
        spectrum = probe_brain.itpc(rec, meta.channel_id)
        for f, v in zip(spectrum.freqs, spectrum.itpc):
            spectra_rows.append([meta.channel_id, _fmt(f), _fmt(v)])
    _write_csv(out / "itpc_spectra.csv", ["channel", "freq_hz", "itpc"], spectra_rows)
    _write_csv(
        out / "channel_classification.csv",
        ["channel", "hemisphere", "aal_label", "roi", "class"],
        [
            [m.channel_id, m.hemisphere, m.aal_label, m.roi, c]
            for m, c in zip(classification.channels, classification.classes)
        ],
    )
    dist_json = {
        "rois": list(ingest.ROI_NAMES),
        "hemispheres": list(ingest.HEMISPHERES),
        "n_sentence": dist.n_sentence.tolist(),
        "n_phrase": dist.n_phrase.tolist(),
        "n_both": dist.n_both.tolist(),
        "n_channels": dist.n_channels.tolist(),
        "correlation": {
            h: dict(zip(("r", "p"), probe_brain.roi_correlation(dist, h)))
            for h in ingest.HEMISPHERES
        },
    }
    _write_json(out / "roi_distribution.json", dist_json)
    _write_json(
        out / "probe_brain_summary.json",
        {
            "seed": cfg.seed,
            "n_perm": cfg.n_perm,
            "alpha": cfg.alpha,
            "freqs": list(cfg.freqs),
            "n_channels": rec.n_channels,
            "n_trials": rec.n_trials,
            "n_significant": len(classification.significant_ids()),
            "classes": {
                name: sorted(classification.ids_of(name))
                for name in ("sentence", "phrase", "both")
            },
        },
    )
    return 0


# ---------------------------------------------------------------------------
# align / encode shared input handling
# ---------------------------------------------------------------------------


def _read_condition_files(directory: Path, prefix: str, suffix: str, reader):
    data = {}
    for cond in CONDITION_ORDER:
        path = directory / f"{prefix}_{cond.stimulus_class}_{cond.split}{suffix}"
        if not path.exists():
            raise InputError(f"missing condition file {path}")
        data[cond] = reader(path)
    return data


def _read_unit_classes(path: Path) -> dict[str, list[UnitId]]:
    classes: dict[str, list[UnitId]] = {"sentence": [], "phrase": [], "both": []}
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                cls = row["class"]
                if cls in classes:
                    classes[cls].append(UnitId(int(row["layer"]), int(row["neuron"])))
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"cannot parse unit classification {path}: {exc}") from exc
    return classes


def _read_channel_classes(path: Path) -> probe_brain.ChannelClassification:
    metas, classes = [], []
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                metas.append(
                    ChannelMeta(
                        int(row["channel"]), row["hemisphere"], row["aal_label"], row["roi"]
                    )
                )
                classes.append(row["class"])
    except (OSError, KeyError, ValueError) as exc:
        raise InputError(f"cannot parse channel classification {path}: {exc}") from exc
    return probe_brain.ChannelClassification(channels=tuple(metas), classes=tuple(classes))


ROI_TABLE_ROWS = ("S(m,b)",) + ingest.ROI_NAMES


def _similarity_table_rows(mean_block: dict) -> list[list]:
    rows = []
    for name in ROI_TABLE_ROWS:
        row = [name]
        for hemi in ingest.HEMISPHERES:
            block = mean_block.get(hemi) or {}
            value = block.get("s_mb") if name == "S(m,b)" else (block.get("s_mbr") or {}).get(name)
            row.append("/" if value is None else _fmt(value))
        rows.append(row)
    return rows


def cmd_align(cfg: RunConfig) -> int:
    model_dir = cfg.input_path("model_dir")
    brain_dir = cfg.input_path("brain_dir")
    tensors = _read_condition_files(model_dir, "act", ".hftpact", ingest.read_activation_file)
    recordings = _read_condition_files(brain_dir, "tri", ".hftptri", ingest.read_trial_recording)
    unit_classes = _read_unit_classes(cfg.input_path("unit_classes"))
    channel_cls = None
    if cfg.inputs.get("channel_classes"):
        channel_cls = _read_channel_classes(Path(cfg.inputs["channel_classes"]))

    report = alignment.build_alignment_report(
        tensors,
        recordings,
        unit_classes,
        channel_cls,
        k=cfg.k,
        trial_len=cfg.trial_len,
        last_n=cfg.last_n,
    )
    report["seed"] = cfg.seed
    out = Path(cfg.out)
    _write_json(out / "alignment_report.json", report)
    _write_csv(
        out / "alignment_table.csv",
        ["row", "L", "R"],
        _similarity_table_rows(report["mean_across_classes"]),
    )
    return 0


def cmd_encode(cfg: RunConfig) -> int:
    model_dir = cfg.input_path("model_dir")
    brain_dir = cfg.input_path("brain_dir")
    tensors = _read_condition_files(model_dir, "act", ".hftpact", ingest.read_activation_file)
    recordings = _read_condition_files(brain_dir, "tri", ".hftptri", ingest.read_trial_recording)
    unit_classes = _read_unit_classes(cfg.input_path("unit_classes"))

    stimulus_class = cfg.encode.get("stimulus_class", "sentence")
    if stimulus_class not in ingest.STIMULUS_CLASSES:
        raise ConfigError(f"unknown encode.stimulus_class {stimulus_class!r}")
    block_labels = [ConditionLabel(stimulus_class, s) for s in ingest.SPLITS]
    block_tensors = [tensors[c] for c in block_labels]
    block_recs = [recordings[c] for c in block_labels]
    class_names = ("sentence", "phrase", "both") if stimulus_class == "sentence" else ("phrase",)

    metas = block_recs[0].channels
    hemi_ids = {
        h: [m.channel_id for m in metas if m.hemisphere == h] for h in ingest.HEMISPHERES
    }
    roi_of_all = {m.channel_id: m.roi for m in metas}
    n_layers = block_tensors[0].n_layers

    report: dict = {
        "seed": cfg.seed,
        "stimulus_class": stimulus_class,
        "k": cfg.k,
        "classes": {},
        "mean_across_classes": {},
    }
    score_rows = []
    per_class_blocks: dict[str, dict] = {}
    for name in class_names:
        members = unit_classes.get(name, [])
        scores: dict[int, dict[int, float]] = {}
        skipped = []
        for layer in range(n_layers):
            design = encoding.build_model_features(
                block_tensors, layer, members, trial_len=cfg.trial_len, last_n=cfg.last_n
            )
            if design is None:
                skipped.append(layer)
                continue
            scores[layer] = {}
            for meta in metas:
                target = encoding.build_brain_targets(
                    block_recs, meta.channel_id, design, last_n=cfg.last_n
                )
                ps = encoding.predictive_score(
                    design.X,
                    target.y,
                    seed=[cfg.seed, layer, meta.channel_id],
                    layer=layer,
                    channel=meta.channel_id,
                )
                scores[layer][meta.channel_id] = ps.p_score
                score_rows.append([name, layer, meta.channel_id, _fmt(ps.p_score)])
        hemi_json = {}
        for hemi, ids in hemi_ids.items():
            if not ids or not scores:
                hemi_json[hemi] = None
                continue
            table = {
                layer: {cid: chans[cid] for cid in ids} for layer, chans in scores.items()
            }
            roi_of = {cid: roi_of_all[cid] for cid in ids}
            agg = encoding.aggregate_predictive(table, cfg.k, roi_of)
            hemi_json[hemi] = {
                "s_mb": agg.s_mb,
                "s_mbr": agg.s_mbr,
                "top": {
                    str(sel.layer): [[int(c), r] for c, r in zip(sel.channel_ids, sel.rhos)]
                    for sel in agg.selections
                },
            }
        per_class_blocks[name] = hemi_json
        report["classes"][name] = {"skipped_layers": skipped, "hemispheres": hemi_json}

    for hemi in ingest.HEMISPHERES:
        s_vals = [
            blk[hemi]["s_mb"]
            for blk in per_class_blocks.values()
            if blk.get(hemi) is not None
        ]
        rois = sorted({m.roi for m in metas})
        mbr = {}
        for roi in rois:
            vals = [
                blk[hemi]["s_mbr"].get(roi)
                for blk in per_class_blocks.values()
                if blk.get(hemi) is not None
            ]
            vals = [v for v in vals if v is not None]
            mbr[roi] = float(np.mean(vals)) if vals else None
        report["mean_across_classes"][hemi] = {
            "s_mb": float(np.mean(s_vals)) if s_vals else None,
            "s_mbr": mbr,
        }

    out = Path(cfg.out)
    _write_csv(
        out / "predictive_scores.csv", ["class", "layer", "channel", "p_score"], score_rows
    )
    _write_json(out / "encoding_report.json", report)
    _write_csv(
        out / "encoding_table.csv",
        ["row", "L", "R"],
        _similarity_table_rows(report["mean_across_classes"]),
    )
    return 0


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------

_STAGE_FILES = {
    "synth": "synth_manifest.json",
    "probe_model": "probe_model_summary.json",
    "probe_brain": "probe_brain_summary.json",
    "align": "alignment_report.json",
    "encode": "encoding_report.json",
}


def cmd_report(cfg: RunConfig, svg: bool = False) -> int:
    out = Path(cfg.out)
    merged: dict = {"stages": {}, "gaps": []}
    for stage, filename in _STAGE_FILES.items():
        path = out / filename
        if path.exists():
            with open(path, "r", encoding="utf-8") as fh:
                merged["stages"][stage] = json.load(fh)
        else:
            merged["stages"][stage] = None
            merged["gaps"].append(stage)

    compare = cfg.report.get("compare", [])
    if compare:
        groups, names = [], []
        for path in compare:
            with open(path, "r", encoding="utf-8") as fh:
                rep = json.load(fh)
            pooled = (rep.get("classes") or {}).get("pooled") or {}
            block = pooled.get("L") or pooled.get("R")
            if block:
                groups.append(list(block["per_layer_mean_rho"].values()))
                names.append(path)
        if len(groups) >= 2 and all(len(g) >= 2 for g in groups):
            res = alignment.one_way_anova(groups)
            merged["model_anova"] = {
                "models": names, "F": res.f_stat, "p": res.p_value, "eta_squared": res.eta_squared,
            }
        else:
            merged["model_anova"] = None

    _write_json(out / "report.json", merged)

    rows = []
    for stage in sorted(_STAGE_FILES):
        rows.append([stage, "present" if merged["stages"][stage] is not None else "missing"])
    _write_csv(out / "report.csv", ["stage", "status"], rows)

    if svg:
        spectra = out / "itpc_spectra.csv"
        if spectra.exists():
            by_channel: dict[str, list[tuple[float, float]]] = {}
            with open(spectra, "r", encoding="utf-8", newline="") as fh:
                for row in csv.DictReader(fh):
                    by_channel.setdefault(row["channel"], []).append(
                        (float(row["freq_hz"]), float(row["itpc"]))
                    )
            curves = np.array(
                [[v for _, v in sorted(pts)] for pts in by_channel.values()]
            )
            freqs = np.array(sorted(f for f, _ in next(iter(by_channel.values()))))
            mean = curves.mean(axis=0)
            sem = curves.std(axis=0, ddof=1) / np.sqrt(curves.shape[0]) if curves.shape[0] > 1 else None
            from .spectral import render_spectra_svg

            label = cfg.report.get("svg_label", "experiment")
            render_spectra_svg(
                out / "spectra.svg",
                freqs,
                [(label, mean, sem, "#1f77b4")],
                title="mean phase coherence across channels",
            )
        else:
            merged["gaps"].append("spectra_svg_source")
            _write_json(out / "report.json", merged)
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hftp", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("synth", "probe-model", "probe-brain", "align", "encode", "report"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides config and HFTP_SEED)")
        p.add_argument("--n-perm", type=int, dest="n_perm", help="permutation count override")
        p.add_argument("--k", type=int, help="top-k channel count override")
        p.add_argument("--workers", type=int, help="worker pool size")
        if name == "report":
            p.add_argument("--svg", action="store_true", help="also render spectra.svg")
    return parser


_COMMANDS = {
    "synth": cmd_synth,
    "probe-model": cmd_probe_model,
    "probe-brain": cmd_probe_brain,
    "align": cmd_align,
    "encode": cmd_encode,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = RunConfig.load(
            args.config,
            {
                "out": args.out,
                "seed": args.seed,
                "n_perm": args.n_perm,
                "k": args.k,
                "workers": args.workers,
            },
        )
        Path(cfg.out).mkdir(parents=True, exist_ok=True)
        if args.command == "report":
            return cmd_report(cfg, svg=args.svg)
        return _COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 3
    except DegeneracyError as exc:
        print(f"degenerate statistics: {exc}", file=sys.stderr)
        return 4
    except HftpError as exc:  # pragma: no cover - future error classes
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
