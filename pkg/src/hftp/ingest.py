"""Data model and interchange formats.

Two custom little-endian binary containers keep round-trips bit-exact and the
core dependency-free:

* activation files (magic ``HFTPACT1``): unit activations laid out as
  (layer, neuron, timepoint) float32 at a declared virtual sampling rate;
* trial-recording files (magic ``HFTPTRI1``): voltages laid out as
  (channel, trial, sample) float32, with per-channel anatomy metadata.

Both carry a small UTF-8 JSON metadata blob between the numeric header and
the payload. The module also owns the AAL-label-to-region map and the
synthetic-data generator used as a verification oracle throughout the tests.
"""

from __future__ import annotations

import importlib.resources
import json
import struct
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import (
    BoundsError,
    ConfigError,
    CorruptionError,
    FormatError,
    ValidationError,
)

MAGIC_ACT = b"HFTPACT1"
MAGIC_TRI = b"HFTPTRI1"

ROI_NAMES = (
    "A1",
    "STG",
    "MTG",
    "ITG",
    "Insula",
    "TPJ",
    "Temporal_Pole",
    "Sensorimotor",
    "IFG",
    "MFG",
    "Hippocampus",
    "Amygdala",
)

STIMULUS_CLASSES = ("sentence", "phrase", "random")
SPLITS = ("A", "B")
HEMISPHERES = ("L", "R")


@dataclass(frozen=True, order=True)
class UnitId:
    """Address of one unit: 0-based layer index and index within the layer."""

    layer: int
    neuron: int


@dataclass(frozen=True, order=True)
class ConditionLabel:
    """One of the six experimental conditions: stimulus class x trial split."""

    stimulus_class: str
    split: str

    def __post_init__(self):
        if self.stimulus_class not in STIMULUS_CLASSES:
            raise ValidationError(f"unknown stimulus class {self.stimulus_class!r}")
        if self.split not in SPLITS:
            raise ValidationError(f"unknown split {self.split!r}")

    @property
    def key(self) -> str:
        return f"{self.stimulus_class}:{self.split}"

    @classmethod
    def from_key(cls, key: str) -> "ConditionLabel":
        cls_name, _, split = key.partition(":")
        return cls(cls_name, split)


#: Canonical ordering of the six conditions; SRDM rows/columns follow it.
CONDITION_ORDER = tuple(
    ConditionLabel(c, s) for c in STIMULUS_CLASSES for s in SPLITS
)


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr, dtype=np.float32)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class ActivationTensor:
    """Real activations per (layer, neuron, timepoint) at a virtual rate."""

    values: np.ndarray
    rate_hz: float
    corpus_tag: str = ""
    condition: ConditionLabel | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ValidationError("activation values must be 3-D (layer, neuron, time)")
        if v.shape[2] < 2:
            raise ValidationError("need at least 2 timepoints")
        if not self.rate_hz > 0:
            raise ValidationError("rate_hz must be positive")
        if not np.all(np.isfinite(v)):
            raise ValidationError("activation values must be finite")
        object.__setattr__(self, "values", _freeze(v))

    @property
    def n_layers(self) -> int:
        return self.values.shape[0]

    @property
    def n_neurons(self) -> int:
        return self.values.shape[1]

    @property
    def n_timepoints(self) -> int:
        return self.values.shape[2]

    def series(self, unit: UnitId) -> np.ndarray:
        """One unit's time series as float64."""
        return np.asarray(self.values[unit.layer, unit.neuron], dtype=np.float64)

    def units(self):
        for layer in range(self.n_layers):
            for neuron in range(self.n_neurons):
                yield UnitId(layer, neuron)


@dataclass(frozen=True)
class ChannelMeta:
    """Anatomy of one recording channel."""

    channel_id: int
    hemisphere: str
    aal_label: str
    roi: str

    def __post_init__(self):
        if self.hemisphere not in HEMISPHERES:
            raise ValidationError(f"hemisphere must be L or R, got {self.hemisphere!r}")
        if self.roi not in ROI_NAMES:
            raise ValidationError(f"unknown ROI {self.roi!r}")


@dataclass(frozen=True, eq=False)
class TrialRecording:
    """Voltages per (channel, trial, sample) plus channel anatomy."""

    values: np.ndarray
    rate_hz: float
    channels: tuple[ChannelMeta, ...]
    condition: ConditionLabel | None = None

    def __post_init__(self):
        v = self.values
        if v.ndim != 3:
            raise ValidationError("recording values must be 3-D (channel, trial, sample)")
        if not self.rate_hz > 0:
            raise ValidationError("rate_hz must be positive")
        if not np.all(np.isfinite(v)):
            raise ValidationError("recording values must be finite")
        if len(self.channels) != v.shape[0]:
            raise ValidationError(
                f"{v.shape[0]} channels in payload but {len(self.channels)} metadata entries"
            )
        object.__setattr__(self, "values", _freeze(v))
        object.__setattr__(self, "channels", tuple(self.channels))

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def n_trials(self) -> int:
        return self.values.shape[1]

    @property
    def n_samples(self) -> int:
        return self.values.shape[2]

    def trials(self, channel: int) -> np.ndarray:
        """(n_trials, n_samples) float64 view of one channel."""
        return np.asarray(self.values[channel], dtype=np.float64)


# ---------------------------------------------------------------------------
# ROI map
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RoiMap:
    """AAL label -> region-of-interest name; fails closed on unknown labels."""

    entries: Mapping[str, str]

    def __post_init__(self):
        rois = set(self.entries.values())
        unknown = rois - set(ROI_NAMES)
        if unknown:
            raise ValidationError(f"unknown ROI names: {sorted(unknown)}")
        if rois != set(ROI_NAMES):
            missing = set(ROI_NAMES) - rois
            raise ValidationError(
                f"ROI map must cover all {len(ROI_NAMES)} regions; missing {sorted(missing)}"
            )
        object.__setattr__(self, "entries", dict(self.entries))

    def resolve(self, aal_label: str) -> str:
        try:
            return self.entries[aal_label]
        except KeyError:
            raise ValidationError(f"AAL label {aal_label!r} not in ROI map") from None


def _reject_duplicate_keys(pairs):
    seen = set()
    for key, _ in pairs:
        if key in seen:
            raise ValidationError(f"duplicate AAL label {key!r} in ROI map")
        seen.add(key)
    return dict(pairs)


def load_roi_map(path) -> RoiMap:
    """Load an AAL->ROI map from a JSON object file."""
    with open(path, "rb") as fh:
        try:
            entries = json.loads(fh.read().decode("utf-8"), object_pairs_hook=_reject_duplicate_keys)
        except json.JSONDecodeError as exc:
            raise FormatError(f"ROI map is not valid JSON: {exc}") from exc
    if not isinstance(entries, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in entries.items()
    ):
        raise FormatError("ROI map must be a JSON object of strings")
    return RoiMap(entries)


def default_roi_map() -> RoiMap:
    """The shipped 24-label map grouping AAL annotations into 12 regions."""
    text = importlib.resources.files("hftp.data").joinpath("aal_roi_map.json").read_text("utf-8")
    return RoiMap(json.loads(text, object_pairs_hook=_reject_duplicate_keys))


# ---------------------------------------------------------------------------
# binary interchange
# ---------------------------------------------------------------------------


def _meta_bytes(meta: dict) -> bytes:
    return json.dumps(meta, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _condition_meta(condition: ConditionLabel | None):
    if condition is None:
        return None
    return {"stimulus_class": condition.stimulus_class, "split": condition.split}


def _condition_from_meta(obj) -> ConditionLabel | None:
    if obj is None:
        return None
    try:
        return ConditionLabel(obj["stimulus_class"], obj["split"])
    except (TypeError, KeyError) as exc:
        raise FormatError(f"bad condition metadata: {obj!r}") from exc


def write_activation_file(t: ActivationTensor, path) -> None:
    meta = _meta_bytes({"condition": _condition_meta(t.condition), "corpus_tag": t.corpus_tag})
    with open(path, "wb") as fh:
        fh.write(MAGIC_ACT)
        fh.write(struct.pack("<III", t.n_layers, t.n_neurons, t.n_timepoints))
        fh.write(struct.pack("<d", t.rate_hz))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(np.ascontiguousarray(t.values, dtype="<f4").tobytes())


def write_trial_recording(r: TrialRecording, path) -> None:
    meta = _meta_bytes(
        {
            "condition": _condition_meta(r.condition),
            "channels": [
                {
                    "channel_id": c.channel_id,
                    "hemisphere": c.hemisphere,
                    "aal_label": c.aal_label,
                    "roi": c.roi,
                }
                for c in r.channels
            ],
        }
    )
    with open(path, "wb") as fh:
        fh.write(MAGIC_TRI)
        fh.write(struct.pack("<III", r.n_channels, r.n_trials, r.n_samples))
        fh.write(struct.pack("<d", r.rate_hz))
        fh.write(struct.pack("<I", len(meta)))
        fh.write(meta)
        fh.write(np.ascontiguousarray(r.values, dtype="<f4").tobytes())


def _read_header(fh, magic, path):
    got = fh.read(8)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}")
    raw = fh.read(12 + 8 + 4)
    if len(raw) != 24:
        raise FormatError(f"{path}: truncated header")
    d0, d1, d2 = struct.unpack("<III", raw[:12])
    (rate_hz,) = struct.unpack("<d", raw[12:20])
    (meta_len,) = struct.unpack("<I", raw[20:24])
    meta_raw = fh.read(meta_len)
    if len(meta_raw) != meta_len:
        raise FormatError(f"{path}: truncated metadata block")
    try:
        meta = json.loads(meta_raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise FormatError(f"{path}: metadata is not valid JSON: {exc}") from exc
    return (d0, d1, d2), rate_hz, meta


def _read_payload(fh, shape, path):
    expected = int(np.prod(shape)) * 4
    payload = fh.read()
    if len(payload) != expected:
        raise CorruptionError(
            f"{path}: payload is {len(payload)} bytes, header implies {expected}"
        )
    values = np.frombuffer(payload, dtype="<f4").reshape(shape)
    if not np.all(np.isfinite(values)):
        raise ValidationError(f"{path}: payload contains non-finite values")
    return values


def read_activation_file(path) -> ActivationTensor:
    with open(path, "rb") as fh:
        (n_layers, n_neurons, n_timepoints), rate_hz, meta = _read_header(fh, MAGIC_ACT, path)
        values = _read_payload(fh, (n_layers, n_neurons, n_timepoints), path)
    return ActivationTensor(
        values=values,
        rate_hz=rate_hz,
        corpus_tag=meta.get("corpus_tag", ""),
        condition=_condition_from_meta(meta.get("condition")),
    )


def read_trial_recording(path) -> TrialRecording:
    with open(path, "rb") as fh:
        (n_channels, n_trials, n_samples), rate_hz, meta = _read_header(fh, MAGIC_TRI, path)
        values = _read_payload(fh, (n_channels, n_trials, n_samples), path)
    try:
        channels = tuple(
            ChannelMeta(c["channel_id"], c["hemisphere"], c["aal_label"], c["roi"])
            for c in meta["channels"]
        )
    except (TypeError, KeyError) as exc:
        raise FormatError(f"{path}: bad channel metadata") from exc
    return TrialRecording(
        values=values,
        rate_hz=rate_hz,
        channels=channels,
        condition=_condition_from_meta(meta.get("condition")),
    )


# ---------------------------------------------------------------------------
# windowing
# ---------------------------------------------------------------------------

SYLLABLE_SECONDS = 0.25


def slice_last(data, n_units: int, syllable_s: float = SYLLABLE_SECONDS):
    """Keep only the trailing window of ``n_units`` syllables/words.

    Activation tensors carry one timepoint per linguistic unit, so the window
    is ``n_units`` timepoints. Recordings keep ``n_units * rate * syllable_s``
    samples at the tail of every trial. Metadata is preserved.
    """
    if isinstance(data, ActivationTensor):
        if n_units > data.n_timepoints:
            raise BoundsError(f"window of {n_units} units exceeds {data.n_timepoints} timepoints")
        if n_units == data.n_timepoints:
            return data
        return ActivationTensor(
            values=data.values[:, :, -n_units:],
            rate_hz=data.rate_hz,
            corpus_tag=data.corpus_tag,
            condition=data.condition,
        )
    if isinstance(data, TrialRecording):
        per_syll = int(round(data.rate_hz * syllable_s))
        want = n_units * per_syll
        if want > data.n_samples:
            raise BoundsError(f"window of {want} samples exceeds {data.n_samples}")
        if want == data.n_samples:
            return data
        return TrialRecording(
            values=data.values[:, :, -want:],
            rate_hz=data.rate_hz,
            channels=data.channels,
            condition=data.condition,
        )
    raise TypeError(f"slice_last does not handle {type(data).__name__}")


# ---------------------------------------------------------------------------
# synthetic data oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Plant:
    """A sinusoid planted into one unit (layer, neuron) or channel (channel,)."""

    where: tuple[int, ...]
    freq_hz: float
    amplitude: float
    phase: float = 0.0


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic tensor or recording; a pure function of itself.

    ``shape`` is (layers, neurons, timepoints) for ``kind="activation"`` and
    (channels, trials, samples) for ``kind="trial"``. Planted channels are
    phase-locked: every trial receives the same sinusoid.
    """

    kind: str
    shape: tuple[int, int, int]
    rate_hz: float
    plants: tuple[Plant, ...] = ()
    noise_sigma: float = 0.0
    seed: int = 0
    corpus_tag: str = "synth"
    condition: ConditionLabel | None = None
    channel_layout: tuple[tuple[str, str], ...] | None = None

    def __post_init__(self):
        if self.kind not in ("activation", "trial"):
            raise ConfigError(f"unknown synth kind {self.kind!r}")
        if len(self.shape) != 3 or any(s <= 0 for s in self.shape):
            raise ConfigError(f"bad shape {self.shape}")
        if self.noise_sigma < 0:
            raise ConfigError("noise_sigma must be >= 0")
        for p in self.plants:
            if not p.freq_hz < self.rate_hz / 2:
                raise ConfigError(
                    f"planted frequency {p.freq_hz} Hz not below Nyquist {self.rate_hz / 2} Hz"
                )
        object.__setattr__(self, "plants", tuple(self.plants))


def _sinusoid(n: int, rate_hz: float, freq: float, amp: float, phase: float) -> np.ndarray:
    t = np.arange(n) / rate_hz
    return amp * np.cos(2.0 * np.pi * freq * t + phase)


def default_channel_layout(n_channels: int) -> tuple[tuple[str, str], ...]:
    """Round-robin (hemisphere, AAL label) assignment over the shipped map."""
    labels = sorted(default_roi_map().entries)
    out = []
    for i in range(n_channels):
        hemi = HEMISPHERES[i % 2]
        out.append((hemi, labels[(i // 2) % len(labels)]))
    return tuple(out)


def channel_metas_from_layout(layout, roi_map: RoiMap | None = None) -> tuple[ChannelMeta, ...]:
    roi_map = roi_map or default_roi_map()
    return tuple(
        ChannelMeta(i, hemi, aal, roi_map.resolve(aal))
        for i, (hemi, aal) in enumerate(layout)
    )


def synth_generate(spec: SynthSpec):
    """Generate an ActivationTensor or TrialRecording from the recipe."""
    rng = np.random.default_rng(spec.seed)
    if spec.noise_sigma > 0:
        values = rng.normal(0.0, spec.noise_sigma, spec.shape)
    else:
        values = np.zeros(spec.shape)

    if spec.kind == "activation":
        n_time = spec.shape[2]
        for p in spec.plants:
            layer, neuron = p.where
            values[layer, neuron] += _sinusoid(n_time, spec.rate_hz, p.freq_hz, p.amplitude, p.phase)
        return ActivationTensor(
            values=values.astype(np.float32),
            rate_hz=spec.rate_hz,
            corpus_tag=spec.corpus_tag,
            condition=spec.condition,
        )

    n_samples = spec.shape[2]
    for p in spec.plants:
        (channel,) = p.where
        values[channel] += _sinusoid(n_samples, spec.rate_hz, p.freq_hz, p.amplitude, p.phase)
    layout = spec.channel_layout or default_channel_layout(spec.shape[0])
    if len(layout) != spec.shape[0]:
        raise ConfigError("channel_layout length must equal n_channels")
    return TrialRecording(
        values=values.astype(np.float32),
        rate_hz=spec.rate_hz,
        channels=channel_metas_from_layout(layout),
        condition=spec.condition,
    )
