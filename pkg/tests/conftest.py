import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_activation(values, rate_hz=4.0, **kw):
    from hftp.ingest import ActivationTensor

    return ActivationTensor(np.asarray(values, dtype=np.float32), rate_hz, **kw)


def make_recording(values, rate_hz=64.0, layout=None, **kw):
    from hftp.ingest import TrialRecording, channel_metas_from_layout, default_channel_layout

    values = np.asarray(values, dtype=np.float32)
    layout = layout or default_channel_layout(values.shape[0])
    return TrialRecording(values, rate_hz, channels=channel_metas_from_layout(layout), **kw)
