# SPDX-License-Identifier: Apache-2.0
"""Per-segment playback speed optimization with a recognizer in the loop."""

import json as _json

from ._speedfit import (  # noqa: F401
    SAMPLE_RATE,
    UsageError,
    cer,
    ctc_nll,
    loss_speed,
    pearson,
    recognize,
    render,
    stretch,
    synth_fixture,
    wer,
)
from ._speedfit import optimize as _optimize


def optimize(samples, reference=None, config=None, sample_rate=SAMPLE_RATE):
    """Optimize per-segment rates; `config` takes the same keys as the CLI."""
    out = _optimize(samples, reference, _json.dumps(config or {}), sample_rate)
    out["loss"] = _json.loads(out["loss"])
    return out
