"""Kernel selection: the compiled extension when importable, numpy otherwise.

Set ``IRSHO_PURE_PYTHON=1`` to force the numpy kernels.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "numpy"
eta_threshold_probs = _fallback.eta_threshold_probs
trial_signals = _fallback.trial_signals

if os.environ.get("IRSHO_PURE_PYTHON") != "1":
    try:
        from . import _kernels  # type: ignore[attr-defined]
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        BACKEND = "cython"
        eta_threshold_probs = _kernels.eta_threshold_probs
        trial_signals = _kernels.trial_signals

__all__ = ["BACKEND", "eta_threshold_probs", "trial_signals"]
