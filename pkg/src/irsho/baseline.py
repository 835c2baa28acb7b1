"""No-IRS reference runs and paired IRS-versus-baseline ratios."""
from __future__ import annotations

from dataclasses import dataclass

from .config import NetworkConfig
from .ho_engine import HoMetrics, run_analysis

__all__ = ["BaselineMetrics", "run_baseline", "paired_run"]

_RATIO_FIELDS = ("P_hof", "P_pp", "E_ht", "E_ht_norm", "E_ho")


@dataclass
class BaselineMetrics:
    """Baseline metrics with optional ratios against an IRS run.

    ``ratios[name]`` is ``irs / baseline`` and is ``None`` when the baseline
    value is zero or either side is undefined.
    """

    metrics: HoMetrics
    irs: HoMetrics | None = None
    ratios: dict | None = None

    def __getattr__(self, name):
        # delegate metric fields to the wrapped baseline run
        if name in ("metrics", "irs", "ratios"):
            raise AttributeError(name)
        return getattr(self.metrics, name)


def _ratio(a, b):
    if a is None or b is None or b == 0:
        return None
    return a / b


def run_baseline(cfg: NetworkConfig, irs: HoMetrics | None = None, pp_coupling: str = "literal") -> BaselineMetrics:
    """Analysis with ``N = 0``; ratios are filled when ``irs`` is given."""
    base = run_analysis(cfg.replace(N=0), pp_coupling=pp_coupling)
    ratios = None
    if irs is not None:
        ratios = {k: _ratio(getattr(irs, k), getattr(base, k)) for k in _RATIO_FIELDS}
    return BaselineMetrics(base, irs, ratios)


def paired_run(cfg: NetworkConfig, pp_coupling: str = "literal") -> BaselineMetrics:
    """IRS run at ``cfg`` paired with its baseline."""
    return run_baseline(cfg, run_analysis(cfg, pp_coupling=pp_coupling), pp_coupling)
