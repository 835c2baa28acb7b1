"""Compare the compiled kernels with the numpy fallback on recorded inputs.

The arguments are captured from a real analysis step and a real Monte Carlo
trial, so both backends see representative array sizes.

Usage: ``python3 benchmarks/bench_kernels.py [--repeat N]``
"""
from __future__ import annotations

import argparse
import timeit

import numpy as np

from irsho import _fallback, kernels
from irsho.config import NetworkConfig
from irsho.ho_engine import run_analysis
from irsho.mc_sim import simulate_matched


def _capture(name, run):
    seen = []
    orig = getattr(kernels, name)

    def spy(*args):
        if len(seen) < 32:
            seen.append(args)
        return orig(*args)

    setattr(kernels, name, spy)
    try:
        run()
    finally:
        setattr(kernels, name, orig)
    return seen


def _time(fn, calls, repeat):
    best = min(timeit.repeat(lambda: [fn(*a) for a in calls], number=1, repeat=repeat))
    return best / len(calls)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if kernels.BACKEND != "cython":
        print("compiled extension not importable; only the numpy kernels are available")
        return 1
    from irsho import _kernels

    cfg = NetworkConfig()
    eta_calls = _capture("eta_threshold_probs", lambda: run_analysis(cfg))
    sig_calls = _capture("trial_signals", lambda: simulate_matched(cfg, n_trials=32, seed=0))

    print(f"{'kernel':<22}{'cython [ms]':>14}{'numpy [ms]':>14}{'speedup':>10}{'max |diff|':>14}")
    for name, calls in (("eta_threshold_probs", eta_calls), ("trial_signals", sig_calls)):
        fast, slow = getattr(_kernels, name), getattr(_fallback, name)
        diff = 0.0
        for a in calls[:8]:
            for u, v in zip(fast(*a), slow(*a)):
                u, v = np.asarray(u, dtype=float), np.asarray(v, dtype=float)
                both = np.isfinite(u) & np.isfinite(v)
                diff = max(diff, float(np.abs(u[both] - v[both]).max(initial=0.0)))
        tc, tn = _time(fast, calls, args.repeat), _time(slow, calls, args.repeat)
        print(f"{name:<22}{tc * 1e3:>14.3f}{tn * 1e3:>14.3f}{tn / tc:>10.1f}{diff:>14.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
