"""Monte-Carlo validation: full-chain bit simulation through DF relay cascades.

Per symbol: draw a correlated fade vector, transmit the Gray-labelled point
through ``r = eta * beta * g * x + n`` (``g`` the aggregate fade, ``n`` white
Gaussian per signal dimension), detect by ML with the true aggregate gain
known at the receiver, and forward the *detected* symbol to the next hop.

Each partition owns a stream seeded from ``SeedSequence(seed, spawn_key=(p,))``,
so a run is fully determined by ``(seed, partitions)``.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy import stats as sps

from .analysis import HopBerModel, combining_for
from .channel import ChannelStats, aggregate_gain, sample_fades
from .modulation import (ModulationScheme, bep_parameters, build_constellation,
                         calibrated_noise_std, ml_detect_batch)
from .numerics import q_approx_sq, q_exact

MIN_TRIALS = 10 ** 6


@dataclass(frozen=True)
class SimulationParams:
    trials: int = MIN_TRIALS
    seed: int = 0
    partitions: int = 1
    responsivity: float = 1.0
    noise_variance: float = None   # overrides the SNR calibration when set
    max_trials: int = 10 ** 8
    ber_floor: float = 1e-6
    chunk: int = 1 << 18

    def __post_init__(self):
        if self.trials < MIN_TRIALS:
            raise ValueError(f"trials must be >= {MIN_TRIALS}")
        if self.partitions < 1:
            raise ValueError("partitions must be >= 1")
        if not self.responsivity > 0:
            raise ValueError("responsivity must be > 0")
        if self.noise_variance is not None and not self.noise_variance > 0:
            raise ValueError("noise_variance must be > 0")
        if self.max_trials < self.trials:
            raise ValueError("max_trials must be >= trials")


@dataclass(frozen=True)
class BerEstimate:
    errors: int
    trials: int
    estimate: float
    ci_low: float
    ci_high: float

    @classmethod
    def from_counts(cls, errors, trials, confidence=0.95):
        lo, hi = wilson_ci(errors, trials, confidence)
        return cls(int(errors), int(trials), errors / trials, lo, hi)

    @property
    def std(self):
        """Binomial standard deviation of the estimate."""
        p = self.estimate
        return math.sqrt(max(p * (1 - p), 0.0) / self.trials)


def wilson_ci(errors, trials, confidence=0.95):
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    if not 0 <= errors <= trials:
        raise ValueError("errors must lie in [0, trials]")
    z = sps.norm.ppf(0.5 + confidence / 2)
    p = errors / trials
    denom = 1 + z * z / trials
    centre = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    lo, hi = max(0.0, centre - half), min(1.0, centre + half)
    return float(min(lo, p)), float(max(hi, p))


def partition_stream(seed, partition):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(partition,)))


def trials_for_target(target_ber, minimum=MIN_TRIALS, budget=10 ** 8):
    """Enough bits for ~100 expected errors, bounded below and above."""
    want = math.ceil(100.0 / target_ber) if target_ber > 0 else budget
    return int(min(max(minimum, want), budget))


def _workers():
    try:
        return max(1, int(os.environ.get("FSO_LINKLAB_THREADS", "1")))
    except ValueError:
        return 1


def _noise_std(const, gamma_bar, params):
    if params.noise_variance is not None:
        return math.sqrt(params.noise_variance)
    return params.responsivity * calibrated_noise_std(const, gamma_bar)


def _cascade_errors(const, stats, hops, sigma, params, n_symbols, rng):
    """Bit errors of ``n_symbols`` symbols sent through ``hops`` DF hops."""
    combining = combining_for(const.scheme)
    amp = params.responsivity * stats.beta
    errors = 0
    done = 0
    while done < n_symbols:
        n = min(params.chunk, n_symbols - done)
        src = rng.integers(0, const.size, n)
        idx = src
        for _ in range(hops):
            g = amp * aggregate_gain(sample_fades(stats, rng, n), combining)
            r = g[:, None] * const.points[idx]
            if sigma > 0:
                r = r + sigma * rng.standard_normal(r.shape)
            idx = ml_detect_batch(r, const, g)
        errors += int(np.bitwise_count(const.labels[src] ^ const.labels[idx]).sum())
        done += n
    return errors


def _run(const, stats, hops, gamma_bar, params, trials, stream=None):
    sigma = _noise_std(const, gamma_bar, params)
    n_sym = math.ceil(trials / const.bits_per_symbol)
    if stream is not None:
        errs = _cascade_errors(const, stats, hops, sigma, params, n_sym, stream)
        return BerEstimate.from_counts(errs, n_sym * const.bits_per_symbol)
    p = params.partitions
    sizes = [n_sym // p + (i < n_sym % p) for i in range(p)]

    def one(i):
        return _cascade_errors(const, stats, hops, sigma, params, sizes[i],
                               partition_stream(params.seed, i))

    workers = min(_workers(), p)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            errs = sum(pool.map(one, range(p)))
    else:
        errs = sum(one(i) for i in range(p))
    return BerEstimate.from_counts(errs, n_sym * const.bits_per_symbol)


def simulate_hop(scheme: ModulationScheme, stats: ChannelStats, gamma_bar: float,
                 params: SimulationParams, stream=None) -> BerEstimate:
    """Bit-level MC of one hop; ``stream=None`` uses the partitioned seeded streams."""
    const = build_constellation(scheme)
    return _run(const, stats, 1, gamma_bar, params, params.trials, stream)


def simulate_multihop(scenario, gamma_bar: float, params: SimulationParams,
                      target_ber=None) -> BerEstimate:
    """End-to-end MC of the scenario's K-hop decode-and-forward cascade."""
    const = build_constellation(scenario.scheme)
    trials = params.trials
    if target_ber is not None:
        trials = trials_for_target(target_ber, params.trials, params.max_trials)
    return _run(const, scenario.channel_stats(), scenario.hops, gamma_bar, params, trials)


def mc_average_bep(gamma_bar, model: HopBerModel, n_draws, rng, chunk=10 ** 6):
    """Monte-Carlo mean (and standard error) of the conditional BEP over fades.

    Uses the same aggregate fade and Q form as the closed-form engine, so it
    checks the quadrature, not the detector.
    """
    f, kappa = bep_parameters(model.scheme)
    g = kappa * gamma_bar * model.stats.beta ** 2
    combining = combining_for(model.scheme)
    total = total_sq = 0.0
    done = 0
    while done < n_draws:
        n = min(chunk, n_draws - done)
        a = aggregate_gain(sample_fades(model.stats, rng, n), combining)
        x2 = g * a * a
        vals = f * (q_approx_sq(x2) if model.q_mode == "approx" else q_exact(np.sqrt(x2)))
        total += vals.sum()
        total_sq += (vals * vals).sum()
        done += n
    mean = total / n_draws
    var = max(total_sq / n_draws - mean * mean, 0.0)
    return mean, math.sqrt(var / n_draws)
