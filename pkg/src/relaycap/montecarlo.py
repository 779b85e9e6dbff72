"""Reproducible Monte Carlo over channel realizations.

Trial ``t`` of a run with seed ``seed`` draws from its own generator,
``PCG64(SeedSequence(seed, spawn_key=(t,)))``, so results do not depend on
execution order or on the number of worker threads.  Reductions always run
in trial-index order.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from relaycap import linalg
from relaycap.channel import NetworkConfig, PowerAllocation, sample_covariances, solve_power
from relaycap.errors import ContractError, RelayCapError
from relaycap.spectrum import EmpiricalDistribution, capacity_from_eigs

DEFAULT_CAPACITY_TRIALS = 200
DEFAULT_SPECTRUM_TRIALS = 20


class TrialError(RelayCapError):
    """A single trial failed; carries the trial index and the original error."""

    def __init__(self, trial, cause):
        super().__init__(f"trial {trial} failed: {type(cause).__name__}: {cause}")
        self.trial = trial
        self.cause = cause


@dataclass(frozen=True)
class CapacityEstimate:
    mean: float
    stderr: float
    trials: int
    config: NetworkConfig
    power: PowerAllocation


@dataclass(frozen=True)
class WhitenessStats:
    mean: float
    max: float
    distances: tuple


def trial_rng(seed, t):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(int(seed), spawn_key=(int(t),))))


def run_trials(fn, trials, threads=1):
    """``[fn(0), ..., fn(trials - 1)]`` evaluated on up to ``threads`` workers."""
    if int(trials) != trials or trials < 1:
        raise ContractError(f"trials must be an integer >= 1, got {trials!r}")
    if threads < 1:
        raise ContractError("threads must be >= 1")

    def _guarded(t):
        try:
            return fn(t)
        except Exception as exc:  # noqa: BLE001 - re-raised with trial context
            raise TrialError(t, exc) from exc

    if threads == 1 or trials == 1:
        return [_guarded(t) for t in range(trials)]
    with ThreadPoolExecutor(max_workers=min(threads, trials)) as pool:
        return list(pool.map(_guarded, range(trials)))


def _trial_eigs(cfg, pw, method):
    def fn(t):
        r_s, r_n = sample_covariances(cfg, pw, trial_rng(cfg.seed, t), method=method)
        return linalg.whiten_eigenvalues(r_s, r_n)
    return fn


def summarize(values):
    """Mean and standard error (``nan`` for a single value), reduced in index order."""
    v = np.asarray(values, dtype=np.float64)
    mean = math.fsum(v) / v.size
    if v.size < 2:
        return mean, float("nan")
    var = math.fsum((v - mean) ** 2) / (v.size - 1)
    return mean, math.sqrt(var / v.size)


def ergodic_capacity(cfg, trials=DEFAULT_CAPACITY_TRIALS, threads=1, method="auto"):
    """Monte Carlo estimate of ``E[(1/(L+1)) log det(I + R_s R_n^{-1})]`` in nats."""
    pw = solve_power(cfg.snr, cfg.L)
    eig_fn = _trial_eigs(cfg, pw, method)
    caps = run_trials(lambda t: capacity_from_eigs(eig_fn(t), cfg.L), trials, threads)
    mean, se = summarize(caps)
    return CapacityEstimate(mean=mean, stderr=se, trials=int(trials), config=cfg, power=pw)


def pooled_spectrum(cfg, trials=DEFAULT_SPECTRUM_TRIALS, threads=1, method="auto"):
    """All whitened eigenvalues of ``trials`` realizations, as one sample."""
    pw = solve_power(cfg.snr, cfg.L)
    eigs = run_trials(_trial_eigs(cfg, pw, method), trials, threads)
    return EmpiricalDistribution(np.concatenate(eigs))


def noise_whiteness(cfg, trials=DEFAULT_SPECTRUM_TRIALS, threads=1, method="auto"):
    """Per-trial ``(1/n_d) ||c I - R_n||_Tr`` with ``c = sum_l alpha^l``."""
    pw = solve_power(cfg.snr, cfg.L)
    target = math.fsum(pw.alpha**l for l in range(cfg.L + 1))

    def fn(t):
        _, r_n = sample_covariances(cfg, pw, trial_rng(cfg.seed, t), method=method)
        return linalg.trace_norm_distance(r_n, target)

    d = run_trials(fn, trials, threads)
    return WhitenessStats(mean=math.fsum(d) / len(d), max=max(d), distances=tuple(d))
