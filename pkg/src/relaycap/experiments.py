"""Capacity sweeps over hop count, regime diagnostics and lemma probes."""

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from relaycap import linalg
from relaycap.channel import NetworkConfig, draw_entries, sample_covariances, solve_power
from relaycap.errors import ContractError, RelayCapError
from relaycap.montecarlo import CapacityEstimate, ergodic_capacity, run_trials, summarize, trial_rng
from relaycap.rmt import MarchenkoPastur
from relaycap.spectrum import EmpiricalDistribution, capacity_from_eigs, ks_distance

K_RULES = ("n*L^g", "L^g")


def relay_count(n, l, gamma, rule="n*L^g"):
    """Antennas per relay cluster, rounded half-up with a floor of 1."""
    if rule == "n*L^g":
        raw = n * l**gamma
    elif rule == "L^g":
        raw = l**gamma
    else:
        raise ContractError(f"k_rule must be one of {K_RULES}, got {rule!r}")
    return max(1, int(math.floor(raw + 0.5)))


@dataclass(frozen=True)
class SweepSpec:
    n: int
    snr: float
    gammas: tuple
    l_values: tuple
    k_rule: str = "n*L^g"
    trials: int = 200
    seed: int = 0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ContractError("n must be an integer >= 1")
        if not self.snr > 0:
            raise ContractError("snr must be positive")
        gammas = tuple(float(g) for g in self.gammas)
        if any(int(l) != l for l in self.l_values):
            raise ContractError("l_values must be integers")
        ls = tuple(int(l) for l in self.l_values)
        if not gammas or any(g < 0 for g in gammas):
            raise ContractError("gammas must be a nonempty list of nonnegative reals")
        if not ls or any(l < 1 for l in ls) or list(ls) != sorted(set(ls)):
            raise ContractError("l_values must be strictly ascending integers >= 1")
        if self.k_rule not in K_RULES:
            raise ContractError(f"k_rule must be one of {K_RULES}")
        if int(self.trials) != self.trials or self.trials < 1:
            raise ContractError("trials must be an integer >= 1")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "gammas", gammas)
        object.__setattr__(self, "l_values", ls)
        object.__setattr__(self, "trials", int(self.trials))


@dataclass(frozen=True)
class SweepRow:
    gamma: float
    l: int
    k: int
    c0_mean: float
    c0_stderr: float
    trials: int
    error: str = None


def _normalized(est, l, n):
    return (l + 1) * est.mean / n, (l + 1) * est.stderr / n


def capacity_sweep(spec, threads=1, method="auto"):
    """One row per ``(gamma, L)`` in lexicographic order; failed cells keep a message."""
    rows = []
    for gamma in spec.gammas:
        for l in spec.l_values:
            k = relay_count(spec.n, l, gamma, spec.k_rule)
            try:
                cfg = NetworkConfig(spec.n, spec.n, k, l, spec.snr, seed=spec.seed)
                mean, se = _normalized(ergodic_capacity(cfg, spec.trials, threads, method), l, spec.n)
                rows.append(SweepRow(gamma, l, k, mean, se, spec.trials))
            except RelayCapError as exc:
                rows.append(SweepRow(gamma, l, k, float("nan"), float("nan"), spec.trials, str(exc)))
    return rows


def point_to_point_reference(n, snr, trials=200, seed=0, threads=1):
    """``(1/n) E[log det(I + (snr/n) H H^H)]`` for square iid CN(0,1) ``H``."""
    if int(n) != n or n < 1:
        raise ContractError("n must be an integer >= 1")
    if not snr > 0:
        raise ContractError("snr must be positive")

    def fn(t):
        h = draw_entries(trial_rng(seed, t), (n, n))
        lam = linalg.hermitian_eigenvalues(linalg.scaled_gram(h, snr / n))
        return float(np.sum(np.log1p(np.clip(lam, 0.0, None)))) / n

    mean, se = summarize(run_trials(fn, trials, threads))
    return CapacityEstimate(mean=mean, stderr=se, trials=int(trials), config=None, power=None)


@dataclass(frozen=True)
class RegimeRow:
    l: int
    beta_r: float
    k: int
    ks: float
    low_mass: float
    whiteness_mean: float
    whiteness_max: float
    c0_mean: float
    c0_stderr: float


def regime_report(n_d, snr, schedule, trials=20, seed=0, beta_s=1.0, threads=1, low_fraction=0.05):
    """Spectral, noise and capacity diagnostics for each ``(L, beta_r)`` pair.

    ``ks`` compares the pooled spectrum with the snr-scaled Marchenko-Pastur
    law; ``low_mass`` is the pooled fraction of eigenvalues below
    ``low_fraction * snr``.
    """
    n_s = max(1, int(round(beta_s * n_d)))
    law = MarchenkoPastur(n_s / n_d)
    rows = []
    for l, beta_r in schedule:
        k = max(1, int(math.floor(beta_r * n_d + 0.5)))
        cfg = NetworkConfig(n_s, n_d, k, l, snr, seed=seed)
        pw = solve_power(snr, l)
        target = math.fsum(pw.alpha**j for j in range(l + 1))

        def fn(t, cfg=cfg, pw=pw, target=target):
            r_s, r_n = sample_covariances(cfg, pw, trial_rng(cfg.seed, t))
            return linalg.whiten_eigenvalues(r_s, r_n), linalg.trace_norm_distance(r_n, target)

        out = run_trials(fn, trials, threads)
        ed = EmpiricalDistribution(np.concatenate([e for e, _ in out]))
        dist = [d for _, d in out]
        mean, se = summarize([capacity_from_eigs(e, l) for e, _ in out])
        rows.append(RegimeRow(
            l=l, beta_r=float(beta_r), k=k,
            ks=ks_distance(ed, lambda x: law.cdf(np.asarray(x) / snr)),
            low_mass=ed.mass_below(low_fraction * snr),
            whiteness_mean=math.fsum(dist) / len(dist), whiteness_max=max(dist),
            c0_mean=(l + 1) * mean / n_d, c0_stderr=(l + 1) * se / n_d,
        ))
    return rows


def lemma1_probe(c, m, gamma_exp, kappas):
    """``(c/kappa + 1)^(m kappa^gamma)`` evaluated in log space (``inf`` on overflow)."""
    if not (c > 0 and m > 0 and gamma_exp > 0):
        raise ContractError("c, m and gamma_exp must be positive")
    k = np.asarray(kappas, dtype=np.float64)
    if np.any(k <= 0):
        raise ContractError("kappas must be positive")
    with np.errstate(over="ignore"):
        return np.exp(m * k**gamma_exp * np.log1p(c / k)).tolist()


def wishart_sampler(rng, n):
    x = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) * math.sqrt(0.5)
    return linalg.scaled_gram(x, 1.0 / n)


def lemma3_probe(n, delta, b_sampler=wishart_sampler, rho=1.0, seed=0, draws=1):
    """Mean over ``draws`` of ``|U_AB(rho) - U_B(rho)|`` with ``A = I + E``, ``||E|| <= delta``.

    ``U`` is the Shannon transform of the eigenvalue sample; ``E`` has
    Haar-distributed eigenvectors and eigenvalues uniform in
    ``[-delta, delta]``.
    """
    if not 0 <= delta < 0.5:
        raise ContractError("delta must lie in [0, 0.5)")
    if not rho > 0:
        raise ContractError("rho must be positive")

    def fn(t):
        rng = trial_rng(seed, t)
        b = linalg.as_matrix(b_sampler(rng, n))
        u = unitary_group.rvs(n, random_state=rng) if n > 1 else np.ones((1, 1), dtype=complex)
        a = (u * (1.0 + rng.uniform(-delta, delta, n))) @ u.conj().T
        a = 0.5 * (a + a.conj().T)
        lo = linalg.cholesky(a)
        # eig(AB) = eig(L^H B L) for A = L L^H
        m = lo.conj().T @ b @ lo
        ab = linalg.hermitian_eigenvalues(0.5 * (m + m.conj().T))
        bb = linalg.hermitian_eigenvalues(b)
        u_ab = math.fsum(np.log1p(rho * np.clip(ab, 0.0, None))) / n
        u_b = math.fsum(np.log1p(rho * np.clip(bb, 0.0, None))) / n
        return abs(u_ab - u_b)

    gaps = run_trials(fn, draws)
    return math.fsum(gaps) / len(gaps)


def lemma3_bound(delta):
    """Deterministic envelope ``log(1 + delta / (1 - delta))`` on the probe's gap."""
    return -math.log1p(-delta)
