"""System model of the amplify-and-forward relay chain.

Cluster 1 sits next to the destination and cluster L next to the sources, so
``H_1`` is ``n_d x k``, ``H_2 ... H_L`` are ``k x k`` and ``H_{L+1}`` is
``k x n_s``.  Every relay antenna scales its received signal by
``sqrt(alpha / k)`` with ``alpha = P / (1 + P)``.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from relaycap import linalg
from relaycap.errors import ContractError, DomainError, ShapeError

ENTRY_DISTS = ("complex-gaussian", "qpsk")
_DIST_ALIASES = {"gaussian": "complex-gaussian", "complex-gaussian": "complex-gaussian", "qpsk": "qpsk"}


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def linear_to_db(x):
    return 10.0 * math.log10(x)


@dataclass(frozen=True)
class NetworkConfig:
    n_s: int
    n_d: int
    k: int
    L: int
    snr: float
    entry_dist: str = "complex-gaussian"
    seed: int = 0

    def __post_init__(self):
        for name in ("n_s", "n_d", "k", "L"):
            v = getattr(self, name)
            if int(v) != v or v < 1:
                raise ContractError(f"{name} must be an integer >= 1, got {v!r}")
            object.__setattr__(self, name, int(v))
        if not (self.snr > 0 and math.isfinite(self.snr)):
            raise ContractError(f"snr must be positive and finite, got {self.snr!r}")
        dist = _DIST_ALIASES.get(self.entry_dist)
        if dist is None:
            raise ContractError(f"entry_dist must be one of {ENTRY_DISTS}, got {self.entry_dist!r}")
        object.__setattr__(self, "entry_dist", dist)
        if not 0 <= int(self.seed) < 2**64:
            raise ContractError("seed must fit in 64 unsigned bits")
        object.__setattr__(self, "seed", int(self.seed))

    @property
    def beta_s(self):
        return Fraction(self.n_s, self.n_d)

    @property
    def beta_r(self):
        return Fraction(self.k, self.n_d)


@dataclass(frozen=True)
class PowerAllocation:
    p: float
    alpha: float
    snr: float
    L: int


def solve_power(snr, L):
    """Resolve the coupled source power / relay gain definitions.

    ``P = (1 - alpha^(L+1)) / ((1 - alpha) alpha^L) * snr`` together with
    ``alpha = P / (1 + P)`` eliminates to ``alpha^(L+1) = snr / (1 + snr)``.
    """
    if not snr > 0:
        raise DomainError(f"snr must be positive, got {snr!r}")
    if int(L) != L or L < 1:
        raise DomainError(f"hop count must be >= 1, got {L!r}")
    # log(alpha) = -log1p(1/snr) / (L+1); expm1 keeps 1 - alpha accurate near 1
    log_alpha = -math.log1p(1.0 / snr) / (L + 1)
    alpha = math.exp(log_alpha)
    one_minus = -math.expm1(log_alpha)
    return PowerAllocation(p=alpha / one_minus, alpha=alpha, snr=float(snr), L=int(L))


@dataclass(frozen=True)
class ChannelRealization:
    matrices: tuple
    config: NetworkConfig = field(repr=False)

    def __post_init__(self):
        cfg = self.config
        mats = tuple(linalg.as_matrix(h) for h in self.matrices)
        if len(mats) != cfg.L + 1:
            raise ShapeError(f"expected {cfg.L + 1} hop matrices, got {len(mats)}")
        expected = [(cfg.n_d, cfg.k)] + [(cfg.k, cfg.k)] * (cfg.L - 1) + [(cfg.k, cfg.n_s)]
        for idx, (h, shape) in enumerate(zip(mats, expected), start=1):
            if h.shape != shape:
                raise ShapeError(f"H_{idx} has shape {h.shape}, expected {shape}")
        object.__setattr__(self, "matrices", mats)


def draw_entries(rng, shape, dist="complex-gaussian"):
    """iid zero-mean unit-variance complex entries."""
    if dist == "complex-gaussian":
        re = rng.standard_normal(shape)
        im = rng.standard_normal(shape)
        return (re + 1j * im) * math.sqrt(0.5)
    if dist == "qpsk":
        bits = rng.integers(0, 2, size=(2,) + tuple(shape))
        return ((2 * bits[0] - 1) + 1j * (2 * bits[1] - 1)) * math.sqrt(0.5)
    raise ContractError(f"unknown entry distribution {dist!r}")


def sample_channels(cfg, rng):
    shapes = [(cfg.n_d, cfg.k)] + [(cfg.k, cfg.k)] * (cfg.L - 1) + [(cfg.k, cfg.n_s)]
    return ChannelRealization(tuple(draw_entries(rng, s, cfg.entry_dist) for s in shapes), cfg)


def _normalized_prefixes(real):
    """``H_1 ... H_l / k^(l/2)`` for l = 1..L."""
    k = real.config.k
    out = []
    q = real.matrices[0] / math.sqrt(k)
    out.append(q)
    for h in real.matrices[1:-1]:
        q = linalg.matmul(q, h) / math.sqrt(k)
        out.append(q)
    return out


def normalized_signal_covariance(real):
    """``(1 / (n_s k^L)) H_1 ... H_{L+1} H_{L+1}^H ... H_1^H``."""
    q = _normalized_prefixes(real)[-1]
    return linalg.scaled_gram(linalg.matmul(q, real.matrices[-1]), 1.0 / real.config.n_s)


def signal_covariance(real, pw):
    return pw.p * pw.alpha**real.config.L * normalized_signal_covariance(real)


def noise_partials(real):
    """``[R_{n,0}, ..., R_{n,L}]`` with ``R_{n,0} = I`` and ``R_{n,l} = H_1..H_l H_l^H..H_1^H / k^l``."""
    n_d = real.config.n_d
    return [np.eye(n_d, dtype=np.complex128)] + [linalg.scaled_gram(q) for q in _normalized_prefixes(real)]


def noise_covariance(real, pw):
    r_n = np.zeros((real.config.n_d, real.config.n_d), dtype=np.complex128)
    for l, part in enumerate(noise_partials(real)):
        r_n += pw.alpha**l * part
    return r_n


def _bartlett_factor(rng, m, dof):
    """Lower-triangular ``T`` with ``T T^H`` ~ complex Wishart(m, dof), dof >= m."""
    t = np.zeros((m, m), dtype=np.complex128)
    rows, cols = np.tril_indices(m, -1)
    t[rows, cols] = draw_entries(rng, rows.shape)
    t[np.diag_indices(m)] = np.sqrt(rng.gamma(dof - np.arange(m), 1.0))
    return t


def _gram_step(rng, f, dof):
    # f G with G (width x dof) iid CN(0,1), represented by an equal-law factor
    m = f.shape[1]
    if dof >= m:
        return f @ _bartlett_factor(rng, m, dof)
    return f @ draw_entries(rng, (m, dof))


def sample_covariances(cfg, pw, rng, method="auto"):
    """Draw ``(R_s, R_n)`` for one channel realization.

    ``method="explicit"`` forms every hop matrix.  ``method="wishart"``
    (complex Gaussian entries only) propagates an ``n_d x m`` factor of the
    partial Gram matrices instead: by unitary invariance
    ``H_1..H_l H_{l+1}`` has iid ``CN(0, W_l)`` columns, so one Bartlett
    factor per hop reproduces the exact joint law at ``O(n_d^3)`` cost per
    hop, independent of ``k``.  ``"auto"`` picks ``wishart`` for Gaussian
    entries and ``explicit`` otherwise.
    """
    if method == "auto":
        method = "wishart" if cfg.entry_dist == "complex-gaussian" else "explicit"
    if method == "explicit":
        real = sample_channels(cfg, rng)
        return signal_covariance(real, pw), noise_covariance(real, pw)
    if method != "wishart":
        raise ContractError(f"unknown sampling method {method!r}")
    if cfg.entry_dist != "complex-gaussian":
        raise ContractError("the Wishart-chain sampler is exact only for complex Gaussian entries")
    n_d, k = cfg.n_d, cfg.k
    f = np.eye(n_d, dtype=np.complex128)
    r_n = np.eye(n_d, dtype=np.complex128)
    for l in range(1, cfg.L + 1):
        f = _gram_step(rng, f, k) / math.sqrt(k)
        r_n += pw.alpha**l * (f @ f.conj().T)
    f = _gram_step(rng, f, cfg.n_s)
    r_s = (pw.p * pw.alpha**cfg.L / cfg.n_s) * (f @ f.conj().T)
    r_n = 0.5 * (r_n + r_n.conj().T)
    r_s = 0.5 * (r_s + r_s.conj().T)
    return r_s, r_n


def simulate_transmission(real, pw, s, rng=None, noise=True, return_relays=False):
    """Push source symbols hop by hop through the relay chain.

    ``s`` is ``(n_s,)`` or ``(n_s, T)`` for ``T`` channel uses.  Fresh
    unit-variance circular noise is added at every relay cluster and at the
    destination unless ``noise=False``.  With ``return_relays=True`` the
    transmit vectors ``r_L, ..., r_1`` are returned as well.
    """
    cfg = real.config
    s = np.asarray(s, dtype=np.complex128)
    single = s.ndim == 1
    if single:
        s = s[:, None]
    if s.ndim != 2 or s.shape[0] != cfg.n_s:
        raise ShapeError(f"source block must have {cfg.n_s} rows, got shape {s.shape}")
    if noise and rng is None:
        raise ContractError("a random stream is required when noise is enabled")

    def _noise(rows):
        if not noise:
            return 0.0
        return draw_entries(rng, (rows, s.shape[1]))

    gain = math.sqrt(pw.alpha / cfg.k)
    y = real.matrices[-1] @ s + _noise(cfg.k)
    relays = []
    for h in real.matrices[-2::-1]:
        r = gain * y
        relays.append(r)
        y = h @ r + _noise(h.shape[0])
    if single:
        y = y[:, 0]
        relays = [r[:, 0] for r in relays]
    return (y, relays) if return_relays else y
