"""Empirical eigenvalue distributions and functionals of them."""

from dataclasses import dataclass

import numpy as np

from relaycap.errors import ContractError

KS_GRID_POINTS = 512


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Sorted eigenvalue sample; its CDF counts values *strictly* below x."""

    values: np.ndarray

    def __post_init__(self):
        v = np.sort(np.asarray(self.values, dtype=np.float64).ravel())
        if not np.all(np.isfinite(v)):
            raise ContractError("eigenvalue sample has non-finite values")
        if v.size and v[0] < 0:
            raise ContractError(f"eigenvalue sample has negative value {v[0]!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self):
        return self.values.size

    def cdf(self, x):
        return ecdf_eval(self, x)

    def expect(self, g):
        return float(np.mean(g(self.values))) if self.n else 0.0

    def mass_below(self, x):
        return ecdf_eval(self, x)


def ecdf_eval(ed, x):
    """Fraction of sample values strictly below ``x`` (scalar or array)."""
    counts = np.searchsorted(ed.values, x, side="left")
    out = counts / ed.n
    return float(out) if np.ndim(out) == 0 else out


def _eval_ref(ref_cdf, x):
    try:
        y = np.asarray(ref_cdf(x), dtype=np.float64)
        if y.shape == x.shape:
            return y
    except (TypeError, ValueError):
        pass
    return np.array([float(ref_cdf(float(t))) for t in x])


def ks_distance(ed, ref_cdf):
    """Sup-distance between the sample's CDF and a reference CDF.

    Evaluated on both one-sided limits at every sample point and at a
    512-point grid over ``[0, 1.1 * max]``.  Between consecutive sample
    points the sample CDF is flat and ``ref_cdf`` is monotone, so this is
    the exact supremum for any monotone reference.
    """
    if ed.n == 0:
        raise ContractError("empty eigenvalue sample")
    v = ed.values
    top = v[-1] if ed.n else 0.0
    grid = np.linspace(0.0, 1.1 * top if top > 0 else 1.0, KS_GRID_POINTS)
    pts = np.unique(np.concatenate([v, grid]))
    left = np.nextafter(pts, -np.inf)
    right = np.nextafter(pts, np.inf)
    f_left = np.searchsorted(v, pts, side="left") / ed.n
    f_right = np.searchsorted(v, pts, side="right") / ed.n
    ref_left, ref_right = _eval_ref(ref_cdf, left), _eval_ref(ref_cdf, right)
    if not (np.all(np.isfinite(ref_left)) and np.all(np.isfinite(ref_right))):
        raise ContractError("reference CDF returned non-finite values")
    d_left = np.abs(f_left - ref_left)
    d_right = np.abs(f_right - ref_right)
    return float(min(1.0, max(d_left.max(), d_right.max())))


def capacity_from_eigs(eigs, l):
    """``(1/(l+1)) * sum(log(1 + lambda))`` in nats; ``l = 0`` is point-to-point."""
    eigs = np.asarray(eigs, dtype=np.float64)
    if eigs.size and np.min(eigs) < 0:
        raise ContractError(f"negative eigenvalue {np.min(eigs)!r}")
    if l < 0:
        raise ContractError("hop count must be >= 0")
    return float(np.sum(np.log1p(eigs))) / (l + 1)


def shannon_transform(source, rho):
    """``E[log(1 + rho X)]`` for a sample or an analytic spectral law.

    ``source`` may be an eigenvalue array, an :class:`EmpiricalDistribution`,
    or any law exposing ``expect(g)`` (e.g. :class:`relaycap.rmt.MarchenkoPastur`,
    whose atom at zero contributes nothing).
    """
    if rho < 0:
        raise ContractError("rho must be nonnegative")
    if rho == 0:
        return 0.0
    if not hasattr(source, "expect"):
        source = EmpiricalDistribution(source)
    return float(source.expect(lambda x: np.log1p(rho * x)))
