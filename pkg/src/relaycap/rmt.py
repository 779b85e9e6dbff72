"""Asymptotic spectral laws of relay-chain matrices.

Stieltjes transforms follow the convention ``G(s) = int f(x) / (s + x) dx``,
so a point mass at ``x0`` maps to ``1 / (s + x0)``, ``G(s) ~ 1/s`` for large
real ``s``, ``0 < G(s) < 1/s`` for real ``s > 0`` and ``Im G > 0`` whenever
``Im s < 0``.  The density is recovered on the negative real axis:
``f(x) = Im G(-x - i0) / pi``.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate

from relaycap.errors import ContractError, DomainError, NoConvergenceError

RESIDUAL_TOL = 1e-10
CONTINUATION_START = 1e6


class BranchError(NoConvergenceError):
    """The solver landed on a non-physical root."""


@dataclass(frozen=True)
class AspectRatios:
    """``beta_n = k_n / k_0`` for ``n = 1..N``; ``beta_0 = 1`` is implicit."""

    betas: tuple

    def __post_init__(self):
        b = tuple(float(x) for x in self.betas)
        if not b:
            raise ContractError("need at least one aspect ratio")
        if any(not (x > 0 and math.isfinite(x)) for x in b):
            raise ContractError(f"aspect ratios must be positive, got {b}")
        object.__setattr__(self, "betas", b)

    @classmethod
    def relay_chain(cls, beta_r, L, beta_s):
        """Ratios of the normalised signal covariance: L relay hops then the source hop."""
        return cls((float(beta_r),) * L + (float(beta_s),))

    @property
    def N(self):
        return len(self.betas)

    @property
    def full(self):
        return np.array((1.0,) + self.betas)


@dataclass(frozen=True)
class StieltjesSolution:
    s: complex
    g: complex
    residual: float
    branch_id: int = 0


# ---------------------------------------------------------------- point mass


def delta_stieltjes(x0, s):
    if s + x0 == 0:
        raise DomainError(f"pole of 1/(s + x0) at s = {s!r}")
    return 1.0 / (s + x0)


# ---------------------------------------------------------------- Marchenko-Pastur


class MarchenkoPastur:
    """Limiting spectrum of ``(1/k1) X X^H`` with ``X`` of size ``k0 x k1``, ``beta = k1/k0``."""

    def __init__(self, beta):
        if not beta > 0:
            raise DomainError(f"beta must be positive, got {beta!r}")
        self.beta = float(beta)
        self.c = 1.0 / self.beta
        self.lower = (1.0 - math.sqrt(self.c)) ** 2
        self.upper = (1.0 + math.sqrt(self.c)) ** 2
        self.atom = max(0.0, 1.0 - self.beta)

    def __repr__(self):
        return f"MarchenkoPastur(beta={self.beta!r})"

    def pdf(self, x):
        x = np.asarray(x, dtype=np.float64)
        a, b = self.lower, self.upper
        inside = (x > a) & (x < b) & (x > 0)
        xs = np.where(inside, x, 1.0)
        val = np.sqrt(np.clip((b - xs) * (xs - a), 0.0, None)) / (2.0 * math.pi * self.c * xs)
        out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    # x = a + (b - a) sin^2(t/2) turns the edge square roots (and the 1/sqrt(x)
    # singularity at beta = 1) into a smooth integrand on t in [0, pi]
    def _x_of_t(self, t):
        return self.lower + (self.upper - self.lower) * np.sin(0.5 * t) ** 2

    def _t_of_x(self, x):
        a, b = self.lower, self.upper
        u = (np.clip(x, a, b) - a) / (b - a)
        return 2.0 * np.arcsin(np.sqrt(np.clip(u, 0.0, 1.0)))

    def _weight(self, t):
        half = (self.upper - self.lower) / 2.0
        x = self._x_of_t(t)
        if x <= 0.0:
            # t -> 0 limit when the lower edge is 0 (beta = 1)
            return self.upper / (2.0 * math.pi * self.c) if t == 0.0 else 0.0
        return half * half * math.sin(t) ** 2 / (2.0 * math.pi * self.c * x)

    def expect(self, g, atol=1e-12):
        """``E[g(X)]`` including the atom at zero."""
        val, _ = integrate.quad(lambda t: g(self._x_of_t(t)) * self._weight(t), 0.0, math.pi,
                                epsabs=atol, epsrel=1e-12, limit=200)
        if self.atom:
            val += self.atom * float(g(0.0))
        return val

    def cdf(self, x):
        """``P(X < x)``; vectorised, monotone by construction."""
        x = np.asarray(x, dtype=np.float64)
        flat = x.ravel()
        out = np.zeros(flat.shape)
        pos = flat > 0
        out[pos] = self.atom
        t = self._t_of_x(flat[pos])
        order = np.argsort(t, kind="stable")
        ts = t[order]
        edges = np.concatenate([[0.0], ts])
        pieces = np.array([
            integrate.quad(self._weight, lo, hi, epsabs=1e-12, epsrel=1e-11, limit=100)[0] if hi > lo else 0.0
            for lo, hi in zip(edges[:-1], edges[1:])
        ])
        cum = np.minimum(np.cumsum(np.clip(pieces, 0.0, None)), 1.0 - self.atom)
        cont = np.empty_like(cum)
        cont[order] = cum
        out[pos] += cont
        out = np.minimum(out, 1.0).reshape(x.shape)
        return float(out) if out.ndim == 0 else out

    def stieltjes(self, s):
        return mp_stieltjes(self.beta, s)


def mp_density(beta, x):
    """``(density at x, atom mass at 0)`` of the Marchenko-Pastur law."""
    law = MarchenkoPastur(beta)
    return law.pdf(x), law.atom


def mp_cdf(beta, x):
    return MarchenkoPastur(beta).cdf(x)


def _mp_roots(beta, s):
    """Both roots of ``c s G^2 + (s + 1 - c) G - 1 = 0``, c = 1/beta, cancellation-free."""
    c = 1.0 / beta
    a = c * s
    b = s + 1.0 - c
    sq = np.sqrt(complex(b * b + 4.0 * a))
    if (np.conj(b) * sq).real < 0:
        sq = -sq
    q = -0.5 * (b + sq)
    return q / a, -1.0 / q


def _select_branch(roots, s):
    """Physical root: positive for real s > 0, else Im G of opposite sign to Im s."""
    r1, r2 = roots
    s = complex(s)
    if s.imag == 0.0:
        cands = [r for r in roots if abs(r.imag) <= 1e-12 * max(1.0, abs(r)) and 0 < r.real]
        return complex(cands[0].real) if cands else r1
    good = [r for r in roots if r.imag * s.imag < 0]
    if len(good) == 1:
        return good[0]
    # both or neither: fall back to proximity to the large-|s| asymptote
    return min(roots, key=lambda r: abs(r * s - 1.0))


def mp_stieltjes(beta, s):
    """Closed-form Stieltjes transform of the Marchenko-Pastur law."""
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta!r}")
    s = complex(s)
    if s == 0:
        if beta > 1:
            return complex(beta / (beta - 1.0))
        raise DomainError("G(0) diverges for beta <= 1")
    if s.imag != 0 or s.real > 0:
        return complex(_select_branch(_mp_roots(beta, s), s))
    # on the negative real axis: one-sided limit from Im s -> 0-
    delta = 1e-9 * max(1.0, abs(s))
    approx = _select_branch(_mp_roots(beta, s - 1j * delta), s - 1j * delta)
    return complex(min(_mp_roots(beta, s), key=lambda r: abs(r - approx)))


# ---------------------------------------------------------------- products of MP matrices


def _product_terms(g, s, full):
    """Residual of the product equation and its partials in G and s."""
    beta_prev = full[:-1]
    t = (s * g - 1.0 + full[1:]) / beta_prev
    n = t.size
    # prefix/suffix products give d(prod)/dt_n without dividing by t_n
    pre = np.ones(n + 1, dtype=np.complex128)
    suf = np.ones(n + 1, dtype=np.complex128)
    pre[1:] = np.cumprod(t)
    suf[:-1] = np.cumprod(t[::-1])[::-1]
    prod = pre[-1]
    others = pre[:-1] * suf[1:]
    dprod_dg = np.sum(others * s / beta_prev)
    dprod_ds = np.sum(others * g / beta_prev)
    bn = full[-1]
    f = g * prod / bn + s * g - 1.0
    df_dg = (prod + g * dprod_dg) / bn + s
    df_ds = g * dprod_ds / bn + g
    return f, df_dg, df_ds


def product_residual(ratios, s, g):
    ratios = ratios if isinstance(ratios, AspectRatios) else AspectRatios(tuple(ratios))
    return abs(_product_terms(complex(g), complex(s), ratios.full)[0])


def _path(target, start):
    """Piecewise path from ``start`` (real, large) to ``target`` avoiding the cut s <= 0."""
    target = complex(target)
    r = abs(target)
    legs = []
    if r != start:
        legs.append(("radial", math.log(start), math.log(r)))
    theta = math.atan2(target.imag, target.real)
    if theta != 0.0:
        legs.append(("arc", r, theta))
    return legs


def _leg_point(leg, u):
    kind, p, q = leg
    if kind == "radial":
        v = p + u * (q - p)
        return complex(math.exp(v)), complex((q - p) * math.exp(v))
    z = p * complex(math.cos(u * q), math.sin(u * q))
    return z, 1j * q * z


def _newton(g, s, full, tol=1e-14, max_iter=30):
    for it in range(max_iter):
        f, df, _ = _product_terms(g, s, full)
        step = f / df
        g = g - step
        if abs(step) <= tol * max(abs(g), 1e-300):
            return g, it + 1, True
    return g, max_iter, False


def product_stieltjes(ratios, s, max_step=0.1, min_step=1e-12):
    """Solve the product-matrix Stieltjes equation by continuation.

    Tracks the physical root from ``G ~ 1/s0`` at ``s0 = 1e6`` along a
    log-spaced real path (then a circular arc through the lower half plane
    for complex ``s``) with tangent prediction and Newton correction.
    """
    ratios = ratios if isinstance(ratios, AspectRatios) else AspectRatios(tuple(ratios))
    s = complex(s)
    if s.imag == 0 and s.real <= 0:
        raise DomainError("product_stieltjes needs real s > 0 or Im s != 0")
    full = ratios.full
    start = max(CONTINUATION_START, 10.0 * abs(s))
    g, _, ok = _newton(complex(1.0 / start), complex(start), full)
    if not ok:
        raise NoConvergenceError("could not seed continuation", s=start)
    steps = 0
    for leg in _path(s, start):
        u, h = 0.0, max_step
        while u < 1.0:
            h = min(h, 1.0 - u)
            s0, ds0 = _leg_point(leg, u)
            _, df_dg, df_ds = _product_terms(g, s0, full)
            slope = -df_ds * ds0 / df_dg
            s1, _ = _leg_point(leg, u + h)
            pred = g + h * slope
            g1, iters, ok = _newton(pred, s1, full)
            # reject steps that need many corrections or jump far from the prediction
            if ok and iters <= 8 and abs(g1 - pred) <= 0.1 * abs(g) + 1e-300:
                g, u = g1, u + h
                steps += 1
                h = min(max_step, 1.5 * h)
            else:
                h *= 0.5
                if h < min_step:
                    raise NoConvergenceError("continuation step underflow", s=s, u=u, g=g, steps=steps)
    g, _, _ = _newton(g, s, full)
    res = abs(_product_terms(g, s, full)[0])
    if res > RESIDUAL_TOL:
        raise NoConvergenceError("residual above tolerance", s=s, g=g, residual=res)
    if s.imag == 0:
        g = complex(g.real)
        if not 0 < g.real < 1.0 / s.real:
            raise BranchError("continuation left the physical branch", s=s, g=g)
    return StieltjesSolution(s=s, g=g, residual=float(res), branch_id=0)


class ProductStieltjes:
    """Callable ``s -> G(s)`` for a product of MP matrices, usable by the inversion."""

    def __init__(self, ratios, max_step=0.1):
        self.ratios = ratios if isinstance(ratios, AspectRatios) else AspectRatios(tuple(ratios))
        self.max_step = max_step

    def __call__(self, s):
        return product_stieltjes(self.ratios, s, max_step=self.max_step).g

    def retry(self, s):
        return product_stieltjes(self.ratios, s, max_step=self.max_step / 20).g


# ---------------------------------------------------------------- inversion


def density_from_stieltjes(solver, x, eps=1e-3, extrapolate=False):
    """Density at ``x > 0`` as ``Im G(-x - i eps) / pi``.

    ``solver`` maps a complex ``s`` to ``G(s)``.  When the returned value
    lies on the wrong branch (``Im G < 0``) and the solver offers a
    ``retry`` method, a finer continuation is attempted.  With
    ``extrapolate=True`` the offsets ``eps, eps/2, eps/4`` are combined by
    Richardson extrapolation.
    """
    if not x > 0:
        raise DomainError("x must be positive")
    if not 0 < eps <= 1e-2:
        raise DomainError("eps must lie in (0, 1e-2]")

    def _one(e):
        s = complex(-x, -e)
        g = complex(solver(s))
        if g.imag < -1e-12 * max(1.0, abs(g)):
            if hasattr(solver, "retry"):
                g = complex(solver.retry(s))
            if g.imag < -1e-12 * max(1.0, abs(g)):
                raise BranchError("wrong Stieltjes branch (Im G < 0)", s=s, g=g)
        return max(g.imag, 0.0) / math.pi

    if not extrapolate:
        return _one(eps)
    f1, f2, f4 = _one(eps), _one(eps / 2), _one(eps / 4)
    return max(0.0, (8.0 * f4 - 6.0 * f2 + f1) / 3.0)


def density_mass(solver, lo, hi, eps=1e-3, points=400):
    """Integrated recovered density over ``[lo, hi]`` on a log-spaced grid (trapezoid)."""
    x = np.geomspace(lo, hi, points)
    f = np.array([density_from_stieltjes(solver, xi, eps) for xi in x])
    return float(integrate.trapezoid(f, x))


# ---------------------------------------------------------------- relay-chain limits


def limiting_capacity_stieltjes(beta_s, snr, s):
    """``G_C(s) = G_MP(s / snr) / snr`` (point-to-point regime)."""
    if not snr > 0:
        raise DomainError("snr must be positive")
    return mp_stieltjes(beta_s, complex(s) / snr) / snr


def vanishing_regime_stieltjes(s):
    """All eigenvalues collapse to zero: ``G(s) = 1/s``."""
    return delta_stieltjes(0.0, s)


def theta_residual(beta_s, d, s, g):
    """``g (exp(d (s g - 1)) (s g / beta_s + 1 - 1/beta_s) + s) - 1``."""
    inv = 1.0 / beta_s
    return g * (math.exp(d * (s * g - 1.0)) * (inv * s * g + 1.0 - inv) + s) - 1.0


def _theta_dres(beta_s, d, s, g):
    inv = 1.0 / beta_s
    e = math.exp(d * (s * g - 1.0))
    inner = inv * s * g + 1.0 - inv
    return e * inner + s + g * (d * s * e * inner + e * inv * s)


def _bracketed_newton(fun, dfun, lo, hi, tol=1e-15, max_iter=200):
    flo = fun(lo)
    x = 0.5 * (lo + hi)
    for _ in range(max_iter):
        fx = fun(x)
        if fx == 0.0:
            return x
        if (fx < 0) == (flo < 0):
            lo, flo = x, fx
        else:
            hi = x
        d = dfun(x)
        nx = x - fx / d if d != 0 else lo - 1.0
        if not lo < nx < hi:
            nx = 0.5 * (lo + hi)
        if abs(nx - x) <= tol * max(abs(x), 1e-300) or hi - lo <= tol * hi:
            return nx
        x = nx
    return x


def theta_regime_stieltjes(beta_s, d, s, scan_points=2001):
    """Root in ``(0, 1/s)`` of the linear-scaling (``L ~ beta_r``) limit equation.

    The residual is ``-1`` at ``g = 0`` and ``1/s`` at ``g = 1/s``, so a root
    always exists.  If several sign changes are found, the root reached by
    continuation in ``d`` from the Marchenko-Pastur solution at ``d -> 0`` is
    returned.
    """
    if not d > 0:
        raise DomainError("d must be positive")
    if not beta_s > 0:
        raise DomainError("beta_s must be positive")
    s = float(s)
    if not s > 0:
        raise DomainError("s must be real and positive")
    fun = lambda g: theta_residual(beta_s, d, s, g)
    dfun = lambda g: _theta_dres(beta_s, d, s, g)
    grid = np.linspace(0.0, 1.0 / s, scan_points)
    vals = np.array([fun(g) for g in grid])
    changes = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) <= 0)[0]
    brackets = [(grid[i], grid[i + 1]) for i in changes]
    roots = [_bracketed_newton(fun, dfun, lo, hi) for lo, hi in brackets]
    if len(roots) == 1:
        g, branch = roots[0], 0
    else:
        g = mp_stieltjes(beta_s, s).real
        for dd in np.linspace(0.0, d, 201)[1:]:
            for _ in range(50):
                step = theta_residual(beta_s, dd, s, g) / _theta_dres(beta_s, dd, s, g)
                g -= step
                if abs(step) < 1e-15 * abs(g):
                    break
        branch = int(np.argmin([abs(r - g) for r in roots]))
        g = roots[branch]
    res = abs(fun(g))
    if res > RESIDUAL_TOL:
        raise NoConvergenceError("theta-regime root not resolved", residual=res, g=g)
    return StieltjesSolution(s=complex(s), g=complex(g), residual=float(res), branch_id=branch)


def asymptotic_capacity(beta_s, snr, l):
    """Large-system capacity ``Shannon_MP(snr) / (l + 1)`` in nats per channel use."""
    from relaycap.spectrum import shannon_transform

    if not snr > 0:
        raise DomainError("snr must be positive")
    return shannon_transform(MarchenkoPastur(beta_s), snr) / (l + 1)
