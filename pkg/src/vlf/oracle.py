"""Exact small-scale computations that validate the stochastic engine.

Everything here is brute force on purpose: dynamic programming over reachable
walk values, full enumeration of joint types, log-domain sums.  These results
are frozen into the test suite and cross-checked against the Monte Carlo
engine, so they must be independent of it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import beta as beta_dist

from .errors import (
    NonPositiveDrift,
    NotADistribution,
    PrefactorUndefined,
    StateExplosion,
)

_ABSORB_TOL = 1e-12
_STATE_CAP = 10**7
_QUANT = 1e-12


@dataclass(frozen=True)
class LatticeWalkSpec:
    """A random walk with finitely many step values, watched against two
    thresholds: accept when the running sum exceeds a_accept, reject when it
    falls below -a_reject.  Crossing is strict; landing exactly on a threshold
    continues the walk."""

    values: tuple
    probs: tuple
    a_accept: float
    a_reject: float
    max_steps: int = 100_000

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        p = np.asarray(self.probs, dtype=float)
        if v.shape != p.shape or v.ndim != 1 or v.size == 0:
            raise NotADistribution("values and probs must be matching 1-D vectors")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
            raise NotADistribution(f"step probabilities sum to {p.sum()}")
        if not (self.a_accept > 0 and self.a_reject > 0):
            raise NotADistribution("thresholds must be positive")


@dataclass(frozen=True)
class SprtExact:
    """Absorption split of a two-threshold walk.  p_accept + p_reject +
    residual = 1; residual is the mass still in flight at max_steps, and
    expected_steps charges that mass the full horizon (an upper estimate)."""

    p_accept: float
    p_reject: float
    expected_steps: float
    residual: float

    @property
    def p_accept_upper(self):
        return self.p_accept + self.residual

    @property
    def p_reject_upper(self):
        return self.p_reject + self.residual


def _qkey(x):
    return int(round(x / _QUANT))


def exact_sprt(spec):
    """Exact absorption probabilities and mean stopping time by value-hashed DP.

    States are running sums inside [-a_reject, a_accept], quantized at 1e-12
    to merge lattice points; iteration stops when at most 1e-12 of mass
    remains unabsorbed (or at max_steps)."""
    vals = [float(v) for v in spec.values]
    probs = [float(p) for p in spec.probs]
    live = {0: (0.0, 1.0)}  # key -> (value, prob)
    p_acc = 0.0
    p_rej = 0.0
    steps_sum = 0.0
    step = 0
    while live and step < spec.max_steps:
        step += 1
        nxt = {}
        for _, (s, pr) in live.items():
            for v, pv in zip(vals, probs):
                if pv == 0.0:
                    continue
                s2 = s + v
                w = pr * pv
                if s2 > spec.a_accept:
                    p_acc += w
                    steps_sum += w * step
                elif s2 < -spec.a_reject:
                    p_rej += w
                    steps_sum += w * step
                else:
                    k = _qkey(s2)
                    if k in nxt:
                        nxt[k] = (nxt[k][0], nxt[k][1] + w)
                    else:
                        nxt[k] = (s2, w)
        if len(nxt) > _STATE_CAP:
            raise StateExplosion(f"{len(nxt)} reachable walk values exceeds {_STATE_CAP}")
        live = nxt
        if sum(pr for _, pr in live.values()) <= _ABSORB_TOL:
            break
    residual = sum(pr for _, pr in live.values())
    steps_sum += residual * step
    return SprtExact(p_acc, p_rej, steps_sum, residual)


def sprt_mc(spec, samples, seed=0, chunk=1_000_000):
    """Monte Carlo absorption frequencies of a two-threshold walk.

    Returns (p_accept_hat, p_reject_hat, se_accept).  Walks still in flight
    at spec.max_steps count toward neither numerator.
    """
    v = np.asarray(spec.values, dtype=float)
    p = np.asarray(spec.probs, dtype=float)
    rng = np.random.default_rng(seed)
    accepts = 0
    rejects = 0
    left = int(samples)
    while left > 0:
        take = min(left, chunk)
        s = np.zeros(take)
        for _ in range(spec.max_steps):
            if s.size == 0:
                break
            s = s + rng.choice(v, size=s.size, p=p)
            acc = s > spec.a_accept
            rej = s < -spec.a_reject
            accepts += int(np.count_nonzero(acc))
            rejects += int(np.count_nonzero(rej))
            s = s[~(acc | rej)]
        left -= take
    p_acc = accepts / samples
    p_rej = rejects / samples
    se = math.sqrt(max(p_acc * (1.0 - p_acc), 1e-300) / samples)
    return p_acc, p_rej, se


def exact_passage_time(values, probs, gamma, max_steps=None):
    """Exact E[first time the walk strictly exceeds gamma] by the same DP,
    with no lower threshold.  Returns (expected_steps, residual)."""
    vals = [float(v) for v in values]
    prbs = [float(p) for p in probs]
    mean = sum(v * p for v, p in zip(vals, prbs))
    if mean <= 0:
        raise NonPositiveDrift(f"mean step {mean} <= 0")
    if max_steps is None:
        max_steps = int(200.0 * max(gamma, 1.0) / mean) + 1000
    live = {0: (0.0, 1.0)}
    crossed = 0.0
    steps_sum = 0.0
    step = 0
    while live and step < max_steps:
        step += 1
        nxt = {}
        for _, (s, pr) in live.items():
            for v, pv in zip(vals, prbs):
                if pv == 0.0:
                    continue
                s2 = s + v
                w = pr * pv
                if s2 > gamma:
                    crossed += w
                    steps_sum += w * step
                else:
                    k = _qkey(s2)
                    if k in nxt:
                        nxt[k] = (nxt[k][0], nxt[k][1] + w)
                    else:
                        nxt[k] = (s2, w)
        if len(nxt) > _STATE_CAP:
            raise StateExplosion(f"{len(nxt)} reachable walk values exceeds {_STATE_CAP}")
        live = nxt
        if sum(pr for _, pr in live.values()) <= _ABSORB_TOL:
            break
    residual = sum(pr for _, pr in live.values())
    steps_sum += residual * step
    return steps_sum, residual


# ---------------------------------------------------------------------------
# joint-type enumeration


def _compositions(total, parts):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def exact_mi_tail(n, px, py, gamma_grid):
    """P[n * I(empirical joint type) >= gamma] under independence px x py,
    by summing exact multinomial masses over every joint type of length n."""
    from .empirical import JointType, empirical_mi

    px = np.asarray(px, dtype=float)
    py = np.asarray(py, dtype=float)
    kx, ky = px.size, py.size
    cells = kx * ky
    count = (n + 1) ** (cells - 1)
    if count > _STATE_CAP:
        raise StateExplosion(
            f"(n+1)^(|X||Y|-1) = {count} joint types exceeds {_STATE_CAP}"
        )
    cell_p = (px[:, None] * py[None, :]).ravel()
    log_cell = np.full(cells, -np.inf)
    nz = cell_p > 0
    log_cell[nz] = np.log(cell_p[nz])
    lg_n = gammaln(n + 1)
    grid = np.asarray(gamma_grid, dtype=float)
    tails = np.zeros(grid.shape)
    for counts in _compositions(n, cells):
        c = np.asarray(counts)
        if np.any((c > 0) & ~nz):
            continue
        logp = lg_n - gammaln(c + 1).sum() + float(np.dot(c[nz], log_cell[nz]))
        t = JointType(counts=c.reshape(kx, ky), n=n)
        ni = n * empirical_mi(t)
        tails[ni >= grid - 1e-15] += math.exp(logp)
    return np.minimum(tails, 1.0)


def mi_tail_bound(n, gamma, k_exp, k1=10.0):
    """The polynomial-prefactor tail bound K1 (n+1)^k e^{-gamma}."""
    return k1 * (n + 1.0) ** k_exp * math.exp(-gamma)


def exact_eta_expectation(n):
    """sum_{i=0}^n C(n, i) exp(-n h_b(i/n)), computed in the log domain."""
    if n < 1 or n != int(n):
        raise NotADistribution(f"n must be a positive integer, got {n}")
    n = int(n)
    i = np.arange(n + 1, dtype=float)
    log_binom = gammaln(n + 1.0) - gammaln(i + 1.0) - gammaln(n - i + 1.0)
    frac = i / n
    with np.errstate(divide="ignore", invalid="ignore"):
        hb = -(np.where(frac > 0, frac * np.log(frac), 0.0)
               + np.where(frac < 1, (1 - frac) * np.log1p(-frac), 0.0))
    return float(np.exp(logsumexp(log_binom - n * hb)))


# ---------------------------------------------------------------------------
# renewal theory


@dataclass(frozen=True)
class OvershootEstimate:
    rho: float
    std_err: float
    span: float          # lattice span h; 0.0 means non-arithmetic
    samples: int = 0


def lattice_span(values, probs=None, tol=1e-9):
    """Span h of the step lattice: largest h with every support point an
    integer multiple of h.  Returns 0.0 when no such h >= tol exists
    (non-arithmetic law).  Walks with a zero-valued step keep the span of the
    remaining points."""
    v = [abs(float(x)) for i, x in enumerate(values)
         if abs(float(x)) > tol and (probs is None or probs[i] > 0)]
    if not v:
        return 0.0
    g = v[0]
    for x in v[1:]:
        a, b = max(g, x), min(g, x)
        while b > tol:
            a, b = b, a % b
        g = a
        if g < tol:
            return 0.0
    for x in v:
        if abs(x / g - round(x / g)) > 1e-6:
            return 0.0
    return g


def renewal_overshoot(values, probs, samples=1_000_000, seed=0):
    """Estimate rho = E[S_{tau+}^2] / (2 E[S_{tau+}]) by simulating ascending
    ladder epochs (first strictly positive partial sum) of the walk."""
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if v.shape != p.shape or v.ndim != 1:
        raise NotADistribution("values and probs must be matching 1-D vectors")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise NotADistribution(f"step probabilities sum to {p.sum()}")
    mean = float(np.dot(v, p))
    if mean <= 0:
        raise NonPositiveDrift(f"mean step {mean} <= 0")
    rng = np.random.default_rng(seed)
    heights = np.empty(samples)
    done = 0
    active = np.zeros(0)
    while done < samples:
        if active.size == 0:
            take = min(samples - done, 1_000_000)
            active = np.zeros(take)
        steps = rng.choice(v, size=active.size, p=p)
        active = active + steps
        up = active > 0
        hit = active[up]
        heights[done:done + hit.size] = hit
        done += hit.size
        active = active[~up]
    s1 = float(heights.mean())
    s2 = float((heights ** 2).mean())
    rho = s2 / (2.0 * s1)
    # delta-method standard error of the ratio
    cov = np.cov(heights ** 2, heights)
    grad = np.array([1.0 / (2.0 * s1), -s2 / (2.0 * s1 * s1)])
    var = float(grad @ cov @ grad) / samples
    return OvershootEstimate(rho, math.sqrt(max(var, 0.0)), lattice_span(v, p), samples)


def passage_time_expansion(gamma, mean, rho, span=0.0):
    """(gamma + rho + h/2) / mu — the renewal expansion of E[first passage];
    h = 0 drops the lattice correction for non-arithmetic walks."""
    if mean <= 0:
        raise NonPositiveDrift(f"mean step {mean} <= 0")
    return (gamma + rho + 0.5 * span) / mean


# ---------------------------------------------------------------------------
# empirical correlation tails


def gaussian_corr_tail(n, a):
    """Closed-form asymptotic for P[rho_hat >= a] under independence:
    (1 - 4 lam^2)^{-1/4} / (lam sigma sqrt(2 pi n)) * exp{(n/2) log(1 - a^2)},
    with sigma = (1-a^2)/sqrt(1+a^2) and lam = a/(1-a^2).  The sqrt(2 pi)
    belongs in the denominator: the exact law rho_hat^2 ~ Beta(1/2, (n-1)/2)
    confirms the ratio exact/asymptotic tends to 1 with it and to ~0.38
    without it (see corr_tail_exact)."""
    if not (0.0 < a < 1.0):
        raise NotADistribution(f"a must be in (0,1), got {a}")
    lam = a / (1.0 - a * a)
    disc = 1.0 - 4.0 * lam * lam
    if disc <= 0.0:
        raise PrefactorUndefined(
            f"4 lambda_a^2 = {4 * lam * lam:.6f} >= 1 at a = {a}; prefactor complex"
        )
    sig = (1.0 - a * a) / math.sqrt(1.0 + a * a)
    return disc ** -0.25 / (lam * sig * math.sqrt(2.0 * math.pi * n)) * math.exp(
        0.5 * n * math.log1p(-a * a)
    )


def corr_tail_exact(n, a):
    """Exact P[rho_hat >= a]: rho_hat^2 ~ Beta(1/2, (n-1)/2) with a symmetric
    sign, so the one-sided tail is half the Beta survival at a^2."""
    if not (0.0 < a < 1.0):
        raise NotADistribution(f"a must be in (0,1), got {a}")
    return 0.5 * float(beta_dist.sf(a * a, 0.5, (n - 1) / 2.0))


def corr_tail_mc(n, a, samples, seed=0, chunk=50_000):
    """Monte Carlo estimate of P[rho_hat >= a] with i.i.d. standard normal
    pairs.  Returns (estimate, standard_error)."""
    rng = np.random.default_rng(seed)
    hits = 0
    left = int(samples)
    while left > 0:
        take = min(left, chunk)
        x = rng.standard_normal((take, n))
        y = rng.standard_normal((take, n))
        num = np.einsum("ij,ij->i", x, y)
        den = np.sqrt(np.einsum("ij,ij->i", x, x) * np.einsum("ij,ij->i", y, y))
        hits += int(np.count_nonzero(num >= a * den))
        left -= take
    p = hits / samples
    se = math.sqrt(max(p * (1.0 - p), 1e-300) / samples)
    return p, se
