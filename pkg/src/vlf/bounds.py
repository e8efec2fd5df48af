"""Non-asymptotic bounds for three-phase variable-length feedback codes.

The scheme alternates a communication phase (decode when some message's
accumulated metric clears gamma_1), a confirmation phase (binary sequential
test between an accept and a reject control input, thresholds a_accept and
a_reject), and, on rejection, a second communication phase to the higher
threshold gamma_2.  With stop-at-time-zero sharing eps0, message count M and
per-walk constants (drift C with overshoot constant b; control divergences
D_accept, D_reject with overshoot constants b_accept, b_reject):

    eps' = (M-1) (e^{-(gamma_1 + a_accept)} + e^{-gamma_2})
    N'   = (gamma_1 + b)/C
         + ((M-1) e^{-gamma_1} + e^{-a_reject}) (gamma_2 - gamma_1 + b)/C
         + (a_accept + b_accept)/D_accept
         + (M-1) e^{-gamma_1} (a_reject + b_reject)/D_reject
    eps <= eps0 + (1 - eps0) eps',      n_avg <= (1 - eps0) N'

The b-constants come from the stopping-time bound E[tau] <= (a + b)/E[X] with
b = min{E[(X^+)^2]/E[X], ess sup X}.  Everything is in nats.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate

from .channel import (
    Dmc,
    GaussianChannel,
    control_pair,
    information_density_table,
    kl_divergence,
    mutual_information,
)
from .errors import (
    EpsTooSmall,
    HorizonTooSmall,
    Infeasible,
    NonPositiveDrift,
    NotADistribution,
    QuadratureFailure,
)

LN2 = math.log(2.0)
_EXP_CAP = 700.0


@dataclass(frozen=True)
class VlfParams:
    """Threshold set of one three-phase code. Message count stored as log M (nats)."""

    log_m: float
    gamma1: float
    gamma2: float
    a_accept: float
    a_reject: float
    eps0: float = 0.0

    def __post_init__(self):
        if not (self.log_m >= 0):
            raise NotADistribution(f"log_m must be >= 0, got {self.log_m}")
        if not (0 < self.gamma1 < self.gamma2):
            raise NotADistribution(
                f"need 0 < gamma1 < gamma2, got {self.gamma1}, {self.gamma2}"
            )
        if not (self.a_accept > 0 and self.a_reject > 0):
            raise NotADistribution("confirmation thresholds must be positive")
        if not (0.0 <= self.eps0 <= 1.0):
            raise NotADistribution(f"eps0 must be in [0, 1], got {self.eps0}")

    @classmethod
    def from_message_count(cls, m, gamma1, gamma2, a_accept, a_reject, eps0=0.0):
        if m < 1:
            raise NotADistribution(f"message count must be >= 1, got {m}")
        return cls(math.log(m), gamma1, gamma2, a_accept, a_reject, eps0)

    @property
    def m_log2(self):
        return self.log_m / LN2


@dataclass(frozen=True)
class BoundReport:
    """Evaluated bound: raw phase-1 quantities plus the time-shared pair."""

    log_m: float
    eps_prime: float
    n_prime: float
    eps: float
    n_avg: float
    rate: float          # log M / n_avg, nats per channel use

    @property
    def rate_bits(self):
        return self.rate / LN2


@dataclass(frozen=True)
class OvershootConstants:
    communication: float
    accept: float
    reject: float


@dataclass(frozen=True)
class ChannelStats:
    """Walk-level constants the bound formulas consume."""

    drift: float                # communication-walk mean step
    b: float                    # its overshoot constant
    div_accept: float           # confirmation drift under the accept hypothesis
    div_reject: float           # and under the reject hypothesis
    b_accept: float
    b_reject: float
    x_accept: int = 0           # control inputs (DMC only; Gaussian uses +-sqrt(P))
    x_reject: int = 1


def overshoot_constant(values, probs):
    """b(X) = min{ E[(X^+)^2]/E[X], ess sup X } for a finite discrete law."""
    v = np.asarray(values, dtype=float)
    p = np.asarray(probs, dtype=float)
    if v.shape != p.shape or v.ndim != 1:
        raise NotADistribution("values and probs must be matching 1-D vectors")
    if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-9:
        raise NotADistribution(f"probs sum to {p.sum()}, expected 1")
    mean = float(np.dot(v, p))
    if mean <= 0:
        raise NonPositiveDrift(f"E[X] = {mean} <= 0")
    pos = np.clip(v, 0.0, None)
    ratio = float(np.dot(pos * pos, p)) / mean
    return min(ratio, float(v[p > 0].max()))


def _quad_check(value, err, label):
    if not math.isfinite(value) or err > max(1e-9 * abs(value), 1e-300):
        raise QuadratureFailure(
            f"{label}: integral {value} with error estimate {err} above 1e-9 relative"
        )
    return value


def gaussian_overshoot_constant(chan, role):
    """b-constant of the Gaussian walks by adaptive quadrature.

    role 'comm': per-symbol information density under the N(0, P) ensemble.
    role 'ht_accept' / 'ht_reject': the control LLR, distributed N(2S, 4S)
    under its own hypothesis for both roles by symmetry.
    The ess sup branch is +inf for these continuous laws, so only the ratio
    E[(X^+)^2]/E[X] applies.
    """
    if role == "comm":
        return _gaussian_comm_b(chan.power, chan.noise_variance)
    if role in ("ht_accept", "ht_reject"):
        return _gaussian_ht_b(chan.snr)
    raise NotADistribution(f"unknown role {role!r}")


@lru_cache(maxsize=64)
def _gaussian_comm_b(power, noise_variance):
    chan = GaussianChannel(power=power, noise_variance=noise_variance)
    cap = chan.capacity
    s2 = noise_variance
    pw = power

    def dens_sq_pos(x, z):
        y = x + z
        i = cap - z * z / (2.0 * s2) + y * y / (2.0 * (pw + s2))
        if i <= 0.0:
            return 0.0
        w = math.exp(-0.5 * (x * x / pw + z * z / s2)) / (
            2.0 * math.pi * math.sqrt(pw * s2)
        )
        return i * i * w

    lim_x = 12.0 * math.sqrt(pw)
    lim_z = 12.0 * math.sqrt(s2)
    val, err = integrate.dblquad(
        dens_sq_pos, -lim_z, lim_z, lambda z: -lim_x, lim_x,
        epsabs=1e-12, epsrel=1e-10,
    )
    return _quad_check(val, err, "comm overshoot") / cap


@lru_cache(maxsize=64)
def _gaussian_ht_b(snr):
    mu = 2.0 * snr
    sig = 2.0 * math.sqrt(snr)

    def sq_pos(w):
        return w * w * math.exp(-0.5 * ((w - mu) / sig) ** 2) / (
            sig * math.sqrt(2.0 * math.pi)
        )

    val, err = integrate.quad(sq_pos, 0.0, mu + 14.0 * sig, epsabs=1e-13, epsrel=1e-11)
    return _quad_check(val, err, "confirmation overshoot") / mu


def dmc_stats(dmc, px):
    """Walk constants for a DMC with the given input distribution."""
    px = np.asarray(px, dtype=float)
    drift = mutual_information(px, dmc)
    if drift <= 0:
        raise NonPositiveDrift(f"I(px, W) = {drift} <= 0")
    dens = information_density_table(px, dmc)
    joint = px[:, None] * dmc.matrix
    b = overshoot_constant(dens.ravel(), joint.ravel())
    xa, xr, d_acc = control_pair(dmc)
    row_a, row_r = dmc.matrix[xa], dmc.matrix[xr]
    d_rej = kl_divergence(row_r, row_a)
    llr = np.log(row_a) - np.log(row_r)
    b_acc = overshoot_constant(llr, row_a)
    b_rej = overshoot_constant(-llr, row_r)
    return ChannelStats(drift, b, d_acc, d_rej, b_acc, b_rej, xa, xr)


def gaussian_stats(chan):
    d = chan.control_divergence
    return ChannelStats(
        drift=chan.capacity,
        b=gaussian_overshoot_constant(chan, "comm"),
        div_accept=d,
        div_reject=d,
        b_accept=gaussian_overshoot_constant(chan, "ht_accept"),
        b_reject=gaussian_overshoot_constant(chan, "ht_reject"),
    )


def channel_stats(channel, px=None):
    if isinstance(channel, GaussianChannel):
        return gaussian_stats(channel)
    if px is None:
        raise NotADistribution("a DMC needs an explicit input distribution")
    return dmc_stats(channel, px)


def scaled_m_exp(log_m, g):
    """(M - 1) e^{-g} for M = e^{log_m}, overflow-safe."""
    t = log_m - g
    if t > _EXP_CAP:
        return math.inf
    return math.exp(t) - math.exp(-min(g, _EXP_CAP))


def overshoot_constants(channel, px=None):
    s = channel_stats(channel, px)
    return OvershootConstants(s.b, s.b_accept, s.b_reject)


def achievability_bound(params, channel, px=None, stats=None):
    """Evaluate the three-phase achievability bound at fixed parameters."""
    s = stats if stats is not None else channel_stats(channel, px)
    lm = params.log_m
    g1, g2 = params.gamma1, params.gamma2
    a_acc, a_rej = params.a_accept, params.a_reject
    eps_prime = scaled_m_exp(lm, g1 + a_acc) + scaled_m_exp(lm, g2)
    wrong1 = scaled_m_exp(lm, g1)
    n_prime = (
        (g1 + s.b) / s.drift
        + (wrong1 + math.exp(-a_rej)) * (g2 - g1 + s.b) / s.drift
        + (a_acc + s.b_accept) / s.div_accept
        + wrong1 * (a_rej + s.b_reject) / s.div_reject
    )
    eps = params.eps0 + (1.0 - params.eps0) * eps_prime
    n_avg = (1.0 - params.eps0) * n_prime
    rate = lm / n_avg if n_avg > 0 else (math.inf if lm > 0 else 0.0)
    return BoundReport(lm, eps_prime, n_prime, eps, n_avg, rate)


def converse_bound(cap_nats, eps, n_avg):
    """Largest log M any variable-length feedback code can reach: NC/(1-eps) + h_b(eps)/(1-eps)."""
    if not (0 < eps < 1):
        raise NotADistribution(f"eps must be in (0,1), got {eps}")
    hb = -eps * math.log(eps) - (1 - eps) * math.log1p(-eps)
    return (n_avg * cap_nats + hb) / (1.0 - eps)


# ---------------------------------------------------------------------------
# parameter schedules


def asymptotic_schedule(n1, channel, px=None, eps=None, stats=None):
    """Known-channel parameter recipe driven by the phase-1 length N1.

    gamma_1 = log M + log log N1, gamma_2 = log M + log N1,
    a_accept = a_reject = log N1, with log M recovered from
    N1 = (gamma_1 + b)/C.  With a target eps, the time-sharing weight is the
    exact rational form eps0 = (eps - f)/(1 - f), f = (1/N1)(1 + 1/log N1);
    eps=None leaves eps0 = 0.
    """
    s = stats if stats is not None else channel_stats(channel, px)
    if n1 < math.e - 1e-9:
        raise HorizonTooSmall(f"N1 = {n1} below e, where log log N1 turns negative")
    log_n1 = math.log(n1)
    loglog = math.log(log_n1)
    gamma1 = n1 * s.drift - s.b
    log_m = gamma1 - loglog
    if log_m <= 0:
        raise HorizonTooSmall(f"N1 = {n1} yields log M = {log_m} <= 0")
    gamma2 = log_m + log_n1
    eps0 = 0.0
    if eps is not None:
        floor = (1.0 / n1) * (1.0 + 1.0 / log_n1)
        if eps < floor:
            raise EpsTooSmall(
                f"target eps {eps} below the schedule floor {floor:.3e} at N1 = {n1}"
            )
        eps0 = (eps - floor) / (1.0 - floor)
    return VlfParams(log_m, gamma1, gamma2, log_n1, log_n1, eps0)


def asymptotic_schedule_for_message_count(log_m, channel, px=None, eps=None):
    """Invert the schedule: find N1 so that the recipe hands back this log M."""
    s = channel_stats(channel, px)
    n1 = max(3.0, (log_m + s.b) / s.drift)
    for _ in range(200):
        nxt = (log_m + math.log(max(math.log(n1), 1e-9)) + s.b) / s.drift
        if abs(nxt - n1) < 1e-12 * max(1.0, n1):
            n1 = nxt
            break
        n1 = nxt
    return asymptotic_schedule(n1, channel, px, eps, stats=s)


def universal_block_length(log_m, num_x, num_y):
    """n1 = floor(log M / min(|X|, |Y|)) for the universal recipe."""
    return int(log_m / min(int(num_x), int(num_y)))


def universal_schedule(log_m, num_x, num_y, eps, d=None, delta=0.1, n1=None):
    """Channel-independent parameter recipe for the universal decoder.

    gamma_1 = log M + d log n1 + (1 + delta) log log n1,
    gamma_2 = log M + (d + 1) log n1 + delta log log n1,
    a_accept = a_reject = log n1, eps0 = (eps - 1/n1)/(1 - 1/n1),
    with n1 = floor(log M / min(|X|, |Y|)) and d the polynomial tail exponent
    (override d=0.5 for the binary-symmetric specialization).
    """
    from .empirical import tail_exponents

    if n1 is None:
        n1 = universal_block_length(log_m, num_x, num_y)
    if n1 < 3:
        raise HorizonTooSmall(f"n1 = {n1} too small (need >= 3)")
    if d is None:
        d = tail_exponents(num_x, num_y)[1]
    if eps < 1.0 / n1:
        raise EpsTooSmall(f"target eps {eps} below 1/n1 = {1.0 / n1:.3e}")
    log_n1 = math.log(n1)
    loglog = math.log(log_n1)
    gamma1 = log_m + d * log_n1 + (1.0 + delta) * loglog
    gamma2 = log_m + (d + 1.0) * log_n1 + delta * loglog
    eps0 = (eps - 1.0 / n1) / (1.0 - 1.0 / n1)
    return VlfParams(log_m, gamma1, gamma2, log_n1, log_n1, eps0)


def universal_schedule_gaussian(log_m, eps, delta=0.1):
    """Gaussian universal recipe: n1 = floor(log M), d = 1/2."""
    return universal_schedule(log_m, 2, 2, eps, d=0.5, delta=delta, n1=int(log_m))


# ---------------------------------------------------------------------------
# numeric optimization


_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


def _golden_min(fn, lo, hi, iters=40):
    a, b = lo, hi
    c = b - _GOLD * (b - a)
    d = a + _GOLD * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLD * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLD * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def _min_time_given_logm(log_m, target_eps, s):
    """Smallest (1-eps0) N' reachable at this log M with eps <= target_eps.

    eps0 is always pushed to its cap (eps_t - eps')/(1 - eps') because the
    shared time decreases in eps0; the search runs over
    (gamma_1, gamma_2 - gamma_1, a_accept, a_reject).
    """

    def timed(x):
        g1, dg, a_acc, a_rej = x
        if min(g1, dg, a_acc, a_rej) <= 0:
            return math.inf
        eps_prime = scaled_m_exp(log_m, g1 + a_acc) + scaled_m_exp(log_m, g1 + dg)
        if not eps_prime < target_eps:
            return math.inf
        wrong1 = scaled_m_exp(log_m, g1)
        n_prime = (
            (g1 + s.b) / s.drift
            + (wrong1 + math.exp(-a_rej)) * (dg + s.b) / s.drift
            + (a_acc + s.b_accept) / s.div_accept
            + wrong1 * (a_rej + s.b_reject) / s.div_reject
        )
        eps0 = (target_eps - eps_prime) / (1.0 - eps_prime)
        return (1.0 - eps0) * n_prime

    # schedule-flavored starting point, then a spread of fallbacks
    slack = math.log(2.0 / target_eps)
    starts = [
        np.array([log_m + math.log1p(math.log1p(log_m)), slack, slack, slack]),
        np.array([log_m + slack, 2.0 * slack, slack, slack]),
        np.array([log_m + 2.0 * slack, 4.0 * slack, 2.0 * slack, 2.0 * slack]),
    ]
    best_x, best_v = None, math.inf
    for x0 in starts:
        v0 = timed(x0)
        if v0 < best_v:
            best_x, best_v = x0.copy(), v0
    if best_x is None or not math.isfinite(best_v):
        return math.inf, None
    x, v = best_x, best_v
    for _ in range(8):
        improved = False
        for i in range(4):
            lo, hi = x[i] / 4.0, x[i] * 4.0

            def line(t, i=i):
                y = x.copy()
                y[i] = t
                return timed(y)

            t, vt = _golden_min(line, lo, hi)
            if vt < v - 1e-10:
                x = x.copy()
                x[i] = t
                v = vt
                improved = True
        if not improved:
            break
    return v, x


def optimize_params(channel, px, target_eps, target_n):
    """Maximize log M subject to eps <= target_eps and n_avg <= target_n.

    Outer bisection on log M over the feasibility boundary, inner coordinate
    descent with golden-section line searches started from the
    schedule-flavored point.  Returns the best feasible (params, report).
    """
    if not (0 < target_eps < 1):
        raise NotADistribution(f"target_eps must be in (0,1), got {target_eps}")
    if not (target_n > 0):
        raise NotADistribution(f"target_n must be positive, got {target_n}")
    s = channel_stats(channel, px)
    lo, hi = 0.0, target_n * s.drift * 1.5 + 10.0
    lo_x = None
    v, x = _min_time_given_logm(LN2, target_eps, s)
    if v <= target_n:
        lo, lo_x = LN2, x
    else:
        raise Infeasible(
            f"even two messages miss the targets (best n_avg {v:.3f} > {target_n})"
        )
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v, x = _min_time_given_logm(mid, target_eps, s)
        if v <= target_n:
            lo, lo_x = mid, x
        else:
            hi = mid
    g1, dg, a_acc, a_rej = lo_x
    eps_prime = scaled_m_exp(lo, g1 + a_acc) + scaled_m_exp(lo, g1 + dg)
    eps0 = max(0.0, (target_eps - eps_prime) / (1.0 - eps_prime))
    params = VlfParams(lo, g1, g1 + dg, a_acc, a_rej, eps0)
    report = achievability_bound(params, channel, px, stats=s)
    return params, report


def single_phase_bound(channel, px, target_eps, target_n):
    """Best single-phase (decode-at-threshold, no confirmation) rate.

    eps' = (M-1) e^{-gamma}, N' = (gamma + b)/C, same stop-at-time-zero
    sharing.  Returns the report of the best feasible log M.
    """
    if not (0 < target_eps < 1):
        raise NotADistribution(f"target_eps must be in (0,1), got {target_eps}")
    if not (target_n > 0):
        raise NotADistribution(f"target_n must be positive, got {target_n}")
    s = channel_stats(channel, px)

    def min_time(log_m):
        def timed(g):
            eps_prime = scaled_m_exp(log_m, g)
            if not eps_prime < target_eps:
                return math.inf
            eps0 = (target_eps - eps_prime) / (1.0 - eps_prime)
            return (1.0 - eps0) * (g + s.b) / s.drift

        # exact feasibility edge: (M-1) e^{-g} < eps  <=>  g > log((M-1)/eps)
        edge = log_m + math.log1p(-math.exp(-log_m)) - math.log(target_eps) \
            if log_m > 0 else 1e-6
        g, v = _golden_min(timed, edge + 1e-9, edge + 60.0, iters=70)
        return v, g

    v, _ = min_time(LN2)
    if v > target_n:
        raise Infeasible(
            f"even two messages miss the targets (best n_avg {v:.3f} > {target_n})"
        )
    lo, hi = LN2, target_n * s.drift * 1.5 + 10.0
    lo_g = min_time(LN2)[1]
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        v, g = min_time(mid)
        if v <= target_n:
            lo, lo_g = mid, g
        else:
            hi = mid
    eps_prime = scaled_m_exp(lo, lo_g)
    eps0 = max(0.0, (target_eps - eps_prime) / (1.0 - eps_prime))
    n_prime = (lo_g + s.b) / s.drift
    eps = eps0 + (1.0 - eps0) * eps_prime
    n_avg = (1.0 - eps0) * n_prime
    rate = lo / n_avg if n_avg > 0 else 0.0
    return BoundReport(lo, eps_prime, n_prime, eps, n_avg, rate)
