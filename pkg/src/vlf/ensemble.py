"""Competitor-side simulation for the metric race.

A trial needs just two numbers from the M-1 wrong codewords: the earliest
walk time at which any of them clears gamma_1, and the earliest at which any
clears gamma_2, both within the horizon where the race is already decided.
Two interchangeable strategies produce them:

* literal - materialize every competitor's metric path against the realized
  output prefix (fine up to a few thousand messages);
* ensemble - exploit that each competitor clears gamma_1 with probability
  ~e^{-gamma_1}: the number of clearing competitors is Binomial(M-1, p),
  replaced by Poisson with total-variation error at most (M-1)p^2
  (astronomically small in the huge-M regime this path serves), and each
  clearing path is drawn exactly, either by exponential tilting to the
  per-symbol posterior (additive information-density metrics, accept with
  probability e^{-overshoot}) or from exact absorption masses of a count
  dynamic program (empirical-mutual-information metrics).

Competitor indices all exceed the true message's, so under the smallest-index
decode rule a competitor only wins a phase by crossing strictly earlier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import StateExplosion

_LAMBDA_CAP = 1e4
_CHUNK = 256


@dataclass(frozen=True)
class RaceResult:
    """Earliest competitor crossing times (1-based walk time), or None if no
    competitor crosses within the examined horizon."""

    t1: int | None
    t2: int | None


def _first_crossing_times(metric_rows, threshold):
    """Per-row first index with metric > threshold, as 1-based times; 0 if none."""
    if metric_rows.shape[1] == 0:
        return np.zeros(metric_rows.shape[0], dtype=int)
    hit = metric_rows > threshold
    any_hit = hit.any(axis=1)
    first = hit.argmax(axis=1) + 1
    return np.where(any_hit, first, 0)


def _merge_min(current, times):
    pos = times[times > 0]
    if pos.size == 0:
        return current
    m = int(pos.min())
    return m if current is None or m < current else current


def _categorical(rng, cdf, size):
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), len(cdf) - 1)


def _row_categorical(rng, row_cdfs, rows):
    """One draw per element of `rows`, each from the categorical whose CDF is
    row_cdfs[rows[i]]."""
    u = rng.random(rows.shape)
    return (u[..., None] >= row_cdfs[rows]).sum(axis=-1)


def check_message_count(log_m, cap=4096):
    """True when e^{log_m} - 1 competitors are few enough to materialize."""
    return log_m <= math.log(cap + 0.5)


def literal_count(log_m):
    m = int(round(math.exp(log_m)))
    if abs(math.exp(log_m) - m) > 1e-6 * max(m, 1):
        raise StateExplosion(
            f"literal competitor simulation needs an integer message count, "
            f"got M = e^{log_m:.6f}"
        )
    return m - 1


def poisson_crosser_rate(log_m, log_p_cross):
    """(M-1) * p_cross computed in the log domain, capped for sanity."""
    if log_p_cross == -math.inf:
        return 0.0
    t = log_m + math.log1p(-math.exp(-max(log_m, 1e-300))) + log_p_cross \
        if log_m > 0 else -math.inf
    if t > math.log(_LAMBDA_CAP):
        raise StateExplosion(
            f"expected number of threshold-clearing competitors e^{t:.2f} "
            f"exceeds {_LAMBDA_CAP:.0f}; thresholds are far too low for this "
            f"message count"
        )
    return math.exp(t)


# ---------------------------------------------------------------------------
# literal strategies


def literal_additive_race(rng, steps_fn, m1, horizon, gamma1, gamma2):
    """Race m1 competitors whose metrics are cumulative sums of per-symbol
    steps; steps_fn(rng, rows) draws a (rows, horizon) step matrix."""
    if horizon < 1:
        return RaceResult(None, None)
    t1 = t2 = None
    left = m1
    while left > 0:
        rows = min(left, _CHUNK)
        left -= rows
        s = np.cumsum(steps_fn(rng, rows), axis=1)
        t1 = _merge_min(t1, _first_crossing_times(s, gamma1))
        t2 = _merge_min(t2, _first_crossing_times(s, gamma2))
    return RaceResult(t1, t2)


def literal_dmc_race(rng, y, m1, dens, px_cdf, gamma1, gamma2):
    def steps(rng, rows):
        x = _categorical(rng, px_cdf, (rows, y.size))
        return dens[x, y[None, :]]

    return literal_additive_race(rng, steps, m1, y.size, gamma1, gamma2)


def literal_gaussian_race(rng, y, m1, power, dens_fn, gamma1, gamma2):
    def steps(rng, rows):
        x = rng.standard_normal((rows, y.size)) * math.sqrt(power)
        return dens_fn(x, y[None, :])

    return literal_additive_race(rng, steps, m1, y.size, gamma1, gamma2)


def literal_empirical_mi_race(rng, y, m1, px_cdf, log_tbl, num_x, num_y,
                              gamma1, gamma2):
    """Competitor metric: n * I(joint type of (codeword prefix, y prefix))."""
    h = y.size
    if h < 1:
        return RaceResult(None, None)
    n = np.arange(1, h + 1, dtype=np.int64)
    y_onehots = [(y == b).astype(np.int64) for b in range(num_y)]
    col = np.stack([np.cumsum(oh) for oh in y_onehots])  # (num_y, h) shared
    col_term = sum(log_tbl[col[b]] for b in range(num_y))
    t1 = t2 = None
    left = m1
    while left > 0:
        rows = min(left, _CHUNK)
        left -= rows
        x = _categorical(rng, px_cdf, (rows, h))
        metric = np.tile(log_tbl[n] - col_term, (rows, 1))
        row_counts = []
        for a in range(num_x):
            xa = (x == a).astype(np.int64)
            row_tot = np.cumsum(xa, axis=1)
            row_counts.append(row_tot)
            for b in range(num_y):
                cell = np.cumsum(xa * y_onehots[b][None, :], axis=1)
                metric += log_tbl[cell]
        for row_tot in row_counts:
            metric -= log_tbl[row_tot]
        t1 = _merge_min(t1, _first_crossing_times(metric, gamma1))
        t2 = _merge_min(t2, _first_crossing_times(metric, gamma2))
    return RaceResult(t1, t2)


def literal_flip_entropy_race(rng, y, m1, px1, log_tbl, gamma1, gamma2):
    """Competitor metric: n(log 2 - h_b(empirical flip rate to y))."""
    h = y.size
    if h < 1:
        return RaceResult(None, None)
    n = np.arange(1, h + 1, dtype=np.int64)
    p_flip = np.where(y == 1, 1.0 - px1, px1)[None, :]
    base = n * math.log(2.0) - log_tbl[n]
    t1 = t2 = None
    left = m1
    while left > 0:
        rows = min(left, _CHUNK)
        left -= rows
        z = (rng.random((rows, h)) < p_flip).astype(np.int64)
        k = np.cumsum(z, axis=1)
        metric = base[None, :] + log_tbl[k] + log_tbl[n[None, :] - k]
        t1 = _merge_min(t1, _first_crossing_times(metric, gamma1))
        t2 = _merge_min(t2, _first_crossing_times(metric, gamma2))
    return RaceResult(t1, t2)


def literal_correlation_race(rng, y, m1, power, gamma1, gamma2, min_eval_len):
    """Competitor metric: -(n/2) log(1 - rho_hat^2), evaluated from
    min_eval_len onward (the metric is degenerate at tiny lengths)."""
    h = y.size
    if h < 1:
        return RaceResult(None, None)
    n = np.arange(1, h + 1, dtype=float)
    syy = np.cumsum(y * y)
    t1 = t2 = None
    left = m1
    while left > 0:
        rows = min(left, _CHUNK)
        left -= rows
        x = rng.standard_normal((rows, h)) * math.sqrt(power)
        sxy = np.cumsum(x * y[None, :], axis=1)
        sxx = np.cumsum(x * x, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.clip(sxy * sxy / (sxx * syy[None, :]), 0.0, 1.0)
            metric = -0.5 * n[None, :] * np.log1p(-r2)
        metric[:, : min_eval_len - 1] = -np.inf
        np.nan_to_num(metric, copy=False, nan=-np.inf, posinf=np.inf)
        t1 = _merge_min(t1, _first_crossing_times(metric, gamma1))
        t2 = _merge_min(t2, _first_crossing_times(metric, gamma2))
    return RaceResult(t1, t2)


# ---------------------------------------------------------------------------
# ensemble strategies: additive metrics via exponential tilting


def _tilted_additive_crossers(rng, y, log_m, gamma1, draw_tilted, step_of):
    """Sample the Poisson point process of competitors that clear gamma_1
    within the horizon, exactly, by tilting + thinning.

    Per competitor and conditional on y, the metric is a sum of i.i.d. steps
    (law depending on y_t).  Under the tilted per-symbol law (the posterior on
    inputs given y_t), exp(metric) is the likelihood ratio, so
    P[cross by H] = E_tilted[e^{-S_tau} ; tau <= H]: propose Poisson
    ((M-1)e^{-gamma_1}) tilted paths and keep each with probability
    e^{-(S_tau - gamma_1)} 1{tau <= H}.  Returns [(tau, S_tau, x_rest)] with
    the post-crossing continuation left to the caller.
    """
    lam = poisson_crosser_rate(log_m, -gamma1)
    k = rng.poisson(lam)
    out = []
    for _ in range(k):
        x = draw_tilted(rng)
        s = np.cumsum(step_of(x, y))
        hit = s > gamma1
        if not hit.any():
            continue
        t = int(hit.argmax())  # 0-based crossing index; walk time t+1
        if rng.random() >= math.exp(-(float(s[t]) - gamma1)):
            continue
        out.append((t + 1, float(s[t])))
    return out


def ensemble_additive_race(rng, y, log_m, gamma1, gamma2, draw_tilted,
                           draw_plain, step_of):
    """RaceResult via tilting for additive metrics.  draw_tilted(rng) draws a
    full-horizon input vector from the per-symbol posterior given y;
    draw_plain(rng, length) draws from the codebook prior; step_of(x, y)
    maps aligned input/output vectors to per-symbol metric steps."""
    crossers = _tilted_additive_crossers(
        rng, y, log_m, gamma1, draw_tilted, step_of
    )
    if not crossers:
        return RaceResult(None, None)
    t1 = min(c[0] for c in crossers)
    t2 = None
    h = y.size
    for start, s0 in crossers:
        if s0 > gamma2:  # one step can clear both thresholds at once
            t2 = start if t2 is None or start < t2 else t2
            continue
        if start >= h:
            continue
        x_rest = draw_plain(rng, h - start)
        s = s0 + np.cumsum(step_of(x_rest, y[start:]))
        hit = s > gamma2
        if hit.any():
            cand = start + int(hit.argmax()) + 1
            t2 = cand if t2 is None or cand < t2 else t2
    return RaceResult(t1, t2)


def ensemble_dmc_race(rng, y, log_m, dens, post_cdfs, px_cdf, gamma1, gamma2):
    def draw_tilted(rng):
        return _row_categorical(rng, post_cdfs, y)

    def draw_plain(rng, length):
        return _categorical(rng, px_cdf, length)

    def step_of(x, yy):
        return dens[x, yy]

    return ensemble_additive_race(
        rng, y, log_m, gamma1, gamma2, draw_tilted, draw_plain, step_of
    )


def ensemble_gaussian_race(rng, y, log_m, power, noise_var, dens_fn,
                           gamma1, gamma2):
    # posterior of the codebook symbol given the output: the usual Gaussian
    # conditional N(y P/(P+s2), P s2/(P+s2)) — the e^{metric}-weighted prior
    post_mean = power / (power + noise_var)
    post_sd = math.sqrt(power * noise_var / (power + noise_var))

    def draw_tilted(rng):
        return y * post_mean + post_sd * rng.standard_normal(y.size)

    def draw_plain(rng, length):
        return rng.standard_normal(length) * math.sqrt(power)

    return ensemble_additive_race(
        rng, y, log_m, gamma1, gamma2, draw_tilted, draw_plain, dens_fn
    )


# ---------------------------------------------------------------------------
# ensemble strategies: empirical-mutual-information metrics via count DPs


def _binary_mi_metric(log_tbl, u, v, j, n):
    """n * I of the 2x2 type with cells (x=1,y=1)=u, (x=1,y=0)=v given j ones
    among the n outputs; u, v may be arrays."""
    return (
        log_tbl[u] + log_tbl[v] + log_tbl[j - u] + log_tbl[n - j - v]
        - log_tbl[u + v] - log_tbl[n - u - v]
        - log_tbl[j] - log_tbl[n - j] + log_tbl[n]
    )


def ensemble_binary_mi_race(rng, y, log_m, px1, log_tbl, gamma1, gamma2,
                            horizon):
    """Exact competitor race for the empirical-MI metric on a binary-input,
    binary-output channel, conditional on the realized outputs.

    Given y, a competitor's joint type with y is a Markov chain on
    (u, v) = (# codeword ones against output ones, against output zeros);
    forward dynamic programming yields the exact absorption law of the first
    gamma_1 crossing.  Poisson((M-1) p_cross) crossers are sampled from it and
    continued explicitly toward gamma_2."""
    h = min(horizon, y.size)
    if h < 1:
        return RaceResult(None, None)
    j = 0
    # probability mass over (u, v); grows one row/col at a time
    mass = np.zeros((1, 1))
    mass[0, 0] = 1.0
    absorbed = []  # (time, u_array, v_array, mass_array)
    total_absorbed = 0.0
    for t in range(1, h + 1):
        bit = int(y[t - 1])
        if bit == 1:
            grown = np.zeros((mass.shape[0] + 1, mass.shape[1]))
            grown[:-1, :] += mass * (1.0 - px1)
            grown[1:, :] += mass * px1
            j += 1
        else:
            grown = np.zeros((mass.shape[0], mass.shape[1] + 1))
            grown[:, :-1] += mass * (1.0 - px1)
            grown[:, 1:] += mass * px1
        mass = grown
        uu = np.arange(mass.shape[0])[:, None]
        vv = np.arange(mass.shape[1])[None, :]
        metric = _binary_mi_metric(log_tbl, uu, vv, j, t)
        hit = (metric > gamma1) & (mass > 0.0)
        if hit.any():
            ui, vi = np.nonzero(hit)
            w = mass[ui, vi]
            absorbed.append((t, ui.copy(), vi.copy(), w.copy()))
            total_absorbed += float(w.sum())
            mass[ui, vi] = 0.0
    if total_absorbed <= 0.0:
        return RaceResult(None, None)
    lam = poisson_crosser_rate(log_m, math.log(total_absorbed))
    k = rng.poisson(lam)
    if k == 0:
        return RaceResult(None, None)
    flat_t = np.concatenate([np.full(a[3].size, a[0]) for a in absorbed])
    flat_u = np.concatenate([a[1] for a in absorbed])
    flat_v = np.concatenate([a[2] for a in absorbed])
    flat_w = np.concatenate([a[3] for a in absorbed])
    picks = rng.choice(flat_w.size, size=k, p=flat_w / flat_w.sum())
    t1 = int(flat_t[picks].min())
    t2 = None
    for idx in picks:
        t, u, v = int(flat_t[idx]), int(flat_u[idx]), int(flat_v[idx])
        jj = int(np.count_nonzero(y[:t]))
        if _binary_mi_metric(log_tbl, u, v, jj, t) > gamma2:
            t2 = t if t2 is None or t < t2 else t2
            continue
        for step in range(t + 1, h + 1):
            bit = int(y[step - 1])
            one = rng.random() < px1
            if bit == 1:
                jj += 1
                u += 1 if one else 0
            else:
                v += 1 if one else 0
            if _binary_mi_metric(log_tbl, u, v, jj, step) > gamma2:
                t2 = step if t2 is None or step < t2 else t2
                break
    return RaceResult(t1, t2)


class FlipEntropyAbsorption:
    """One-time forward DP for the flip-entropy metric with a uniform
    codebook: competitor flips are i.i.d. Bernoulli(1/2) regardless of the
    outputs, so the first-crossing law of n(log 2 - h_b(k/n)) > gamma_1 is
    output-independent and shared by every trial of a configuration."""

    def __init__(self, log_tbl, gamma1, horizon):
        self.gamma1 = gamma1
        self.horizon = horizon
        mass = np.ones(1)
        times, ks, ws = [], [], []
        cum = np.zeros(horizon + 1)
        for t in range(1, horizon + 1):
            grown = np.zeros(t + 1)
            grown[:-1] += mass * 0.5
            grown[1:] += mass * 0.5
            mass = grown
            k = np.arange(t + 1)
            metric = t * math.log(2.0) - log_tbl[t] + log_tbl[k] + log_tbl[t - k]
            hit = (metric > gamma1) & (mass > 0.0)
            cum[t] = cum[t - 1]
            if hit.any():
                ki = np.nonzero(hit)[0]
                w = mass[ki]
                times.append(np.full(ki.size, t))
                ks.append(ki.copy())
                ws.append(w.copy())
                cum[t] += float(w.sum())
                mass[ki] = 0.0
        self.t = np.concatenate(times) if times else np.zeros(0, dtype=int)
        self.k = np.concatenate(ks) if ks else np.zeros(0, dtype=int)
        self.w = np.concatenate(ws) if ws else np.zeros(0)
        self.cum = cum

    def race(self, rng, log_m, log_tbl, gamma2, horizon):
        h = min(horizon, self.horizon)
        if h < 1 or self.cum[h] <= 0.0:
            return RaceResult(None, None)
        lam = poisson_crosser_rate(log_m, math.log(self.cum[h]))
        kk = rng.poisson(lam)
        if kk == 0:
            return RaceResult(None, None)
        ok = self.t <= h
        w = self.w[ok]
        picks = rng.choice(w.size, size=kk, p=w / w.sum())
        ts, ks = self.t[ok][picks], self.k[ok][picks]
        t1 = int(ts.min())
        t2 = None
        ln2 = math.log(2.0)
        for t0, k0 in zip(ts, ks):
            t, k = int(t0), int(k0)
            if t * ln2 - log_tbl[t] + log_tbl[k] + log_tbl[t - k] > gamma2:
                t2 = t if t2 is None or t < t2 else t2
                continue
            for step in range(t + 1, h + 1):
                k += int(rng.random() < 0.5)
                m = step * ln2 - log_tbl[step] + log_tbl[k] + log_tbl[step - k]
                if m > gamma2:
                    t2 = step if t2 is None or step < t2 else t2
                    break
        return RaceResult(t1, t2)
