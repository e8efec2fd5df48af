"""Channel models and single-letter information quantities.

Discrete memoryless channels are row-stochastic matrices W[x, y] with strictly
positive entries (every output reachable from every input). The additive-noise
Gaussian channel is parametrized by its noise variance and input power budget;
its signal-to-noise ratio S = P / sigma0^2 gives capacity C(S) = (1/2) log(1+S)
and a binary-antipodal control divergence of 2S. All logarithms are natural;
rates are in nats unless a caller converts for display.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AbsoluteContinuityViolation,
    DimensionMismatch,
    NonConvergence,
    NotADistribution,
    ZeroOutputMass,
)

ROW_SUM_TOL = 1e-12
DIST_SUM_TOL = 1e-9


def _as_prob_vector(p, name="p"):
    v = np.asarray(p, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise DimensionMismatch(f"{name} must be a nonempty 1-D vector")
    if np.any(v < 0):
        raise NotADistribution(f"{name} has negative entries")
    return v


@dataclass(frozen=True)
class Dmc:
    """Discrete memoryless channel with a strictly positive transition matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.matrix, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 2:
            raise DimensionMismatch(
                f"transition matrix must be 2-D with >=2 outputs, got shape {w.shape}"
            )
        if np.any(w <= 0):
            x, y = np.argwhere(w <= 0)[0]
            raise NotADistribution(
                f"transition matrix entry ({x},{y}) = {w[x, y]} is not strictly positive"
            )
        sums = w.sum(axis=1)
        bad = np.abs(sums - 1.0) > ROW_SUM_TOL
        if np.any(bad):
            x = int(np.argmax(bad))
            raise NotADistribution(
                f"row {x} sums to {sums[x]!r}, off by more than {ROW_SUM_TOL}"
            )
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "matrix", w)

    @property
    def num_inputs(self):
        return self.matrix.shape[0]

    @property
    def num_outputs(self):
        return self.matrix.shape[1]


@dataclass(frozen=True)
class GaussianChannel:
    """Y = X + Z with Z ~ N(0, noise_variance) and power budget E[sum X^2] <= E[tau] * power."""

    power: float
    noise_variance: float = 1.0

    def __post_init__(self):
        if not (self.power > 0):
            raise NotADistribution(f"power must be positive, got {self.power}")
        if not (self.noise_variance > 0):
            raise NotADistribution(
                f"noise variance must be positive, got {self.noise_variance}"
            )

    @property
    def snr(self):
        return self.power / self.noise_variance

    @property
    def capacity(self):
        """(1/2) log(1 + S) nats per channel use."""
        return 0.5 * math.log1p(self.snr)

    @property
    def control_divergence(self):
        """KL between the antipodal control outputs N(+sqrt(P), s2) and N(-sqrt(P), s2) = 2S."""
        return 2.0 * self.snr


def bsc(p):
    """Binary symmetric channel with flip probability p in (0, 1)."""
    if not (0.0 < p < 1.0):
        raise NotADistribution(f"flip probability must be in (0,1), got {p}")
    return Dmc(np.array([[1.0 - p, p], [p, 1.0 - p]]))


def kl_divergence(p, q):
    """D(p || q) = sum_i p_i log(p_i / q_i), with 0 log(0/q) = 0."""
    pv = _as_prob_vector(p, "p")
    qv = _as_prob_vector(q, "q")
    if pv.shape != qv.shape:
        raise DimensionMismatch(f"shapes differ: {pv.shape} vs {qv.shape}")
    support = pv > 0
    if np.any(qv[support] == 0):
        i = int(np.argmax(support & (qv == 0)))
        raise AbsoluteContinuityViolation(
            f"p[{i}] = {pv[i]} > 0 but q[{i}] = 0; divergence infinite"
        )
    ps = pv[support]
    return float(np.sum(ps * (np.log(ps) - np.log(qv[support]))))


def entropy(p):
    """Shannon entropy -sum p log p in nats. Requires a normalized vector."""
    v = _as_prob_vector(p, "p")
    s = v.sum()
    if abs(s - 1.0) > DIST_SUM_TOL:
        raise NotADistribution(f"probabilities sum to {s}, off by more than {DIST_SUM_TOL}")
    nz = v[v > 0]
    return float(-np.sum(nz * np.log(nz)))


def mutual_information(px, dmc):
    """I(P_X, W) = sum_x px(x) D(W(.|x) || P_Y) in nats."""
    p = _as_prob_vector(px, "px")
    w = dmc.matrix
    if p.size != w.shape[0]:
        raise DimensionMismatch(f"px has {p.size} entries for {w.shape[0]} inputs")
    py = p @ w
    mask = p > 0
    rows = w[mask]
    return float(np.sum(p[mask] * np.sum(rows * (np.log(rows) - np.log(py)), axis=1)))


def capacity(dmc, tol=1e-10, max_iter=10**6):
    """Channel capacity by Blahut-Arimoto.

    Alternates the capacity-achieving-input update with the duality sandwich
    max_x D(W_x || P_Y) >= C >= I(r, W); stops when the gap is <= tol (nats)
    and returns (I(r_star, W), r_star). Raises NonConvergence past max_iter.
    """
    w = dmc.matrix
    nx = w.shape[0]
    logw = np.log(w)
    r = np.full(nx, 1.0 / nx)
    for _ in range(max_iter):
        py = r @ w
        # D(W_x || P_Y) for every input row
        div = np.sum(w * (logw - np.log(py)), axis=1)
        lower = float(r @ div)
        upper = float(div.max())
        if upper - lower <= tol:
            return lower, r
        # multiplicative update r <- r * exp(div) / normalizer
        z = r * np.exp(div - div.max())
        r = z / z.sum()
    raise NonConvergence(
        f"Blahut-Arimoto gap above {tol} after {max_iter} iterations"
    )


def control_pair(dmc):
    """Most distinguishable ordered input pair.

    Returns (x_accept, x_reject, divergence) maximizing D(W_xa || W_xr) over
    ordered pairs with xa != xr; ties break to the lexicographically smallest
    (xa, xr). The maximum equals the best confirmation-phase error exponent.
    """
    w = dmc.matrix
    logw = np.log(w)
    nx = w.shape[0]
    best = (-1.0, 0, 0)
    for xa in range(nx):
        for xr in range(nx):
            if xa == xr:
                continue
            d = float(np.sum(w[xa] * (logw[xa] - logw[xr])))
            if d > best[0] + 1e-15:
                best = (d, xa, xr)
    d, xa, xr = best
    return xa, xr, d


def output_distribution(px, dmc):
    p = _as_prob_vector(px, "px")
    if p.size != dmc.matrix.shape[0]:
        raise DimensionMismatch(
            f"px has {p.size} entries for {dmc.matrix.shape[0]} inputs"
        )
    return p @ dmc.matrix


def information_density(px, dmc, x, y):
    """log( W(y|x) / P_Y(y) ) for the output marginal induced by px."""
    py = output_distribution(px, dmc)
    if py[y] == 0:
        raise ZeroOutputMass(f"output {y} has zero marginal mass under px")
    return float(np.log(dmc.matrix[x, y]) - np.log(py[y]))


def information_density_table(px, dmc):
    """Matrix of information densities, i[x, y] = log(W(y|x)/P_Y(y))."""
    py = output_distribution(px, dmc)
    if np.any(py == 0):
        y = int(np.argmax(py == 0))
        raise ZeroOutputMass(f"output {y} has zero marginal mass under px")
    return np.log(dmc.matrix) - np.log(py)[None, :]


def gaussian_information_density(chan, x, y):
    """Per-symbol information density of the Gaussian channel.

    C(S) - (y - x)^2 / (2 sigma0^2) + y^2 / (2 (P + sigma0^2)) for the
    N(0, P) input ensemble.
    """
    s2 = chan.noise_variance
    return float(
        chan.capacity - (y - x) ** 2 / (2.0 * s2) + y * y / (2.0 * (chan.power + s2))
    )


def load_dmc(path):
    """Read a whitespace-separated transition matrix, one row per line.

    Validation failures name the offending row and column.
    """
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            try:
                row = [float(tok) for tok in text.split()]
            except ValueError as exc:
                raise NotADistribution(
                    f"{path}: row {lineno}: unparseable entry ({exc})"
                ) from None
            rows.append((lineno, row))
    if not rows:
        raise NotADistribution(f"{path}: no matrix rows found")
    width = len(rows[0][1])
    for lineno, row in rows:
        if len(row) != width:
            raise DimensionMismatch(
                f"{path}: row {lineno} has {len(row)} columns, expected {width}"
            )
    mat = np.array([row for _, row in rows], dtype=float)
    for i, (lineno, _) in enumerate(rows):
        for j in range(width):
            if mat[i, j] <= 0:
                raise NotADistribution(
                    f"{path}: row {lineno}, column {j + 1}: entry {mat[i, j]} "
                    "must be strictly positive"
                )
        s = mat[i].sum()
        if abs(s - 1.0) > ROW_SUM_TOL:
            raise NotADistribution(
                f"{path}: row {lineno} sums to {s!r}, not 1 within {ROW_SUM_TOL}"
            )
    return Dmc(mat)


def parse_channel_spec(spec):
    """Parse 'bsc:<p>', 'dmc:<path>', or 'awgn:<snr>' into a channel object."""
    kind, sep, arg = spec.partition(":")
    if not sep:
        raise NotADistribution(
            f"channel spec {spec!r} must look like bsc:<p>, dmc:<path>, or awgn:<snr>"
        )
    if kind in ("bsc", "awgn"):
        try:
            value = float(arg)
        except ValueError:
            raise NotADistribution(
                f"channel parameter must be a number, got {arg!r}"
            ) from None
        if kind == "bsc":
            return bsc(value)
        if value <= 0:
            raise NotADistribution(f"awgn snr must be positive, got {arg!r}")
        return GaussianChannel(power=value, noise_variance=1.0)
    if kind == "dmc":
        if not os.path.exists(arg):
            raise NotADistribution(f"dmc matrix file not found: {arg!r}")
        return load_dmc(arg)
    raise NotADistribution(f"unknown channel kind {kind!r} in spec {spec!r}")
