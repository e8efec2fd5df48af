"""Monte Carlo engine for the three-phase variable-length feedback protocol.

A trial plays the full protocol for one message: an optional stop-at-time-zero
branch, a first communication phase in which every message's metric
accumulator races to gamma_1, a confirmation phase in which the transmitter
tells the receiver (through a sequential probability ratio test on control
symbols) whether the tentative decision was right, and — on rejection — a
second communication phase that continues the same accumulators to gamma_2.

Five metric/knowledge variants are supported:

* ``vlf_dmc``    - known DMC, information-density metric;
* ``uvlf_dmc``   - unknown DMC, empirical-mutual-information metric, channel
                   estimated from a training sequence;
* ``uvlf_bsc``   - unknown binary channel, flip-entropy metric
                   n(log 2 - h_b(empirical flip rate));
* ``vlf_awgn``   - known Gaussian channel, information-density metric;
* ``uvlf_awgn``  - unknown-noise Gaussian channel, empirical-correlation
                   metric -(n/2) log(1 - rho_hat^2).

Only the true message's symbols cross the channel; the M-1 competitor
accumulators are resolved by the strategies in ``ensemble`` (explicit
matrices for small M, exact Poisson thinning of the crossing point process
for huge M).  Each trial is driven by an independent RNG stream derived from
(seed, trial_index), so results are bit-identical regardless of how trials
are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import ensemble
from .channel import (
    Dmc,
    GaussianChannel,
    _as_prob_vector,
    control_pair,
    mutual_information,
)
from .empirical import count_log_table
from .errors import (
    DimensionMismatch,
    HorizonExceeded,
    HorizonTooSmall,
    InsufficientTraining,
    NotADistribution,
    StateExplosion,
    VlfError,
)

VARIANTS = ("vlf_dmc", "uvlf_dmc", "uvlf_bsc", "vlf_awgn", "uvlf_awgn")
_UNIVERSAL = ("uvlf_dmc", "uvlf_bsc", "uvlf_awgn")
_GAUSSIAN_VARIANTS = ("vlf_awgn", "uvlf_awgn")
_Z95 = 1.959963984540054
_BLOCK = 256
_HT_BLOCK = 64


@dataclass(frozen=True)
class SchemeConfig:
    """Everything that determines a simulation run.

    ``px`` is the codebook input distribution (DMC variants; Gaussian
    codebooks are i.i.d. N(0, P) with P taken from the channel).
    ``competitor_mode`` picks how the M-1 wrong codewords are resolved:
    "literal" materializes them (M bounded), "ensemble" samples the Poisson
    process of threshold crossers (huge M), "auto" prefers literal when M is
    small enough.  ``min_eval_len`` applies to uvlf_awgn only, where the
    correlation metric is vacuously infinite at length 1: crossings are only
    recognized from this length on (default: floor(log M), the natural
    schedule block length).  ``n_max_mult`` sets the default horizon
    n_max = ceil(n_max_mult * gamma2 / C) when ``n_max`` is not given.
    ``c2`` truncates the second communication phase of the universal variants
    at walk time c2 * gamma2 / C (the analysis horizon of the universal
    scheme; must exceed 1); None disables the extra cap.
    """

    variant: str
    channel: object
    px: object
    params: object
    training_len: int = 0
    n_max: int | None = None
    seed: int = 0
    honest_time_zero: bool = False
    competitor_mode: str = "auto"
    min_eval_len: int | None = None
    n_max_mult: float = 50.0
    c2: float | None = 2.0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise VlfError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}"
            )
        if self.competitor_mode not in ("auto", "literal", "ensemble"):
            raise VlfError(
                f"competitor_mode must be auto, literal or ensemble, "
                f"got {self.competitor_mode!r}"
            )
        gaussian = self.variant in _GAUSSIAN_VARIANTS
        if gaussian and not isinstance(self.channel, GaussianChannel):
            raise DimensionMismatch(
                f"variant {self.variant} needs a GaussianChannel"
            )
        if not gaussian and not isinstance(self.channel, Dmc):
            raise DimensionMismatch(f"variant {self.variant} needs a Dmc")
        if not gaussian:
            p = _as_prob_vector(self.px, "px")
            if abs(float(p.sum()) - 1.0) > 1e-9:
                raise NotADistribution(f"px sums to {p.sum()}, not 1")
            if p.size != self.channel.matrix.shape[0]:
                raise DimensionMismatch(
                    f"px has {p.size} entries for "
                    f"{self.channel.matrix.shape[0]} inputs"
                )
            object.__setattr__(self, "px", np.array(p, dtype=float))
        if self.variant == "uvlf_bsc" and self.channel.matrix.shape != (2, 2):
            raise DimensionMismatch(
                "the flip-entropy variant needs a binary-input binary-output "
                f"channel, got shape {self.channel.matrix.shape}"
            )
        if self.training_len < 0:
            raise VlfError(f"training_len must be >= 0, got {self.training_len}")
        if self.variant in _UNIVERSAL:
            need = 1 if gaussian else self.channel.matrix.shape[0]
            if self.training_len < need:
                raise InsufficientTraining(
                    f"variant {self.variant} needs training_len >= {need}, "
                    f"got {self.training_len}"
                )
            if not gaussian and self.channel.matrix.shape[0] < 2:
                raise DimensionMismatch(
                    "universal confirmation needs at least two channel inputs"
                )
        if self.n_max is not None and self.n_max < 1:
            raise HorizonTooSmall(f"n_max must be positive, got {self.n_max}")
        if self.min_eval_len is not None and self.min_eval_len < 1:
            raise VlfError(
                f"min_eval_len must be >= 1, got {self.min_eval_len}"
            )
        if not (self.n_max_mult > 0):
            raise VlfError(f"n_max_mult must be positive, got {self.n_max_mult}")
        if self.c2 is not None and not (self.c2 > 1):
            raise VlfError(f"c2 must exceed 1, got {self.c2}")


@dataclass(frozen=True)
class TrialOutcome:
    """One simulated protocol run."""

    correct: bool
    tau: int
    len_c1: int
    len_ht: int
    len_c2: int
    energy: float
    censored: bool
    stopped_at_zero: bool


@dataclass(frozen=True)
class McEstimate:
    """Aggregated Monte Carlo results with 95% confidence intervals.

    eps uses a Wilson interval, n and power normal/delta-method intervals.
    power fields are None on finite-alphabet channels.  ``degenerate`` marks
    runs with too few trials for a spread estimate (CI bounds are NaN then).
    """

    eps_hat: float
    eps_lo: float
    eps_hi: float
    n_hat: float
    n_lo: float
    n_hi: float
    power_hat: float | None
    power_lo: float | None
    power_hi: float | None
    censor_rate: float
    trials: int
    degenerate: bool


@dataclass(frozen=True)
class EmpiricalChannel:
    """Channel estimate built from one trial's training sequence.

    Exactly one of ``kernel`` (per-row empirical conditional distributions)
    and ``noise_variance`` is set.  ``counts`` holds the per-input training
    lengths (a single entry for the Gaussian all-zero training input).
    """

    kernel: np.ndarray | None
    noise_variance: float | None
    counts: np.ndarray


def _trial_rng(seed, trial_index):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(seed, spawn_key=(trial_index,)))
    )


# ---------------------------------------------------------------------------
# training / channel estimation


def _draw_training(rng, cfg):
    """Draw the training phase for one trial; returns an EmpiricalChannel.

    The draw order is fixed and shared with simulate_trial so that
    estimate_channel reproduces exactly the estimate a trial used.  DMC
    training sends each input round-robin (ell_x = floor(l/|X|) plus one for
    the first l mod |X| inputs) and only the per-row output counts matter, so
    each row is drawn as one multinomial.  Gaussian training sends zeros and
    estimates the noise variance, whose law is sigma0^2 chi2_l / l.
    """
    lt = cfg.training_len
    if isinstance(cfg.channel, GaussianChannel):
        if lt < 1:
            raise InsufficientTraining(
                f"Gaussian training needs training_len >= 1, got {lt}"
            )
        var = cfg.channel.noise_variance * rng.chisquare(lt) / lt
        return EmpiricalChannel(
            kernel=None, noise_variance=float(var), counts=np.array([lt])
        )
    w = cfg.channel.matrix
    nx = w.shape[0]
    if lt < nx:
        raise InsufficientTraining(
            f"DMC training needs training_len >= {nx} inputs, got {lt}"
        )
    ells = np.full(nx, lt // nx)
    ells[: lt % nx] += 1
    rows = np.empty_like(w)
    for x in range(nx):
        counts = rng.multinomial(ells[x], w[x])
        rows[x] = counts / ells[x]
    return EmpiricalChannel(kernel=rows, noise_variance=None, counts=ells)


def estimate_channel(cfg, trial_index=0):
    """The channel estimate the given trial's training phase produces."""
    return _draw_training(_trial_rng(cfg.seed, trial_index), cfg)


def _kl_rows(p, q):
    """KL(p || q) tolerating zeros: +inf when p puts mass where q has none."""
    mask = p > 0
    if np.any(q[mask] == 0):
        return math.inf
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def _empirical_control_pair(kernel):
    """Most distinguishable ordered row pair of an empirical kernel.

    Rows may contain zeros, so divergences can be infinite; ties (including
    inf-inf) break to the lexicographically smallest (accept, reject) pair.
    """
    nx = kernel.shape[0]
    best = (-math.inf, 0, 1)
    for xa in range(nx):
        for xr in range(nx):
            if xa == xr:
                continue
            d = _kl_rows(kernel[xa], kernel[xr])
            if d > best[0]:
                best = (d, xa, xr)
    return best[1], best[2]


def _empirical_llr(kernel, x_accept, x_reject):
    """Per-output log(kernel[xa][y]/kernel[xr][y]); outputs unseen under both
    rows contribute zero (the test learns nothing from them)."""
    pa, pr = kernel[x_accept], kernel[x_reject]
    out = np.zeros(pa.size)
    both = (pa > 0) & (pr > 0)
    out[both] = np.log(pa[both]) - np.log(pr[both])
    out[(pa > 0) & (pr == 0)] = math.inf
    out[(pa == 0) & (pr > 0)] = -math.inf
    return out


# ---------------------------------------------------------------------------
# sequential probability ratio test


def sprt(llr_stream, a_accept, a_reject, n_max=None):
    """Run the confirmation-phase SPRT over a per-symbol LLR sequence.

    Accumulates the log-likelihood-ratio sum and exits the first step it
    leaves [-a_reject, a_accept] (strictly).  Returns
    (decision, steps, terminal_llr) with decision "accept" iff the sum ended
    above a_accept.  Raises HorizonExceeded when n_max steps pass — or the
    stream ends — without a decision.
    """
    if not (a_accept > 0 and a_reject > 0):
        raise VlfError(
            f"SPRT thresholds must be positive, got ({a_accept}, {a_reject})"
        )
    s = 0.0
    steps = 0
    for v in llr_stream:
        s += float(v)
        steps += 1
        if s > a_accept:
            return "accept", steps, s
        if s < -a_reject:
            return "reject", steps, s
        if n_max is not None and steps >= n_max:
            raise HorizonExceeded(
                f"no SPRT decision within n_max = {n_max} steps"
            )
    raise HorizonExceeded(f"LLR stream ended undecided after {steps} steps")


def _run_ht(rng, out_cdf, llr_values, a_accept, a_reject, budget):
    """Vectorized SPRT on channel outputs drawn from out_cdf (the true
    channel's row for the control input actually sent), scored with
    llr_values.  Returns (decision, steps) or (None, budget) if undecided."""
    s = 0.0
    used = 0
    while used < budget:
        b = min(_HT_BLOCK, budget - used)
        y = ensemble._categorical(rng, out_cdf, b)
        vals = llr_values[y]
        with np.errstate(invalid="ignore"):
            # an infinite score exits at its own index, so NaN entries past
            # the first +-inf pair can never be selected
            csum = s + np.cumsum(vals)
        exit_mask = (csum > a_accept) | (csum < -a_reject)
        if exit_mask.any():
            i = int(exit_mask.argmax())
            return ("accept" if csum[i] > a_accept else "reject", used + i + 1)
        s = float(csum[-1])
        if not math.isfinite(s):
            # +inf and -inf alternating can only arise from a zero-mass
            # output; treat as no information and restart the block sum
            s = 0.0
        used += b
    return None, budget


def _run_ht_gaussian(rng, mean, noise_sd, slope, a_accept, a_reject, budget):
    """SPRT for antipodal Gaussian controls: outputs N(mean, noise_sd^2),
    per-symbol LLR slope * y."""
    s = 0.0
    used = 0
    while used < budget:
        b = min(_HT_BLOCK, budget - used)
        y = mean + noise_sd * rng.standard_normal(b)
        csum = s + np.cumsum(slope * y)
        exit_mask = (csum > a_accept) | (csum < -a_reject)
        if exit_mask.any():
            i = int(exit_mask.argmax())
            return ("accept" if csum[i] > a_accept else "reject", used + i + 1)
        s = float(csum[-1])
        used += b
    return None, budget


# ---------------------------------------------------------------------------
# true-message metric paths


def _scan_crossings(tau1, tau2, t_base, metric, gamma1, gamma2):
    """Update first-crossing times given one block of metric values."""
    if tau1 is None:
        hit = metric > gamma1
        if hit.any():
            tau1 = t_base + int(hit.argmax()) + 1
    if tau2 is None:
        hit = metric > gamma2
        if hit.any():
            tau2 = t_base + int(hit.argmax()) + 1
    return tau1, tau2


def _true_path_dmc(rng, rt):
    """Known-channel walk: cumulative information density of the true pair."""
    tau1 = tau2 = None
    carry = 0.0
    t = 0
    ys = []
    while t < rt.n_max and tau2 is None:
        b = min(_BLOCK, rt.n_max - t)
        cells = ensemble._categorical(rng, rt.joint_cdf, b)
        x, y = cells // rt.num_y, cells % rt.num_y
        s = carry + np.cumsum(rt.dens[x, y])
        tau1, tau2 = _scan_crossings(tau1, tau2, t, s, rt.g1, rt.g2)
        carry = float(s[-1])
        ys.append(y)
        t += b
    return tau1, tau2, np.concatenate(ys) if ys else np.zeros(0, dtype=int), None


def _true_path_gaussian(rng, rt):
    tau1 = tau2 = None
    carry = 0.0
    e_carry = 0.0
    t = 0
    ys, e2 = [], []
    sd_x = math.sqrt(rt.power)
    sd_z = math.sqrt(rt.noise_var)
    while t < rt.n_max and tau2 is None:
        b = min(_BLOCK, rt.n_max - t)
        x = sd_x * rng.standard_normal(b)
        y = x + sd_z * rng.standard_normal(b)
        s = carry + np.cumsum(rt.dens_fn(x, y))
        tau1, tau2 = _scan_crossings(tau1, tau2, t, s, rt.g1, rt.g2)
        carry = float(s[-1])
        ecum = e_carry + np.cumsum(x * x)
        e_carry = float(ecum[-1])
        ys.append(y)
        e2.append(ecum)
        t += b
    y_all = np.concatenate(ys) if ys else np.zeros(0)
    e_all = np.concatenate(e2) if e2 else np.zeros(0)
    return tau1, tau2, y_all, e_all


def _true_path_empirical_mi(rng, rt):
    """Universal-DMC walk: n * I(joint type of true codeword vs outputs)."""
    tau1 = tau2 = None
    t = 0
    counts = np.zeros(rt.num_x * rt.num_y, dtype=np.int64)
    ys = []
    L = rt.log_tbl
    while t < rt.n_max and tau2 is None:
        b = min(_HT_BLOCK * 2, rt.n_max - t)
        cells = ensemble._categorical(rng, rt.joint_cdf, b)
        onehot = np.zeros((b, counts.size), dtype=np.int64)
        onehot[np.arange(b), cells] = 1
        cum = counts[None, :] + np.cumsum(onehot, axis=0)
        grid = cum.reshape(b, rt.num_x, rt.num_y)
        n = np.arange(t + 1, t + b + 1)
        metric = (
            L[cum].sum(axis=1)
            - L[grid.sum(axis=2)].sum(axis=1)
            - L[grid.sum(axis=1)].sum(axis=1)
            + L[n]
        )
        tau1, tau2 = _scan_crossings(tau1, tau2, t, metric, rt.g1, rt.g2)
        counts = cum[-1]
        ys.append(cells % rt.num_y)
        t += b
    return tau1, tau2, np.concatenate(ys) if ys else np.zeros(0, dtype=int), None


def _true_path_flip_entropy(rng, rt):
    """Binary universal walk: n(log 2 - h_b(empirical flip rate))."""
    tau1 = tau2 = None
    t = 0
    k = 0
    ys = []
    L = rt.log_tbl
    ln2 = math.log(2.0)
    while t < rt.n_max and tau2 is None:
        b = min(_BLOCK, rt.n_max - t)
        cells = ensemble._categorical(rng, rt.joint_cdf, b)
        x, y = cells // 2, cells % 2
        kcum = k + np.cumsum(x != y)
        n = np.arange(t + 1, t + b + 1)
        metric = n * ln2 - L[n] + L[kcum] + L[n - kcum]
        tau1, tau2 = _scan_crossings(tau1, tau2, t, metric, rt.g1, rt.g2)
        k = int(kcum[-1])
        ys.append(y)
        t += b
    return tau1, tau2, np.concatenate(ys) if ys else np.zeros(0, dtype=int), None


def _true_path_correlation(rng, rt):
    """Universal Gaussian walk: -(n/2) log(1 - rho_hat^2), recognized from
    min_eval_len on."""
    tau1 = tau2 = None
    t = 0
    sxy = sxx = syy = 0.0
    e_carry = 0.0
    ys, e2 = [], []
    sd_x = math.sqrt(rt.power)
    sd_z = math.sqrt(rt.noise_var)
    while t < rt.n_max and tau2 is None:
        b = min(_BLOCK, rt.n_max - t)
        x = sd_x * rng.standard_normal(b)
        y = x + sd_z * rng.standard_normal(b)
        cxy = sxy + np.cumsum(x * y)
        cxx = sxx + np.cumsum(x * x)
        cyy = syy + np.cumsum(y * y)
        n = np.arange(t + 1, t + b + 1, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            r2 = np.clip(cxy * cxy / (cxx * cyy), 0.0, 1.0)
            metric = -0.5 * n * np.log1p(-r2)
        np.nan_to_num(metric, copy=False, nan=-math.inf, posinf=math.inf)
        if t + 1 < rt.n_min:
            metric[: rt.n_min - t - 1] = -math.inf
        tau1, tau2 = _scan_crossings(tau1, tau2, t, metric, rt.g1, rt.g2)
        sxy, sxx, syy = float(cxy[-1]), float(cxx[-1]), float(cyy[-1])
        ecum = e_carry + np.cumsum(x * x)
        e_carry = float(ecum[-1])
        ys.append(y)
        e2.append(ecum)
        t += b
    y_all = np.concatenate(ys) if ys else np.zeros(0)
    e_all = np.concatenate(e2) if e2 else np.zeros(0)
    return tau1, tau2, y_all, e_all


# ---------------------------------------------------------------------------
# per-config runtime state


class _Runtime:
    """Derived tables shared by every trial of a configuration (read-only)."""

    def __init__(self, cfg):
        self.cfg = cfg
        p = cfg.params
        self.g1, self.g2 = p.gamma1, p.gamma2
        self.log_m = p.log_m
        self.gaussian = isinstance(cfg.channel, GaussianChannel)
        if self.gaussian:
            ch = cfg.channel
            self.power = ch.power
            self.noise_var = ch.noise_variance
            cap = ch.capacity
            self.dens_fn = (
                lambda x, y: cap
                - (y - x) ** 2 / (2.0 * self.noise_var)
                + y * y / (2.0 * (self.power + self.noise_var))
            )
            drift = cap
        else:
            w = cfg.channel.matrix
            self.num_x, self.num_y = w.shape
            self.w = w
            self.dens = None
            jp = cfg.px[:, None] * w
            self.joint_cdf = np.cumsum(jp.ravel())
            self.px_cdf = np.cumsum(cfg.px)
            drift = mutual_information(cfg.px, cfg.channel)
            if cfg.variant == "vlf_dmc":
                from .channel import information_density_table

                self.dens = information_density_table(cfg.px, cfg.channel)
                py = cfg.px @ w
                post = (jp / py[None, :]).T  # (num_y, num_x)
                self.post_cdfs = np.cumsum(post, axis=1)
            if cfg.variant == "uvlf_bsc":
                drift = math.log(2.0) - _binary_entropy(
                    float(jp[0, 1] + jp[1, 0])
                )
        if drift <= 0:
            raise HorizonTooSmall(
                f"metric drift {drift} is not positive; no finite horizon works"
            )
        self.drift = drift
        self.n_max = (
            cfg.n_max
            if cfg.n_max is not None
            else int(math.ceil(cfg.n_max_mult * self.g2 / drift))
        )
        if self.n_max < 10.0 * self.g2 / drift:
            raise HorizonTooSmall(
                f"n_max = {self.n_max} is below 10*gamma2/C = "
                f"{10.0 * self.g2 / drift:.1f}"
            )
        self.c2_cap = (
            int(math.ceil(cfg.c2 * self.g2 / drift))
            if cfg.c2 is not None and cfg.variant in _UNIVERSAL
            else None
        )
        if cfg.variant in ("uvlf_dmc", "uvlf_bsc"):
            self.log_tbl = count_log_table(self.n_max + 1)
        if cfg.variant == "uvlf_awgn":
            self.n_min = (
                cfg.min_eval_len
                if cfg.min_eval_len is not None
                else max(1, int(self.log_m))
            )
        # known-channel confirmation tables
        if not self.gaussian and cfg.variant == "vlf_dmc":
            xa, xr, _ = control_pair(cfg.channel)
            self.ht_known = (
                np.cumsum(w[xa]),
                np.cumsum(w[xr]),
                np.log(w[xa]) - np.log(w[xr]),
            )
        self.mode = self._resolve_mode()
        if cfg.variant == "uvlf_bsc" and self.mode == "ensemble":
            self.flip_absorption = ensemble.FlipEntropyAbsorption(
                self.log_tbl, self.g1, self.n_max
            )

    def _resolve_mode(self):
        cfg = self.cfg
        literal_ok = ensemble.check_message_count(self.log_m)
        if cfg.variant in ("vlf_dmc", "vlf_awgn"):
            ensemble_ok, why = True, ""
        elif cfg.variant == "uvlf_dmc":
            ensemble_ok = not self.gaussian and (self.num_x, self.num_y) == (2, 2)
            why = "the count dynamic program needs a binary-binary channel"
        elif cfg.variant == "uvlf_bsc":
            ensemble_ok = bool(np.all(np.abs(self.cfg.px - 0.5) < 1e-12))
            why = "the shared absorption law needs a uniform codebook"
        else:  # uvlf_awgn
            ensemble_ok = False
            why = "no exact crossing law is available for the correlation metric"
        if cfg.competitor_mode == "literal":
            if not literal_ok:
                raise StateExplosion(
                    f"literal competitors need at most 4096 messages, "
                    f"got log M = {self.log_m:.3f}"
                )
            return "literal"
        if cfg.competitor_mode == "ensemble":
            if not ensemble_ok:
                raise StateExplosion(
                    f"ensemble competitors unavailable for {cfg.variant}: {why}"
                )
            return "ensemble"
        if literal_ok:
            return "literal"
        if ensemble_ok:
            return "ensemble"
        raise StateExplosion(
            f"message count log M = {self.log_m:.3f} is too large for literal "
            f"competitor simulation and {cfg.variant} has no ensemble "
            f"strategy: {why}"
        )


def _binary_entropy(q):
    if q <= 0.0 or q >= 1.0:
        return 0.0
    return -q * math.log(q) - (1.0 - q) * math.log1p(-q)


# ---------------------------------------------------------------------------
# one trial


def _race(rng, rt, emp, y_h):
    """Resolve the competitor side over the horizon covered by y_h."""
    cfg = rt.cfg
    if rt.mode == "literal":
        m1 = ensemble.literal_count(rt.log_m)
        if m1 == 0:
            return ensemble.RaceResult(None, None)
        if cfg.variant == "vlf_dmc":
            return ensemble.literal_dmc_race(
                rng, y_h, m1, rt.dens, rt.px_cdf, rt.g1, rt.g2
            )
        if cfg.variant == "vlf_awgn":
            return ensemble.literal_gaussian_race(
                rng, y_h, m1, rt.power, rt.dens_fn, rt.g1, rt.g2
            )
        if cfg.variant == "uvlf_dmc":
            return ensemble.literal_empirical_mi_race(
                rng, y_h, m1, rt.px_cdf, rt.log_tbl, rt.num_x, rt.num_y,
                rt.g1, rt.g2
            )
        if cfg.variant == "uvlf_bsc":
            return ensemble.literal_flip_entropy_race(
                rng, y_h, m1, float(cfg.px[1]), rt.log_tbl, rt.g1, rt.g2
            )
        return ensemble.literal_correlation_race(
            rng, y_h, m1, rt.power, rt.g1, rt.g2, rt.n_min
        )
    if cfg.variant == "vlf_dmc":
        return ensemble.ensemble_dmc_race(
            rng, y_h, rt.log_m, rt.dens, rt.post_cdfs, rt.px_cdf, rt.g1, rt.g2
        )
    if cfg.variant == "vlf_awgn":
        return ensemble.ensemble_gaussian_race(
            rng, y_h, rt.log_m, rt.power, rt.noise_var, rt.dens_fn,
            rt.g1, rt.g2
        )
    if cfg.variant == "uvlf_dmc":
        return ensemble.ensemble_binary_mi_race(
            rng, y_h, rt.log_m, float(cfg.px[1]), rt.log_tbl, rt.g1, rt.g2,
            y_h.size
        )
    return rt.flip_absorption.race(
        rng, rt.log_m, rt.log_tbl, rt.g2, y_h.size
    )


def _confirmation(rng, rt, emp, hypothesis_true, budget):
    """Play the confirmation phase; returns (decision or None, steps)."""
    cfg = rt.cfg
    p = cfg.params
    if budget < 1:
        return None, 0
    if rt.gaussian:
        sqp = math.sqrt(rt.power)
        mean = sqp if hypothesis_true else -sqp
        var_hat = rt.noise_var if emp is None else emp.noise_variance
        slope = 2.0 * sqp / var_hat
        return _run_ht_gaussian(
            rng, mean, math.sqrt(rt.noise_var), slope,
            p.a_accept, p.a_reject, budget
        )
    if emp is None:
        cdf_a, cdf_r, llr = rt.ht_known
    else:
        xa, xr = _empirical_control_pair(emp.kernel)
        llr = _empirical_llr(emp.kernel, xa, xr)
        cdf_a = np.cumsum(rt.w[xa])
        cdf_r = np.cumsum(rt.w[xr])
    out_cdf = cdf_a if hypothesis_true else cdf_r
    return _run_ht(rng, out_cdf, llr, p.a_accept, p.a_reject, budget)


_TRUE_PATHS = {
    "vlf_dmc": _true_path_dmc,
    "vlf_awgn": _true_path_gaussian,
    "uvlf_dmc": _true_path_empirical_mi,
    "uvlf_bsc": _true_path_flip_entropy,
    "uvlf_awgn": _true_path_correlation,
}


def _censored_outcome(rt, len_c1, len_ht, energy):
    n = rt.n_max
    c1 = min(len_c1, n)
    ht = min(len_ht, n - c1)
    return TrialOutcome(
        correct=False,
        tau=n,
        len_c1=c1,
        len_ht=ht,
        len_c2=n - c1 - ht,
        energy=energy,
        censored=True,
        stopped_at_zero=False,
    )


def simulate_trial(cfg, trial_index, _runtime=None):
    """Play one full protocol run; deterministic in (cfg.seed, trial_index)."""
    rt = _runtime if _runtime is not None else _Runtime(cfg)
    rng = _trial_rng(cfg.seed, trial_index)
    emp = _draw_training(rng, cfg) if cfg.variant in _UNIVERSAL else None

    if rng.random() < cfg.params.eps0:
        if cfg.honest_time_zero:
            correct = rng.random() < math.exp(-rt.log_m)
        else:
            correct = False
        return TrialOutcome(
            correct=correct, tau=0, len_c1=0, len_ht=0, len_c2=0,
            energy=0.0, censored=False, stopped_at_zero=True,
        )

    tau1_true, tau2_true, y, ecum = _TRUE_PATHS[cfg.variant](rng, rt)
    if tau1_true is None:
        energy = float(ecum[-1]) if ecum is not None and ecum.size else 0.0
        return _censored_outcome(rt, rt.n_max, 0, energy)

    # competitors only matter strictly before the true gamma_2 crossing
    horizon = (tau2_true - 1) if tau2_true is not None else y.size
    race = _race(rng, rt, emp, y[:horizon])

    c1_correct = race.t1 is None or race.t1 >= tau1_true
    tau_first = tau1_true if c1_correct else race.t1

    decision, len_ht = _confirmation(
        rng, rt, emp, c1_correct, rt.n_max - tau_first
    )
    if decision is None:
        energy = (
            float(ecum[min(tau_first, ecum.size) - 1]) + len_ht * rt.power
            if rt.gaussian
            else 0.0
        )
        return _censored_outcome(rt, tau_first, len_ht, energy)

    if decision == "accept":
        walk_end = tau_first
        correct = c1_correct
    else:
        cand = [t for t in (tau2_true, race.t2) if t is not None]
        if not cand:
            energy = (
                float(ecum[-1]) + len_ht * rt.power if rt.gaussian else 0.0
            )
            return _censored_outcome(rt, tau_first, len_ht, energy)
        walk_end = min(cand)
        if rt.c2_cap is not None and walk_end > rt.c2_cap:
            energy = (
                float(ecum[min(rt.c2_cap, ecum.size) - 1]) + len_ht * rt.power
                if rt.gaussian
                else 0.0
            )
            return _censored_outcome(rt, tau_first, len_ht, energy)
        correct = race.t2 is None or (
            tau2_true is not None and tau2_true <= race.t2
        )

    tau = walk_end + len_ht
    if tau > rt.n_max:
        energy = (
            float(ecum[min(walk_end, ecum.size) - 1]) + len_ht * rt.power
            if rt.gaussian
            else 0.0
        )
        return _censored_outcome(rt, walk_end, len_ht, energy)
    energy = (
        float(ecum[walk_end - 1]) + len_ht * rt.power if rt.gaussian else 0.0
    )
    return TrialOutcome(
        correct=bool(correct),
        tau=int(tau),
        len_c1=int(tau_first),
        len_ht=int(len_ht),
        len_c2=int(walk_end - tau_first),
        energy=float(energy),
        censored=False,
        stopped_at_zero=False,
    )


# ---------------------------------------------------------------------------
# Monte Carlo aggregation


def _run_chunk(cfg, lo, hi):
    rt = _Runtime(cfg)
    out = np.empty((hi - lo, 8))
    for i in range(lo, hi):
        o = simulate_trial(cfg, i, _runtime=rt)
        out[i - lo] = (
            float(o.correct), float(o.tau), float(o.len_c1), float(o.len_ht),
            float(o.len_c2), o.energy, float(o.censored),
            float(o.stopped_at_zero),
        )
    return out


def _wilson(errors, trials):
    if trials == 0:
        return math.nan, math.nan, math.nan
    p = errors / trials
    z2 = _Z95 * _Z95
    denom = 1.0 + z2 / trials
    center = (p + z2 / (2.0 * trials)) / denom
    half = (
        _Z95
        * math.sqrt(p * (1.0 - p) / trials + z2 / (4.0 * trials * trials))
        / denom
    )
    lo = 0.0 if errors == 0 else max(0.0, center - half)
    hi = 1.0 if errors == trials else min(1.0, center + half)
    return p, lo, hi


def run_monte_carlo(cfg, trials, workers=1):
    """Aggregate `trials` independent protocol runs into an McEstimate.

    Per-trial randomness depends only on (cfg.seed, trial index), and trials
    are reduced in index order, so the estimate is bit-identical for any
    worker count.
    """
    if trials < 1:
        raise VlfError(f"trials must be >= 1, got {trials}")
    _Runtime(cfg)  # validate the configuration before spawning workers
    if workers <= 1:
        rec = _run_chunk(cfg, 0, trials)
    else:
        n_chunks = min(trials, workers * 4)
        bounds = np.linspace(0, trials, n_chunks + 1).astype(int)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(
                pool.map(
                    _run_chunk,
                    [cfg] * n_chunks,
                    bounds[:-1].tolist(),
                    bounds[1:].tolist(),
                )
            )
        rec = np.concatenate(parts, axis=0)
    return _aggregate(cfg, rec)


def trial_outcomes(cfg, trials):
    """Yield TrialOutcome for trial indices 0..trials-1 (single process)."""
    if trials < 1:
        raise VlfError(f"trials must be >= 1, got {trials}")
    rt = _Runtime(cfg)
    for i in range(trials):
        yield simulate_trial(cfg, i, _runtime=rt)


def aggregate_outcomes(cfg, outcomes):
    """McEstimate over an explicit in-order TrialOutcome collection."""
    rows = [
        (
            float(o.correct), float(o.tau), float(o.len_c1), float(o.len_ht),
            float(o.len_c2), o.energy, float(o.censored),
            float(o.stopped_at_zero),
        )
        for o in outcomes
    ]
    if not rows:
        raise VlfError("aggregate_outcomes needs at least one outcome")
    return _aggregate(cfg, np.asarray(rows))


def _aggregate(cfg, rec):
    trials = rec.shape[0]
    correct, tau = rec[:, 0], rec[:, 1]
    energy, censored = rec[:, 5], rec[:, 6]
    errors = float(np.sum(1.0 - correct))
    eps_hat, eps_lo, eps_hi = _wilson(errors, trials)
    n_hat = float(tau.mean())
    degenerate = trials < 2
    if degenerate:
        n_lo = n_hi = math.nan
    else:
        half = _Z95 * float(tau.std(ddof=1)) / math.sqrt(trials)
        n_lo, n_hi = n_hat - half, n_hat + half
    gaussian = isinstance(cfg.channel, GaussianChannel)
    power_hat = power_lo = power_hi = None
    if gaussian:
        tot_tau = float(tau.sum())
        if tot_tau > 0:
            power_hat = float(energy.sum()) / tot_tau
            if degenerate:
                power_lo = power_hi = math.nan
            else:
                resid = energy - power_hat * tau
                se = (
                    math.sqrt(float(np.sum(resid * resid)) / (trials - 1))
                    / math.sqrt(trials)
                    / float(tau.mean())
                )
                power_lo = power_hat - _Z95 * se
                power_hi = power_hat + _Z95 * se
        else:
            power_hat = math.nan
            power_lo = power_hi = math.nan
    return McEstimate(
        eps_hat=eps_hat,
        eps_lo=eps_lo,
        eps_hi=eps_hi,
        n_hat=n_hat,
        n_lo=n_lo,
        n_hi=n_hi,
        power_hat=power_hat,
        power_lo=power_lo,
        power_hi=power_hi,
        censor_rate=float(censored.mean()),
        trials=int(trials),
        degenerate=degenerate,
    )


# ---------------------------------------------------------------------------
# lockstep passage-time utilities (used by drift diagnostics and tests)


def empirical_mi_passage_times(dmc, px, gamma, trials, seed=0, max_steps=None):
    """First times n * I(joint type) > gamma for `trials` independent walks.

    All walks advance in lockstep (one joint-cell draw per walk per step), so
    the cost is O(max reached time) vectorized over trials.  Walks that do
    not cross within max_steps (default: generous multiple of gamma/I) are
    reported at max_steps.
    """
    p = _as_prob_vector(px, "px")
    w = dmc.matrix
    drift = mutual_information(p, dmc)
    if max_steps is None:
        max_steps = int(math.ceil(50.0 * gamma / drift)) + 200
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    nx, ny = w.shape
    cells = nx * ny
    jcdf = np.cumsum((p[:, None] * w).ravel())
    L = count_log_table(max_steps + 1)
    counts = np.zeros((trials, cells), dtype=np.int64)
    taus = np.full(trials, max_steps, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    for t in range(1, max_steps + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        draw = ensemble._categorical(rng, jcdf, idx.size)
        counts[idx, draw] += 1
        grid = counts[idx].reshape(idx.size, nx, ny)
        metric = (
            L[counts[idx]].sum(axis=1)
            - L[grid.sum(axis=2)].sum(axis=1)
            - L[grid.sum(axis=1)].sum(axis=1)
            + L[t]
        )
        crossed = metric > gamma
        if crossed.any():
            hit = idx[crossed]
            taus[hit] = t
            alive[hit] = False
    return taus


def info_density_passage_times(dmc, px, gamma, trials, seed=0, max_steps=None):
    """First times the cumulative information density exceeds gamma."""
    p = _as_prob_vector(px, "px")
    from .channel import information_density_table

    dens = information_density_table(p, dmc)
    drift = mutual_information(p, dmc)
    if max_steps is None:
        max_steps = int(math.ceil(50.0 * gamma / drift)) + 200
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    ny = dmc.matrix.shape[1]
    jcdf = np.cumsum((p[:, None] * dmc.matrix).ravel())
    s = np.zeros(trials)
    taus = np.full(trials, max_steps, dtype=np.int64)
    alive = np.ones(trials, dtype=bool)
    dens_flat = dens.ravel()
    for t in range(1, max_steps + 1):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        draw = ensemble._categorical(rng, jcdf, idx.size)
        s[idx] += dens_flat[draw]
        crossed = s[idx] > gamma
        if crossed.any():
            hit = idx[crossed]
            taus[hit] = t
            alive[hit] = False
    return taus
