"""Command-line front end.

Verbs:

* ``bound``    - evaluate the three-phase achievability bound at a schedule
                 given explicitly or derived from a horizon N1;
* ``optimize`` - best log M meeting (eps, N) targets, with the schedule;
* ``simulate`` - Monte Carlo runs of the coding scheme (any variant);
* ``sweep``    - rate curves over an N grid for schemes thm1 / vlsf /
                 converse, resumable;
* ``oracle``   - exact joint-type tail probabilities vs the polynomial bound.

Each verb appends fixed-schema rows to a CSV (``--out``) and prints a
one-line summary.  Rates and other reals use 6 decimal places, probabilities
scientific notation with 3 significant digits.  Options may come from a flat
``key = value`` config file (``--config``); explicit command-line flags win.
Exit status: 0 success, 2 infeasible targets, 1 any other error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys

import numpy as np

from .bounds import (
    VlfParams,
    achievability_bound,
    asymptotic_schedule,
    converse_bound,
    optimize_params,
    single_phase_bound,
    universal_schedule,
    universal_schedule_gaussian,
)
from .channel import Dmc, GaussianChannel, capacity, parse_channel_spec
from .empirical import tail_exponents
from .engine import (
    SchemeConfig,
    aggregate_outcomes,
    run_monte_carlo,
    trial_outcomes,
)
from .errors import EpsTooSmall, HorizonTooSmall, Infeasible, VlfError
from .oracle import exact_mi_tail, mi_tail_bound

_LN2 = math.log(2.0)


class _CliError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise _CliError(message)


def _fmt_rate(x):
    return f"{x:.6f}"


def _fmt_prob(x):
    return f"{x:.2e}"


def _parse_bool(s):
    v = s.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise _CliError(f"not a boolean: {s!r}")


def _parse_message_count(s):
    """'2^100' (bits exponent) or a plain integer count; returns log M nats."""
    t = s.strip()
    if "^" in t:
        base, _, expo = t.partition("^")
        if base.strip() != "2":
            raise _CliError(f"message count base must be 2, got {s!r}")
        return float(expo) * _LN2
    m = int(t)
    if m < 1:
        raise _CliError(f"message count must be >= 1, got {s!r}")
    return math.log(m)


def _parse_grid(s, caster=float):
    """'start:stop:step' inclusive grid, or a single value."""
    parts = s.split(":")
    if len(parts) == 1:
        return [caster(parts[0])]
    if len(parts) != 3:
        raise _CliError(f"grid must be start:stop:step, got {s!r}")
    start, stop, step = (float(p) for p in parts)
    if step <= 0 or stop < start:
        raise _CliError(f"bad grid {s!r}")
    vals = np.arange(start, stop + step * 0.5, step)
    return [caster(v) for v in vals]


def _parse_px(s):
    v = np.array([float(p) for p in s.split(",")], dtype=float)
    return v / v.sum() if abs(v.sum() - 1.0) > 1e-12 else v


def _load_config(path):
    """Flat key = value file; # starts a comment; quotes optional."""
    out = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise _CliError(
                        f"{path}:{lineno}: expected key = value, got {raw.strip()!r}"
                    )
                key, _, val = line.partition("=")
                key = key.strip()
                val = val.strip()
                if len(val) >= 2 and val[0] == val[-1] and val[0] in "\"'":
                    val = val[1:-1]
                if not key:
                    raise _CliError(f"{path}:{lineno}: empty key")
                out[key] = val
    except OSError as exc:
        raise _CliError(f"cannot read config {path}: {exc}") from exc
    return out


# option tables: dest -> (flag, caster, help); casters run on config-file
# strings; command-line flags are parsed as raw strings and cast the same way
_COMMON = {
    "channel": ("--channel", str, "channel spec: bsc:<p> | dmc:<path> | awgn:<snr>"),
    "out": ("--out", str, "CSV file to append results to"),
}
_VERB_OPTS = {
    "bound": {
        **_COMMON,
        "px": ("--px", _parse_px, "input distribution, comma-separated"),
        "M": ("--M", _parse_message_count, "message count (e.g. 2^100)"),
        "gamma1": ("--gamma1", float, "first communication threshold (nats)"),
        "gamma2": ("--gamma2", float, "second communication threshold (nats)"),
        "a_accept": ("--aA", float, "SPRT accept threshold"),
        "a_reject": ("--aR", float, "SPRT reject threshold"),
        "eps0": ("--eps0", float, "stop-at-time-zero probability"),
        "N1": ("--N1", float, "derive the schedule from this horizon"),
        "eps": ("--eps", float, "target error probability"),
    },
    "optimize": {
        **_COMMON,
        "px": ("--px", _parse_px, "input distribution, comma-separated"),
        "eps": ("--eps", float, "target error probability"),
        "N": ("--N", float, "target average blocklength"),
    },
    "simulate": {
        **_COMMON,
        "px": ("--px", _parse_px, "codebook input distribution"),
        "variant": ("--variant", str,
                    "vlf_dmc | uvlf_dmc | uvlf_bsc | vlf_awgn | uvlf_awgn"),
        "M": ("--M", _parse_message_count, "message count (e.g. 2^100)"),
        "gamma1": ("--gamma1", float, "explicit threshold (with gamma2/aA/aR)"),
        "gamma2": ("--gamma2", float, "explicit threshold"),
        "a_accept": ("--aA", float, "explicit SPRT accept threshold"),
        "a_reject": ("--aR", float, "explicit SPRT reject threshold"),
        "eps0": ("--eps0", float, "explicit stop-at-time-zero probability"),
        "N1": ("--N1", float, "known-channel schedule horizon"),
        "eps": ("--eps", float, "target error probability for the schedule"),
        "d": ("--d", float, "universal schedule union-bound exponent"),
        "delta": ("--delta", float, "universal schedule slack (default 0.1)"),
        "training": ("--training", int, "training sequence length"),
        "trials": ("--trials", int, "number of Monte Carlo trials"),
        "seed": ("--seed", int, "RNG seed (required)"),
        "workers": ("--workers", int, "parallel worker processes"),
        "trace": ("--trace", str, "write per-trial JSON lines here"),
        "honest_time_zero": ("--honest-time-zero", _parse_bool,
                             "time-zero branch guesses uniformly"),
        "competitor_mode": ("--competitor-mode", str,
                            "auto | literal | ensemble"),
        "n_max": ("--n-max", int, "hard horizon override"),
        "n_max_mult": ("--n-max-mult", float, "horizon multiple of gamma2/C"),
        "c2": ("--c2", float, "universal second-phase cap multiple"),
        "min_eval_len": ("--min-eval-len", int,
                         "first length the uvlf_awgn metric is evaluated at"),
    },
    "sweep": {
        **_COMMON,
        "px": ("--px", _parse_px, "input distribution, comma-separated"),
        "eps": ("--eps", float, "target error probability"),
        "N": ("--N", str, "blocklength grid start:stop:step"),
        "schemes": ("--schemes", str, "comma list from thm1,vlsf,converse"),
        "resume": ("--resume", _parse_bool, "skip rows already in the CSV"),
    },
    "oracle": {
        **_COMMON,
        "px": ("--px", _parse_px, "input marginal, comma-separated"),
        "n": ("--n", int, "sequence length for the exact tail"),
        "gamma": ("--gamma", str, "threshold grid start:stop:step"),
    },
}
_FLAG_TRUE = {"honest_time_zero", "resume"}


def _build_parser():
    top = _Parser(prog="vlf", description=__doc__.split("\n\n")[0])
    subs = top.add_subparsers(dest="verb")
    for verb, opts in _VERB_OPTS.items():
        sp = subs.add_parser(verb, add_help=True)
        sp.add_argument("--config", type=str, default=None,
                        help="flat key = value option file; flags override it")
        for dest, (flag, _, helptext) in opts.items():
            if dest in _FLAG_TRUE:
                sp.add_argument(flag, dest=dest, action="store_const",
                                const="true", default=None, help=helptext)
            else:
                sp.add_argument(flag, dest=dest, type=str, default=None,
                                help=helptext)
    return top


def _merge_options(args, verb):
    """Config-file values under command-line values, all cast by the verb's
    option table; unknown config keys are rejected.  Keys may use either the
    internal name (``a_accept``) or the flag spelling (``aA``, ``n-max``)."""
    opts = _VERB_OPTS[verb]
    alias = {}
    for dest, (flag, _, _h) in opts.items():
        alias[dest] = dest
        alias[flag.lstrip("-")] = dest
        alias[flag.lstrip("-").replace("-", "_")] = dest
    raw_file = _load_config(args.config) if args.config else {}
    filevals = {}
    unknown = sorted(k for k in raw_file if k not in alias)
    if unknown:
        raise _CliError(
            f"unknown config key(s) for {verb}: {', '.join(unknown)}"
        )
    for k, v in raw_file.items():
        filevals[alias[k]] = v
    merged = {}
    for dest, (_flag, caster, _help) in opts.items():
        raw = getattr(args, dest)
        if raw is None:
            raw = filevals.get(dest)
        if raw is None:
            merged[dest] = None
        else:
            try:
                merged[dest] = caster(raw)
            except _CliError:
                raise
            except Exception as exc:
                raise _CliError(f"bad value for {dest}: {raw!r} ({exc})") from exc
    return merged


def _require(opt, name, flag):
    if opt[name] is None:
        raise _CliError(f"{flag} is required")
    return opt[name]


def _resolve_channel(opt):
    spec = _require(opt, "channel", "--channel")
    channel = parse_channel_spec(spec)
    if isinstance(channel, Dmc):
        px = opt.get("px")
        if px is None:
            px = np.full(channel.matrix.shape[0],
                         1.0 / channel.matrix.shape[0])
        return channel, px, spec
    return channel, None, spec


def _append_csv(path, header, rows):
    if path is None:
        for row in rows:
            print(",".join(row))
        return
    fresh = not os.path.exists(path) or os.path.getsize(path) == 0
    with open(path, "a", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if fresh:
            w.writerow(header)
        w.writerows(rows)


_BOUND_HEADER = [
    "scheme", "channel", "N", "eps", "logM_nats", "M_log2",
    "rate_bits_per_use", "gamma1", "gamma2", "aA", "aR", "eps0",
]


def _bound_row(scheme, chan_spec, n_value, report, params):
    if params is None:
        sched = [""] * 5
    else:
        sched = [
            _fmt_rate(params.gamma1), _fmt_rate(params.gamma2),
            _fmt_rate(params.a_accept), _fmt_rate(params.a_reject),
            _fmt_prob(params.eps0),
        ]
    return [
        scheme, chan_spec, _fmt_rate(n_value), _fmt_prob(report.eps),
        _fmt_rate(report.log_m), _fmt_rate(report.log_m / _LN2),
        _fmt_rate(report.rate_bits),
    ] + sched


def _cmd_bound(opt):
    channel, px, spec = _resolve_channel(opt)
    explicit = [opt["gamma1"], opt["gamma2"], opt["a_accept"], opt["a_reject"]]
    if all(v is not None for v in explicit):
        log_m = _require(opt, "M", "--M")
        params = VlfParams(
            log_m=log_m, gamma1=explicit[0], gamma2=explicit[1],
            a_accept=explicit[2], a_reject=explicit[3],
            eps0=opt["eps0"] if opt["eps0"] is not None else 0.0,
        )
    elif opt["N1"] is not None:
        params = asymptotic_schedule(opt["N1"], channel, px, eps=opt["eps"])
    else:
        raise _CliError(
            "bound needs either --gamma1/--gamma2/--aA/--aR (with --M) "
            "or --N1"
        )
    report = achievability_bound(params, channel, px)
    _append_csv(opt["out"], _BOUND_HEADER,
                [_bound_row("thm1", spec, report.n_avg, report, params)])
    print(
        f"thm1 bound @ {spec}: logM = {report.log_m:.6f} nats "
        f"({report.log_m / _LN2:.2f} bits), eps = {report.eps:.2e}, "
        f"N = {report.n_avg:.6f}, rate = {report.rate_bits:.6f} bits/use"
    )
    return 0


def _cmd_optimize(opt):
    channel, px, spec = _resolve_channel(opt)
    eps = _require(opt, "eps", "--eps")
    n_target = _require(opt, "N", "--N")
    params, report = optimize_params(channel, px, eps, n_target)
    _append_csv(opt["out"], _BOUND_HEADER,
                [_bound_row("thm1", spec, n_target, report, params)])
    print(
        f"optimize @ {spec}, eps <= {eps:.2e}, N <= {n_target:.6f}: "
        f"logM = {report.log_m:.6f} nats ({report.log_m / _LN2:.2f} bits), "
        f"rate = {report.rate_bits:.6f} bits/use"
    )
    return 0


def _channel_capacity(channel):
    if isinstance(channel, GaussianChannel):
        return channel.capacity
    return capacity(channel)[0]


def _cmd_sweep(opt):
    channel, px, spec = _resolve_channel(opt)
    eps = _require(opt, "eps", "--eps")
    grid = _parse_grid(_require(opt, "N", "--N"), caster=float)
    schemes = [s.strip() for s in
               _require(opt, "schemes", "--schemes").split(",") if s.strip()]
    for s in schemes:
        if s not in ("thm1", "vlsf", "converse"):
            raise _CliError(f"unknown scheme {s!r} (use thm1, vlsf, converse)")
    done = set()
    out = opt["out"]
    if opt["resume"] and out and os.path.exists(out):
        with open(out, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                try:
                    done.add((row["scheme"], float(row["N"])))
                except (KeyError, ValueError):
                    continue
    cap = _channel_capacity(channel)
    rows = []
    for n_target in grid:
        for scheme in schemes:
            if (scheme, float(f"{n_target:.6f}")) in done:
                continue
            if scheme == "thm1":
                params, report = optimize_params(channel, px, eps, n_target)
                rows.append(_bound_row("thm1", spec, n_target, report, params))
            elif scheme == "vlsf":
                report = single_phase_bound(channel, px, eps, n_target)
                rows.append(_bound_row("vlsf", spec, n_target, report, None))
            else:
                log_m = converse_bound(cap, eps, n_target)
                row = [
                    "converse", spec, _fmt_rate(n_target), _fmt_prob(eps),
                    _fmt_rate(log_m), _fmt_rate(log_m / _LN2),
                    _fmt_rate(log_m / n_target / _LN2),
                ] + [""] * 5
                rows.append(row)
    _append_csv(out, _BOUND_HEADER, rows)
    print(
        f"sweep @ {spec}, eps = {eps:.2e}: {len(rows)} row(s) over "
        f"N grid of {len(grid)} point(s), schemes {','.join(schemes)}"
    )
    return 0


_SIM_HEADER = [
    "variant", "channel", "logM_nats", "gamma1", "gamma2", "aA", "aR",
    "eps0", "trials", "seed", "eps_hat", "eps_lo", "eps_hi",
    "n_hat", "n_lo", "n_hi", "power_hat", "censor_rate",
]


def _sim_params(opt, variant, channel, px):
    explicit = [opt["gamma1"], opt["gamma2"], opt["a_accept"], opt["a_reject"]]
    if all(v is not None for v in explicit):
        log_m = _require(opt, "M", "--M")
        return VlfParams(
            log_m=log_m, gamma1=explicit[0], gamma2=explicit[1],
            a_accept=explicit[2], a_reject=explicit[3],
            eps0=opt["eps0"] if opt["eps0"] is not None else 0.0,
        )
    if any(v is not None for v in explicit):
        raise _CliError(
            "give all of --gamma1/--gamma2/--aA/--aR or none of them"
        )
    if variant in ("vlf_dmc", "vlf_awgn"):
        n1 = _require(opt, "N1", "--N1")
        return asymptotic_schedule(n1, channel, px, eps=opt["eps"])
    log_m = _require(opt, "M", "--M")
    eps = _require(opt, "eps", "--eps")
    delta = opt["delta"] if opt["delta"] is not None else 0.1
    if variant == "uvlf_awgn":
        return universal_schedule_gaussian(log_m, eps, delta=delta)
    num_x, num_y = channel.matrix.shape
    d = opt["d"]
    if d is None and variant == "uvlf_bsc":
        d = 0.5
    return universal_schedule(log_m, num_x, num_y, eps, d=d, delta=delta)


def _cmd_simulate(opt):
    channel, px, spec = _resolve_channel(opt)
    variant = _require(opt, "variant", "--variant")
    seed = _require(opt, "seed", "--seed")
    trials = _require(opt, "trials", "--trials")
    params = _sim_params(opt, variant, channel, px)
    cfg = SchemeConfig(
        variant=variant,
        channel=channel,
        px=px,
        params=params,
        training_len=opt["training"] if opt["training"] is not None else 0,
        n_max=opt["n_max"],
        seed=seed,
        honest_time_zero=bool(opt["honest_time_zero"]),
        competitor_mode=opt["competitor_mode"] or "auto",
        min_eval_len=opt["min_eval_len"],
        n_max_mult=opt["n_max_mult"] if opt["n_max_mult"] is not None else 50.0,
        c2=opt["c2"] if opt["c2"] is not None else 2.0,
    )
    workers = opt["workers"] if opt["workers"] is not None else 1
    if opt["trace"]:
        outs = []
        with open(opt["trace"], "w", encoding="utf-8") as fh:
            for i, o in enumerate(trial_outcomes(cfg, trials)):
                fh.write(json.dumps({
                    "trial": i, "correct": o.correct, "tau": o.tau,
                    "len_c1": o.len_c1, "len_ht": o.len_ht,
                    "len_c2": o.len_c2, "energy": o.energy,
                    "censored": o.censored,
                    "stopped_at_zero": o.stopped_at_zero,
                }) + "\n")
                outs.append(o)
        est = aggregate_outcomes(cfg, outs)
    else:
        est = run_monte_carlo(cfg, trials, workers=workers)
    p = params
    row = [
        variant, spec, _fmt_rate(p.log_m), _fmt_rate(p.gamma1),
        _fmt_rate(p.gamma2), _fmt_rate(p.a_accept), _fmt_rate(p.a_reject),
        _fmt_prob(p.eps0), str(trials), str(seed),
        _fmt_prob(est.eps_hat), _fmt_prob(est.eps_lo), _fmt_prob(est.eps_hi),
        _fmt_rate(est.n_hat),
        _fmt_rate(est.n_lo) if not est.degenerate else "",
        _fmt_rate(est.n_hi) if not est.degenerate else "",
        _fmt_rate(est.power_hat) if est.power_hat is not None else "",
        _fmt_prob(est.censor_rate),
    ]
    _append_csv(opt["out"], _SIM_HEADER, [row])
    power = (
        f", power_hat = {est.power_hat:.6f}" if est.power_hat is not None
        else ""
    )
    print(
        f"{variant} @ {spec}: eps_hat = {est.eps_hat:.2e} "
        f"[{est.eps_lo:.2e}, {est.eps_hi:.2e}], n_hat = {est.n_hat:.6f}"
        f"{power}, censor_rate = {est.censor_rate:.2e}, "
        f"trials = {est.trials}"
    )
    return 0


def _cmd_oracle(opt):
    channel, px, spec = _resolve_channel(opt)
    if not isinstance(channel, Dmc):
        raise _CliError("oracle needs a finite-alphabet channel")
    n = _require(opt, "n", "--n")
    grid = _parse_grid(_require(opt, "gamma", "--gamma"), caster=float)
    py = px @ channel.matrix
    k_exp, _d = tail_exponents(px.size, py.size)
    exact = exact_mi_tail(n, px, py, np.asarray(grid, dtype=float))
    rows = []
    worst = 0.0
    for g, e in zip(grid, exact):
        b = mi_tail_bound(n, g, k_exp)
        ratio = e / b if b > 0 else math.inf
        worst = max(worst, ratio)
        rows.append([
            str(n), _fmt_rate(g), _fmt_prob(e), _fmt_prob(b),
            _fmt_rate(ratio),
        ])
    _append_csv(opt["out"], ["n", "gamma", "exact", "bound", "ratio"], rows)
    print(
        f"oracle @ {spec}, n = {n}: {len(rows)} threshold(s), "
        f"worst exact/bound ratio = {worst:.6f}"
    )
    return 0


_COMMANDS = {
    "bound": _cmd_bound,
    "optimize": _cmd_optimize,
    "simulate": _cmd_simulate,
    "sweep": _cmd_sweep,
    "oracle": _cmd_oracle,
}


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.verb is None:
            raise _CliError("missing verb (bound, optimize, simulate, sweep, oracle)")
        opt = _merge_options(args, args.verb)
        return _COMMANDS[args.verb](opt)
    except (Infeasible, EpsTooSmall, HorizonTooSmall) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return 2
    except _CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (VlfError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
