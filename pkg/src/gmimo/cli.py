"""Command-line entry point.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import replace

import numpy as np

from .channel_model import (
    generate_channels,
    load_channels,
    load_known_channels,
    load_observations,
    read_manifest,
    sample_observations,
    save_channels,
    save_observations,
)
from .deterministic_equivalents import (
    alpha_variance,
    se_bias_value,
    slot_equivalents,
    theta_variance,
)
from .errors import NonPositiveVariance, NumericalError
from .estimators import g_estimate
from .experiments import (
    Sweep,
    emit_csv,
    format_number,
    load_config,
    run_histogram,
    run_mse_sweep,
)
from .matrix_core import RngStream

log = logging.getLogger("gmimo")

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def parse_values(text: str) -> tuple[float, ...]:
    """``start:step:stop`` (inclusive) or a comma-separated list."""
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3:
            raise ValueError(f"range must be start:step:stop, got {text!r}")
        start, step, stop = parts
        if step == 0 or (stop - start) / step < 0:
            raise ValueError(f"empty or infinite range {text!r}")
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(start + step * k for k in range(count))
    return tuple(float(v) for v in text.split(",") if v.strip())


def _write_text(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def cmd_simulate_mse(args) -> int:
    cfg = load_config(args.config)
    kind = {"sir": "sir_db", "t": "t"}[args.sweep]
    cfg = replace(cfg, sweep=Sweep(kind=kind, values=parse_values(args.values)))
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.workers is not None:
        cfg = replace(cfg, parallelism=args.workers)
    points = run_mse_sweep(cfg)
    for p in points:
        if p.degenerate:
            log.warning("sweep value %s: degenerate theoretical variance", p.sweep_value)
    emit_csv(points, args.out)
    return 0


def cmd_simulate_hist(args) -> int:
    cfg = load_config(args.config)
    if args.trials is not None:
        cfg = replace(cfg, trials=args.trials)
    if args.workers is not None:
        cfg = replace(cfg, parallelism=args.workers)
    emit_csv(run_histogram(cfg), args.out)
    return 0


def cmd_generate(args) -> int:
    cfg = load_config(args.config)
    sc = cfg.scenario
    ch = generate_channels(sc)
    save_channels(ch, args.channels, M=sc.M)
    if args.obs:
        obs = sample_observations(ch, sc.M, RngStream(cfg.master_seed, 0))
        save_observations(obs, args.obs)
    return 0


def cmd_estimate(args) -> int:
    H = load_known_channels(args.channels)
    obs = load_observations(args.obs)
    rep = g_estimate(list(H), obs)
    scale = 1.0 / math.log(2.0) if args.bits else 1.0
    T = rep.T
    header = (["i_se", "i_g"] + [f"yhat_{t + 1}" for t in range(T)]
              + [f"iters_{t + 1}" for t in range(T)])
    row = ([format_number(rep.i_se * scale), format_number(rep.i_g * scale)]
           + [format_number(y) for y in rep.yhat] + [str(int(k)) for k in rep.iterations])
    _write_text(args.out, [",".join(header), ",".join(row)])
    return 0


def cmd_detequiv(args) -> int:
    ch = load_channels(args.channels)
    M = args.M if args.M is not None else read_manifest(args.channels).get("M")
    if M is None:
        raise ValueError("M is not recorded in the channel manifest; pass --M")
    M = int(M)
    y = args.y
    lines = ["t,kappa,V_t,y_star,theta_t"]
    for s in slot_equivalents(ch, M, y):
        lines.append(",".join([str(s.t), format_number(s.kappa), format_number(s.v_t),
                               format_number(s.y_star), format_number(s.theta_t)]))
    lines.append(f"V,{format_number(se_bias_value(ch, M, y))},,,")
    for name, fn in (("alpha", lambda: alpha_variance(ch, M, y)),
                     ("theta", lambda: theta_variance(ch, M))):
        try:
            value = format_number(fn())
        except NonPositiveVariance as exc:
            log.warning("%s is degenerate (%s)", name, exc)
            value = "nan"
        lines.append(f"{name},{value},,,")
    _write_text(args.out, lines)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gmimo", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate-mse", help="normalized MSE vs SIR or T")
    s.add_argument("--sweep", choices=("sir", "t"), required=True)
    s.add_argument("--values", required=True, help="start:step:stop or comma list")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate_mse)

    s = sub.add_parser("simulate-hist", help="histogram of the normalized G-estimator error")
    s.add_argument("--config", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--trials", type=int)
    s.add_argument("--workers", type=int)
    s.set_defaults(func=cmd_simulate_hist)

    s = sub.add_parser("generate", help="write a channel set (and observations) to disk")
    s.add_argument("--config", required=True)
    s.add_argument("--channels", required=True)
    s.add_argument("--obs")
    s.set_defaults(func=cmd_generate)

    s = sub.add_parser("estimate", help="estimate mutual information from files")
    s.add_argument("--channels", required=True)
    s.add_argument("--obs", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--bits", action="store_true", help="report bits instead of nats")
    s.set_defaults(func=cmd_estimate)

    s = sub.add_parser("detequiv", help="deterministic equivalents for a channel set")
    s.add_argument("--channels", required=True)
    s.add_argument("--y", type=float, default=1.0)
    s.add_argument("--M", type=int)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_detequiv)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERICAL
    except (ValueError, KeyError, TypeError, OSError, json.JSONDecodeError) as exc:
        log.error("invalid input: %s", exc)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
