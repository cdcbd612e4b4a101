"""Monte Carlo harness: MSE sweeps, CLT histogram and CSV output.

Trials are independent: trial ``i`` draws all of its randomness from
``RngStream(master_seed, i)``. Trials are processed in fixed-size chunks in
trial order, and a worker pool only changes which process evaluates a chunk,
so results are bit-identical for any worker count.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy.special import ndtr

from .channel_model import (
    CHANNEL_STREAM,
    ChannelSet,
    ScenarioConfig,
    db_to_linear,
    generate_channels,
)
from .deterministic_equivalents import theta_variance
from .errors import NonPositiveVariance
from .estimators import estimate_batch, ground_truth_mi
from .matrix_core import RngStream, complex_normal, generalized_eigvalsh

__all__ = [
    "Sweep",
    "HistogramSpec",
    "ExperimentConfig",
    "TrialResults",
    "MseCurvePoint",
    "HistogramResult",
    "config_from_dict",
    "load_config",
    "run_trials",
    "run_mse_sweep",
    "build_histogram",
    "run_histogram",
    "ks_statistic",
    "format_number",
    "emit_csv",
    "read_csv_rows",
]

TRIAL_CHUNK = 250


@dataclass(frozen=True)
class Sweep:
    kind: str                      # "sir_db" or "t"
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        if self.kind not in ("sir_db", "t"):
            raise ValueError(f"unknown sweep kind {self.kind!r}")
        object.__setattr__(self, "values", tuple(self.values))
        if not self.values:
            raise ValueError("sweep needs at least one value")
        if self.kind == "t" and any(v < 1 or v != int(v) for v in self.values):
            raise ValueError("T sweep values must be positive integers")


@dataclass(frozen=True)
class HistogramSpec:
    bin_width: float = 0.2
    lo: float = -5.0
    hi: float = 5.0

    def __post_init__(self) -> None:
        if not self.bin_width > 0:
            raise ValueError("bin_width must be positive")
        if not self.lo < self.hi:
            raise ValueError("histogram range needs lo < hi")

    def edges(self) -> np.ndarray:
        n = int(round((self.hi - self.lo) / self.bin_width))
        return self.lo + self.bin_width * np.arange(n + 1)


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: ScenarioConfig
    trials: int
    sweep: Sweep | None = None
    histogram: HistogramSpec = field(default_factory=HistogramSpec)
    master_seed: int = 0
    parallelism: int = 1
    # Robustness mode: every trial draws its own channels.
    fresh_channels: bool = False

    def __post_init__(self) -> None:
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.parallelism < 1:
            raise ValueError("parallelism must be >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ValueError("master_seed must be a 64-bit unsigned integer")


def config_from_dict(d: dict) -> ExperimentConfig:
    """Build a config from JSON-style data; dB quantities carry a ``_db`` suffix."""
    sc = dict(d["scenario"])
    K = int(sc["K"])
    if "sigma2" in sc:
        sigma2 = float(sc["sigma2"])
    else:
        sigma2 = 1.0 / db_to_linear(float(sc["snr_db"]))
    if "sir_linear" in sc:
        sir = float(sc["sir_linear"])
    else:
        sir = db_to_linear(float(sc.get("sir_db", 0.0)))
    scenario = ScenarioConfig(N=int(sc["N"]), n0=int(sc["n0"]), M=int(sc["M"]), T=int(sc["T"]),
                              K=K, nk=tuple(sc.get("nk", (1,) * K)), sigma2=sigma2,
                              sir_linear=sir, seed=int(sc.get("seed", d.get("master_seed", 0))))
    sweep = None
    if d.get("sweep"):
        sw = d["sweep"]
        sweep = Sweep(kind=sw["kind"], values=tuple(float(v) for v in sw["values"]))
    hist = HistogramSpec()
    if d.get("histogram"):
        h = d["histogram"]
        lo, hi = h.get("range", (hist.lo, hist.hi))
        hist = HistogramSpec(bin_width=float(h.get("bin_width", hist.bin_width)),
                             lo=float(lo), hi=float(hi))
    return ExperimentConfig(scenario=scenario, trials=int(d["trials"]), sweep=sweep,
                            histogram=hist, master_seed=int(d.get("master_seed", 0)),
                            parallelism=int(d.get("parallelism", 1)),
                            fresh_channels=bool(d.get("fresh_channels", False)))


def load_config(path) -> ExperimentConfig:
    return config_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


# Trial engine ---------------------------------------------------------------


@dataclass(frozen=True)
class TrialResults:
    """Per-trial estimator outputs, indexed by trial number."""

    i_se: np.ndarray
    i_g: np.ndarray
    yhat: np.ndarray               # shape (P, T)
    i_true: np.ndarray | None = None   # per-trial truth, fresh-channel mode only
    theta: np.ndarray | None = None

    @property
    def P(self) -> int:
        return len(self.i_g)


def _covariances(G, W, M):
    Y = G @ W
    S = Y @ Y.conj().swapaxes(-1, -2) / M
    return 0.5 * (S + S.conj().swapaxes(-1, -2))


def _fixed_chunk(G, HH, M, master_seed, start, stop):
    T, N, n = G.shape
    W = np.stack([complex_normal(RngStream(master_seed, i), (T, n, M)) for i in range(start, stop)])
    out = estimate_batch(HH, _covariances(G, W, M), N, M)
    return out["i_se"], out["i_g"], out["yhat"], None, None


def _fresh_chunk(scenario, M, master_seed, start, stop):
    rows = []
    for i in range(start, stop):
        rng = RngStream(master_seed, i)
        ch = generate_channels(scenario, rng)
        W = complex_normal(rng, (ch.T, ch.n, M))
        out = estimate_batch(ch.HH, _covariances(ch.G, W, M), ch.N, M)
        lam, _ = generalized_eigvalsh(ch.HH, ch.GG)
        i_true = float(np.mean(np.log1p(lam).sum(-1) / ch.N))
        try:
            th = theta_variance(ch, M)
        except NonPositiveVariance:
            th = math.nan
        rows.append((out["i_se"], out["i_g"], out["yhat"], i_true, th))
    return (np.array([r[0] for r in rows]), np.array([r[1] for r in rows]),
            np.stack([r[2] for r in rows]), np.array([r[3] for r in rows]),
            np.array([r[4] for r in rows]))


def _run_chunk(job):
    kind, args = job
    return (_fixed_chunk if kind == "fixed" else _fresh_chunk)(*args)


def _chunks(trials: int) -> list[tuple[int, int]]:
    return [(s, min(s + TRIAL_CHUNK, trials)) for s in range(0, trials, TRIAL_CHUNK)]


def _execute(jobs: list, parallelism: int) -> list:
    if parallelism <= 1 or len(jobs) == 1:
        return [_run_chunk(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=parallelism) as pool:
        return list(pool.map(_run_chunk, jobs))


def _collect(parts) -> TrialResults:
    i_se = np.concatenate([p[0] for p in parts])
    i_g = np.concatenate([p[1] for p in parts])
    yhat = np.concatenate([p[2] for p in parts])
    if parts[0][3] is None:
        return TrialResults(i_se=i_se, i_g=i_g, yhat=yhat)
    return TrialResults(i_se=i_se, i_g=i_g, yhat=yhat,
                        i_true=np.concatenate([p[3] for p in parts]),
                        theta=np.concatenate([p[4] for p in parts]))


def run_trials(ch: ChannelSet, M: int, trials: int, master_seed: int = 0,
               parallelism: int = 1) -> TrialResults:
    """Draw ``trials`` observation blocks on fixed channels and estimate each."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    G = np.asarray(ch.G)
    HH = np.asarray(ch.HH)
    jobs = [("fixed", (G, HH, M, master_seed, s, e)) for s, e in _chunks(trials)]
    return _collect(_execute(jobs, parallelism))


def run_fresh_trials(scenario: ScenarioConfig, trials: int, master_seed: int = 0,
                     parallelism: int = 1) -> TrialResults:
    jobs = [("fresh", (scenario, scenario.M, master_seed, s, e)) for s, e in _chunks(trials)]
    return _collect(_execute(jobs, parallelism))


# MSE sweeps -------------------------------------------------------------


@dataclass(frozen=True)
class MseCurvePoint:
    sweep_value: float
    i_true: float
    theta: float
    mse_th_db: float
    mse_g_emp_db: float
    mse_t_emp_db: float
    degenerate: bool = False


def _db(x: float) -> float:
    return 10.0 * math.log10(x) if x > 0 else math.nan


def _point_scenario(cfg: ExperimentConfig, value: float) -> ScenarioConfig:
    if cfg.sweep is None or cfg.sweep.kind == "sir_db":
        sir = db_to_linear(value) if cfg.sweep is not None else cfg.scenario.sir_linear
        return replace(cfg.scenario, sir_linear=sir)
    return replace(cfg.scenario, T=int(value))


def _mse_point(cfg: ExperimentConfig, value: float) -> MseCurvePoint:
    scenario = _point_scenario(cfg, value)
    N, M = scenario.N, scenario.M
    if cfg.fresh_channels:
        scenario = replace(scenario, seed=cfg.master_seed)
        res = run_fresh_trials(scenario, cfg.trials, cfg.master_seed, cfg.parallelism)
        I = res.i_true
        mse_g = float(np.mean(N**2 * (res.i_g - I) ** 2 / I**2))
        mse_t = float(np.mean(N**2 * (res.i_se - I) ** 2 / I**2))
        theta = float(np.mean(res.theta))
        degenerate = not np.all(res.theta > 0)
        mse_th = float(np.mean(res.theta / I**2)) if not degenerate else math.nan
        return MseCurvePoint(value, float(np.mean(I)), theta, _db(mse_th), _db(mse_g),
                             _db(mse_t), degenerate)
    ch = generate_channels(scenario, RngStream(cfg.master_seed, CHANNEL_STREAM))
    I = ground_truth_mi(ch)
    try:
        theta = theta_variance(ch, M)
        degenerate = False
    except NonPositiveVariance as exc:
        theta, degenerate = float(exc.value), True
    res = run_trials(ch, M, cfg.trials, cfg.master_seed, cfg.parallelism)
    with np.errstate(divide="ignore", invalid="ignore"):
        mse_g = float(np.mean(N**2 * (res.i_g - I) ** 2)) / I**2 if I > 0 else math.nan
        mse_t = float(np.mean(N**2 * (res.i_se - I) ** 2)) / I**2 if I > 0 else math.nan
    mse_th = theta / I**2 if (I > 0 and not degenerate) else math.nan
    return MseCurvePoint(value, I, theta, _db(mse_th), _db(mse_g), _db(mse_t), degenerate)


def run_mse_sweep(cfg: ExperimentConfig) -> list[MseCurvePoint]:
    """Theoretical and empirical normalized MSE at each sweep value.

    Channels are drawn once per sweep point from the master seed and held
    fixed across the trials; without a sweep a single point at the
    scenario's own SIR is returned.
    """
    values = cfg.sweep.values if cfg.sweep is not None else (10.0 * math.log10(cfg.scenario.sir_linear),)
    return [_mse_point(cfg, v) for v in values]


# Histogram / CLT ---------------------------------------------------------


@dataclass(frozen=True)
class HistogramResult:
    bin_edges: np.ndarray
    density: np.ndarray
    ks_statistic: float
    sample_count: int
    coverage_95: float = math.nan     # fraction of |z| <= 1.96

    @property
    def bin_width(self) -> np.ndarray:
        return np.diff(self.bin_edges)


def ks_statistic(samples: Iterable[float]) -> float:
    """Kolmogorov-Smirnov distance between the sample and the standard normal."""
    x = np.sort(np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples,
                           dtype=np.float64))
    n = x.size
    if n == 0:
        raise ValueError("ks_statistic needs at least one sample")
    cdf = ndtr(x)
    i = np.arange(1, n + 1)
    d_plus = np.max(i / n - cdf)
    d_minus = np.max(cdf - (i - 1) / n)
    return float(max(d_plus, d_minus))


def build_histogram(z, spec: HistogramSpec) -> HistogramResult:
    """Density histogram of ``z`` on the configured grid plus KS distance to N(0, 1)."""
    z = np.asarray(z, dtype=np.float64)
    if z.size == 0:
        raise ValueError("histogram needs at least one sample")
    edges = spec.edges()
    counts, _ = np.histogram(z, bins=edges)
    total = counts.sum()
    if total == 0:
        raise ValueError("no samples fall inside the histogram range")
    density = counts / (total * np.diff(edges))
    return HistogramResult(bin_edges=edges, density=density, ks_statistic=ks_statistic(z),
                           sample_count=int(z.size),
                           coverage_95=float(np.mean(np.abs(z) <= 1.96)))


def run_histogram(cfg: ExperimentConfig) -> HistogramResult:
    """Histogram of ``(N / sqrt(theta)) (I_G - I)`` over fixed channels.

    Raises ``DegenerateVariance`` (or ``NonPositiveVariance``) when theta is
    not positive.
    """
    sc = cfg.scenario
    ch = generate_channels(sc, RngStream(cfg.master_seed, CHANNEL_STREAM))
    theta = theta_variance(ch, sc.M)
    I = ground_truth_mi(ch)
    res = run_trials(ch, sc.M, cfg.trials, cfg.master_seed, cfg.parallelism)
    z = sc.N / math.sqrt(theta) * (res.i_g - I)
    return build_histogram(z, cfg.histogram)


# CSV -------------------------------------------------------------------------


CURVE_HEADER = ("sweep", "i_true", "theta", "mse_th_db", "mse_g_db", "mse_se_db")
HIST_HEADER = ("bin_lo", "bin_hi", "density")


def format_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return f"{float(x):.17g}"


def _write_rows(path, header: Sequence[str], rows: Iterable[Sequence], footer: str | None = None):
    lines = [",".join(header)]
    lines.extend(",".join(format_number(v) for v in row) for row in rows)
    if footer is not None:
        lines.append(footer)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def emit_csv(results, path) -> None:
    """Write an MSE curve (list of points) or a histogram as CSV."""
    if isinstance(results, HistogramResult):
        e = results.bin_edges
        rows = [(e[k], e[k + 1], results.density[k]) for k in range(len(results.density))]
        footer = f"# ks={format_number(results.ks_statistic)} n={results.sample_count}"
        _write_rows(path, HIST_HEADER, rows, footer)
        return
    points = list(results)
    if not all(isinstance(p, MseCurvePoint) for p in points):
        raise TypeError("emit_csv expects a HistogramResult or a list of MseCurvePoint")
    rows = [(p.sweep_value, p.i_true, p.theta, p.mse_th_db, p.mse_g_emp_db, p.mse_t_emp_db)
            for p in points]
    _write_rows(path, CURVE_HEADER, rows)


def read_csv_rows(path) -> tuple[list[str], list[list[float]], list[str]]:
    """Parse a CSV written by this module: header, float rows, comment lines."""
    header, rows, comments = [], [], []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.reader(fh):
            if not rec:
                continue
            if rec[0].startswith("#"):
                comments.append(",".join(rec))
            elif not header:
                header = rec
            else:
                rows.append([float(v) if v != "" else math.nan for v in rec])
    return header, rows, comments
