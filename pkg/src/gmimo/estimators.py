"""Mutual-information estimators built from observable data only.

Everything here except :func:`ground_truth_mi` reads nothing but the known
channels ``H_t`` and the observations ``Y_t``. Results are in nats per
receive antenna.

Two evaluation paths are provided. The per-call functions (``se_estimate``,
``solve_y_hat``, ``g_estimate``) follow the matrix formulas directly with
Cholesky solves. The ``*_batch`` functions serve the Monte Carlo harness: they
reduce each slot to the generalized eigenvalues ``mu`` of ``HH`` relative to
``S`` (``logdet(y HH + S) = logdet S + sum log(1 + y mu)``), after which the
fixed point and both estimators are cheap vectorized scalar arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel_model import ChannelSet, ObservationBlock
from .errors import NoConvergence, NotPositiveDefinite
from .matrix_core import generalized_eigvalsh, gram, hermitian, logdet_hpd, solve_hpd

__all__ = [
    "SolverInfo",
    "EstimateReport",
    "ground_truth_per_slot",
    "ground_truth_mi",
    "se_estimate",
    "noise_logdet_estimate",
    "y_hat_residual",
    "solve_y_hat",
    "g_estimate",
    "solve_y_hat_batch",
    "estimate_batch",
]

Y_TOL = 1e-12
Y_MAXITER = 200


def _check_dims(N: int, M: int) -> None:
    if M <= N:
        raise ValueError(f"need M > N for a bias-corrected estimate, got M={M}, N={N}")


def _known_grams(H) -> list[np.ndarray]:
    if isinstance(H, ChannelSet):
        return list(H.HH)
    return [gram(h) for h in H]


@dataclass(frozen=True)
class SolverInfo:
    iterations: int
    residual: float


@dataclass(frozen=True)
class EstimateReport:
    yhat: np.ndarray
    i_se_t: np.ndarray
    i_g_t: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray

    @property
    def i_se(self) -> float:
        return float(np.mean(self.i_se_t))

    @property
    def i_g(self) -> float:
        return float(np.mean(self.i_g_t))

    @property
    def T(self) -> int:
        return len(self.yhat)


def ground_truth_per_slot(ch: ChannelSet) -> np.ndarray:
    N = ch.N
    return np.array([(logdet_hpd(hh + gg) - logdet_hpd(gg)) / N for hh, gg in zip(ch.HH, ch.GG)])


def ground_truth_mi(ch: ChannelSet) -> float:
    """Average per-antenna mutual information of the true channel set."""
    return float(np.mean(ground_truth_per_slot(ch)))


def se_estimate(H: Sequence, obs: ObservationBlock, y: float = 1.0) -> float:
    """Plug-in estimator with the sample covariance in place of ``G G^H``.

    ``y`` scales the known channel term; ``y = 1`` is the standard estimator.
    """
    if not y > 0:
        raise ValueError("y must be positive")
    if obs.M < obs.N:
        raise NotPositiveDefinite(f"sample covariance is singular with M={obs.M} < N={obs.N}")
    HH = _known_grams(H)
    if len(HH) != obs.T:
        raise ValueError("number of channels and observation slots differ")
    vals = []
    for hh, s in zip(HH, obs.sample_covariances()):
        vals.append(logdet_hpd(y * hh + s) - logdet_hpd(s))
    return float(np.mean(vals)) / obs.N


def noise_logdet_estimate(Y, N: int, M: int) -> float:
    """Consistent estimate of ``(1/N) logdet(G G^H)`` from one slot of observations."""
    _check_dims(N, M)
    Y = np.asarray(Y, dtype=np.complex128)
    if Y.shape != (N, M):
        raise ValueError(f"expected Y of shape {(N, M)}, got {Y.shape}")
    S = gram(Y) / M
    return logdet_hpd(S) / N + (M - N) / N * np.log((M - N) / M) + 1.0


def y_hat_residual(y: float, HH, S, M: int) -> tuple[float, float]:
    """Return ``h(y)`` and ``h'(y)`` for the observable fixed point.

    ``h(y) = (y/M) tr(HH Q(y)) + (M-N)/M - y`` with ``Q(y) = (y HH + S)^{-1}``.
    """
    N = S.shape[0]
    X = solve_hpd(y * HH + S, HH)          # Q(y) HH
    t1 = np.trace(X).real
    t2 = np.einsum("ij,ji->", X, X).real   # tr(HH Q HH Q)
    h = y * t1 / M + (M - N) / M - y
    dh = t1 / M - y * t2 / M - 1.0
    return float(h), float(dh)


def solve_y_hat(HH, S, N: int, M: int, tol: float = Y_TOL,
                maxiter: int = Y_MAXITER) -> tuple[float, SolverInfo]:
    """Root of ``h`` on ``[(M-N)/M, 1 + (M-N)/M]``.

    ``h`` is concave with ``h >= 0`` at the left end and ``h < 0`` at the right,
    so Newton started from the right end descends monotonically onto the root.
    Bisection on the maintained bracket takes over whenever a Newton step
    leaves it.
    """
    _check_dims(N, M)
    HH = hermitian(HH)
    S = hermitian(S)
    lo = (M - N) / M
    h, _ = y_hat_residual(lo, HH, S, M)
    if abs(h) <= tol:
        return lo, SolverInfo(0, abs(h))
    a, b = lo, 1.0 + lo
    y = b
    for it in range(1, maxiter + 1):
        h, dh = y_hat_residual(y, HH, S, M)
        if abs(h) <= tol:
            return y, SolverInfo(it, abs(h))
        if h > 0:
            a = y
        else:
            b = y
        step = y - h / dh if dh != 0 else np.nan
        y = step if a < step < b else 0.5 * (a + b)
    raise NoConvergence(f"y-hat solver did not reach |h| <= {tol:g} in {maxiter} iterations",
                        iterations=maxiter, residual=abs(h))


def g_estimate(H: Sequence, obs: ObservationBlock) -> EstimateReport:
    """Consistent estimator of the average mutual information.

    Solves one fixed point ``yhat_t`` per slot and combines the scaled log-det
    with the closed-form bias correction. Also reports the plug-in estimate for
    the same data.
    """
    N, M = obs.N, obs.M
    _check_dims(N, M)
    HH = _known_grams(H)
    if len(HH) != obs.T:
        raise ValueError("number of channels and observation slots differ")
    c = (M - N) / N
    yhat, i_se, i_g, iters, res = [], [], [], [], []
    for hh, s in zip(HH, obs.sample_covariances()):
        y, info = solve_y_hat(hh, s, N, M)
        ld_s = logdet_hpd(s)
        i_se.append((logdet_hpd(hh + s) - ld_s) / N)
        i_g.append((logdet_hpd(y * hh + s) - ld_s) / N
                   + c * (np.log(M / (M - N) * y) + 1.0) - M / N * y)
        yhat.append(y)
        iters.append(info.iterations)
        res.append(info.residual)
    return EstimateReport(yhat=np.array(yhat), i_se_t=np.array(i_se), i_g_t=np.array(i_g),
                          iterations=np.array(iters, dtype=int), residuals=np.array(res))


# Vectorized path ------------------------------------------------------------


def solve_y_hat_batch(mu, N: int, M: int, tol: float = Y_TOL,
                      maxiter: int = Y_MAXITER) -> tuple[np.ndarray, np.ndarray]:
    """Elementwise ``solve_y_hat`` given generalized spectra ``mu`` of shape ``(..., N)``."""
    _check_dims(N, M)
    mu = np.asarray(mu, dtype=np.float64)
    lo = (M - N) / M
    shape = mu.shape[:-1]

    def h_dh(y):
        d = 1.0 + y[..., None] * mu
        h = y * (mu / d).sum(-1) / M + lo - y
        dh = (mu / (d * d)).sum(-1) / M - 1.0
        return h, dh

    y = np.full(shape, lo)
    h, _ = h_dh(y)
    done = np.abs(h) <= tol
    iters = np.zeros(shape, dtype=np.int64)
    a = np.full(shape, lo)
    b = np.full(shape, 1.0 + lo)
    y = np.where(done, lo, b)
    for _ in range(maxiter):
        if done.all():
            return y, iters
        h, dh = h_dh(y)
        iters += ~done
        conv = np.abs(h) <= tol
        done = done | conv
        live = ~done
        a = np.where(live & (h > 0), y, a)
        b = np.where(live & (h <= 0), y, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = y - h / dh
        ok = (step > a) & (step < b)
        y = np.where(live, np.where(ok, step, 0.5 * (a + b)), y)
    if not done.all():
        raise NoConvergence(f"batched y-hat solver did not converge in {maxiter} iterations",
                            iterations=maxiter)
    return y, iters


def estimate_batch(HH, S, N: int, M: int) -> dict[str, np.ndarray]:
    """Both estimators for a stack of sample covariances.

    ``S`` has shape ``(..., T, N, N)`` and ``HH`` shape ``(T, N, N)``. Returns
    per-realization aggregates ``i_se`` and ``i_g`` (averaged over the slot
    axis) and the per-slot ``yhat`` and iteration counts.
    """
    _check_dims(N, M)
    mu, _ = generalized_eigvalsh(HH, S)
    yhat, iters = solve_y_hat_batch(mu, N, M)
    c = (M - N) / N
    i_se_t = np.log1p(mu).sum(-1) / N
    i_g_t = (np.log1p(yhat[..., None] * mu).sum(-1) / N
             + c * (np.log(M / (M - N) * yhat) + 1.0) - M / N * yhat)
    return {"i_se": i_se_t.mean(-1), "i_g": i_g_t.mean(-1), "yhat": yhat, "iterations": iters}
