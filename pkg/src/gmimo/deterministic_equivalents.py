"""Deterministic equivalents and asymptotic variances.

These quantities depend on the unobservable ``G_t G_t^H`` and serve as the
theoretical reference for the estimators: the plug-in bias ``V(y)``, the
oracle tuning value ``y*`` and the CLT variances ``alpha_N(y)`` and
``theta_N``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .channel_model import ChannelSet
from .errors import DegenerateVariance, NoConvergence, NonPositiveVariance
from .matrix_core import generalized_eigvalsh, hermitian, logdet_hpd, solve_hpd

__all__ = [
    "SlotEquivalents",
    "kappa_map",
    "solve_kappa",
    "kappa_fixed_point",
    "v_slot",
    "se_bias_value",
    "y_star_closed_form",
    "y_star_by_iteration",
    "alpha_slot",
    "alpha_variance",
    "alpha_variance_per_slot",
    "theta_slot",
    "theta_variance",
    "slot_equivalents",
]

KAPPA_TOL = 1e-12
KAPPA_MAXITER = 200
# Relative floor below which a variance is treated as zero.
VARIANCE_FLOOR = 1e-10


def kappa_map(x: float, HH, GG, y: float, M: int) -> float:
    """``(1/M) tr(GG (GG/(1+x) + y HH)^{-1})``."""
    X = solve_hpd(GG / (1.0 + x) + y * HH, GG)
    return float(np.trace(X).real) / M


def solve_kappa(HH, GG, y: float, M: int, tol: float = KAPPA_TOL,
                maxiter: int = KAPPA_MAXITER) -> float:
    """Unique nonnegative root of ``f(x) = x - kappa_map(x)``.

    ``f`` is strictly increasing with ``f(0) < 0`` and ``f(N/(M-N)) >= 0``, so
    plain bisection on that bracket is guaranteed to converge.
    """
    HH = hermitian(HH)
    GG = hermitian(GG)
    N = GG.shape[0]
    if M <= N:
        raise ValueError(f"need M > N, got M={M}, N={N}")
    if y < 0:
        raise ValueError("y must be nonnegative")
    lo, hi = 0.0, N / (M - N)
    f_hi = hi - kappa_map(hi, HH, GG, y, M)
    if abs(f_hi) <= tol:
        return hi
    f_mid = f_hi
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        f_mid = mid - kappa_map(mid, HH, GG, y, M)
        if abs(f_mid) <= tol:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    raise NoConvergence(f"kappa bisection did not reach |f| <= {tol:g}",
                        iterations=maxiter, residual=abs(f_mid))


def kappa_fixed_point(HH, GG, y: float, M: int, tol: float = 1e-13,
                      maxiter: int = 100_000) -> float:
    """Naive iteration ``x <- kappa_map(x)`` from 0. Cross-check only; may be slow."""
    x = 0.0
    for _ in range(maxiter):
        nxt = kappa_map(x, HH, GG, y, M)
        if abs(nxt - x) <= tol:
            return nxt
        x = nxt
    raise NoConvergence("kappa fixed-point iteration did not converge", iterations=maxiter)


def v_slot(HH, GG, y: float, M: int, kappa: float | None = None) -> float:
    """Deterministic equivalent of ``logdet(y HH + (1/M) Y Y^H)`` for one slot."""
    if kappa is None:
        kappa = solve_kappa(HH, GG, y, M)
    return (logdet_hpd(y * np.asarray(HH) + np.asarray(GG) / (1.0 + kappa))
            + M * math.log1p(kappa) - M * kappa / (1.0 + kappa))


def se_bias_value(ch: ChannelSet, M: int, y: float = 1.0) -> float:
    """Deterministic equivalent of the plug-in estimate at scaling ``y``.

    Its difference from the true mutual information is the asymptotic bias of
    the plug-in estimator.
    """
    if not y > 0:
        raise ValueError("y must be positive")
    N, T = ch.N, ch.T
    first, second = [], []
    for hh, gg in zip(ch.HH, ch.GG):
        k = solve_kappa(hh, gg, y, M)
        first.append(logdet_hpd(y * hh + gg / (1.0 + k)) - logdet_hpd(gg))
        second.append(M / N * math.log1p(k) - M / N * k / (1.0 + k))
    return (sum(first) / (N * T) + sum(second) / T
            + (M - N) / N * math.log((M - N) / M) + 1.0)


def y_star_closed_form(HH, GG, M: int) -> float:
    """Oracle tuning value ``1 - (1/M) tr(GG (HH + GG)^{-1})``."""
    HH = np.asarray(HH, dtype=np.complex128)
    GG = np.asarray(GG, dtype=np.complex128)
    X = solve_hpd(HH + GG, GG)
    return 1.0 - float(np.trace(X).real) / M


def y_star_by_iteration(HH, GG, M: int, tol: float = 1e-14, maxiter: int = 100_000) -> float:
    """Solve ``y = 1/(1 + kappa(y))`` by iteration from ``(M-N)/M``."""
    N = np.asarray(GG).shape[0]
    y = (M - N) / M
    for _ in range(maxiter):
        nxt = 1.0 / (1.0 + solve_kappa(HH, GG, y, M))
        if abs(nxt - y) <= tol:
            return nxt
        y = nxt
    raise NoConvergence("y* iteration did not converge", iterations=maxiter)


def _relative_eigs(HH, GG) -> np.ndarray:
    # eigenvalues of HH GG^{-1}
    mu, _ = generalized_eigvalsh(HH, GG)
    return mu


def alpha_slot(HH, GG, y: float, M: int) -> float:
    """Per-slot variance term ``log M^2 - log[(M-N)(M(k+1)^2 - tr(X^{-2}))]``.

    ``X = I/(k+1) + y HH GG^{-1}``; its inverse-square trace is taken from the
    eigenvalues of the Hermitian-similar form.
    """
    N = np.asarray(GG).shape[0]
    k1 = 1.0 + solve_kappa(HH, GG, y, M)
    lam = _relative_eigs(HH, GG)
    tr_inv2 = float(np.sum(1.0 / (1.0 / k1 + y * lam) ** 2))
    return 2.0 * math.log(M) - math.log((M - N) * (M * k1 * k1 - tr_inv2))


def theta_slot(HH, GG, M: int) -> float:
    """Per-slot variance term ``2 log(M y*) - log[(M-N)(M - tr((I + HH GG^{-1})^{-2}))]``."""
    N = np.asarray(GG).shape[0]
    ys = y_star_closed_form(HH, GG, M)
    lam = _relative_eigs(HH, GG)
    tr_inv2 = float(np.sum(1.0 / (1.0 + lam) ** 2))
    return 2.0 * math.log(M * ys) - math.log((M - N) * (M - tr_inv2))


def _aggregate(terms: Sequence[float], M: int, name: str) -> float:
    T = len(terms)
    total = math.fsum(terms)
    value = total / T**2
    floor = VARIANCE_FLOOR * 2.0 * math.log(M) / T
    if value <= floor:
        cls = DegenerateVariance if value >= -floor else NonPositiveVariance
        raise cls(f"{name} = {value:.6g} is not positive", value=value)
    return value


def alpha_variance(ch: ChannelSet, M: int, y: float = 1.0) -> float:
    """Asymptotic variance of ``N (I_SE(y) - V(y))`` with one ``y`` shared by all slots."""
    if not y > 0:
        raise ValueError("y must be positive")
    return _aggregate([alpha_slot(hh, gg, y, M) for hh, gg in zip(ch.HH, ch.GG)], M, "alpha")


def alpha_variance_per_slot(ch: ChannelSet, M: int, ys: Sequence[float]) -> float:
    """Same aggregate as :func:`alpha_variance` but with slot-specific ``y_t``."""
    if len(ys) != ch.T:
        raise ValueError("need one y per slot")
    return _aggregate([alpha_slot(hh, gg, y, M) for hh, gg, y in zip(ch.HH, ch.GG, ys)],
                      M, "alpha")


def theta_variance(ch: ChannelSet, M: int) -> float:
    """Asymptotic variance of ``N (I_G - I)``.

    Raises ``DegenerateVariance`` when it vanishes to round-off (e.g. all
    ``H_t = 0``) and ``NonPositiveVariance`` when it is clearly negative.
    """
    return _aggregate([theta_slot(hh, gg, M) for hh, gg in zip(ch.HH, ch.GG)], M, "theta")


@dataclass(frozen=True)
class SlotEquivalents:
    t: int
    y: float
    kappa: float
    v_t: float
    y_star: float
    alpha_t: float
    theta_t: float


def slot_equivalents(ch: ChannelSet, M: int, y: float = 1.0) -> list[SlotEquivalents]:
    out = []
    for t, (hh, gg) in enumerate(zip(ch.HH, ch.GG), start=1):
        k = solve_kappa(hh, gg, y, M)
        out.append(SlotEquivalents(
            t=t, y=y, kappa=k, v_t=v_slot(hh, gg, y, M, kappa=k),
            y_star=y_star_closed_form(hh, gg, M),
            alpha_t=alpha_slot(hh, gg, y, M), theta_t=theta_slot(hh, gg, M)))
    return out
