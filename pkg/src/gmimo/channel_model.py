"""Scenario construction: known channels, colored interference, observations.

Each slot ``t`` has a known ``N x n0`` channel ``H_t`` and an unknown
interference-plus-noise factor ``G_t = [B_t | sigma I_N]`` where ``B_t`` stacks
the channels of ``K`` interferers. The receiver observes only the residual
``Y_t = G_t W_t`` with ``W_t`` standard complex Gaussian.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ZeroInterference
from .matrix_core import (
    RngStream,
    as_complex_matrix,
    complex_normal,
    gram,
    read_cmat,
    write_cmat,
)

__all__ = [
    "db_to_linear",
    "ScenarioConfig",
    "ChannelSet",
    "ObservationBlock",
    "AssumptionCheck",
    "AssumptionReport",
    "scale_to_sir",
    "generate_channels",
    "sample_observations",
    "check_assumptions",
    "save_channels",
    "load_channels",
    "load_known_channels",
    "read_manifest",
    "save_observations",
    "load_observations",
]

RANK_TOL = 1e-10
CHANNEL_STREAM = 2**64 - 1


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


@dataclass(frozen=True)
class ScenarioConfig:
    N: int
    n0: int
    M: int
    T: int
    K: int
    nk: tuple[int, ...]
    sigma2: float
    sir_linear: float
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "nk", tuple(int(v) for v in self.nk))
        for name in ("N", "n0", "M", "T", "K"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.M <= self.N:
            raise ValueError(f"need M > N, got M={self.M}, N={self.N}")
        if len(self.nk) != self.K or any(v < 1 for v in self.nk):
            raise ValueError("nk must list K positive antenna counts")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        if not self.sir_linear > 0:
            raise ValueError("sir_linear must be positive")

    @property
    def n_interf(self) -> int:
        return sum(self.nk)

    @property
    def n(self) -> int:
        return self.n_interf + self.N

    @classmethod
    def from_db(cls, *, N, n0, M, T, K, nk=None, snr_db, sir_db, seed=0) -> "ScenarioConfig":
        """Build a scenario from SNR/SIR in dB; the noise variance is ``1/SNR``."""
        nk = tuple(nk) if nk is not None else (1,) * K
        return cls(N=N, n0=n0, M=M, T=T, K=K, nk=nk,
                   sigma2=1.0 / db_to_linear(snr_db), sir_linear=db_to_linear(sir_db), seed=seed)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ChannelSet:
    """Ground truth for ``T`` slots, stacked along axis 0.

    ``H`` has shape ``(T, N, n0)`` and ``G`` shape ``(T, N, n)``. ``B``,
    ``sigma2`` and ``sir_linear`` are known only when the set came from
    :func:`generate_channels` (or a manifest that records them).
    """

    H: np.ndarray
    G: np.ndarray
    B: np.ndarray | None = None
    sigma2: float | None = None
    sir_linear: float | None = None
    HH: np.ndarray = field(init=False, repr=False)
    GG: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        H = np.asarray(self.H, dtype=np.complex128)
        G = np.asarray(self.G, dtype=np.complex128)
        if H.ndim != 3 or G.ndim != 3 or H.shape[0] != G.shape[0] or H.shape[1] != G.shape[1]:
            raise ValueError(f"incompatible channel stacks {H.shape} and {G.shape}")
        if not (np.all(np.isfinite(H)) and np.all(np.isfinite(G))):
            raise ValueError("channels have non-finite entries")
        object.__setattr__(self, "H", _freeze(H))
        object.__setattr__(self, "G", _freeze(G))
        if self.B is not None:
            object.__setattr__(self, "B", _freeze(np.asarray(self.B, dtype=np.complex128)))
        object.__setattr__(self, "HH", _freeze(np.stack([gram(h) for h in H])))
        object.__setattr__(self, "GG", _freeze(np.stack([gram(g) for g in G])))

    @classmethod
    def from_matrices(cls, H: Sequence, G: Sequence, **kwargs) -> "ChannelSet":
        H = np.stack([as_complex_matrix(h) for h in H])
        G = np.stack([as_complex_matrix(g) for g in G])
        return cls(H=H, G=G, **kwargs)

    @property
    def T(self) -> int:
        return self.H.shape[0]

    @property
    def N(self) -> int:
        return self.H.shape[1]

    @property
    def n0(self) -> int:
        return self.H.shape[2]

    @property
    def n(self) -> int:
        return self.G.shape[2]


@dataclass(frozen=True)
class ObservationBlock:
    """Observed residuals ``Y`` with shape ``(T, N, M)``."""

    Y: np.ndarray

    def __post_init__(self) -> None:
        Y = np.asarray(self.Y, dtype=np.complex128)
        if Y.ndim != 3:
            raise ValueError(f"observations must be a (T, N, M) stack, got {Y.shape}")
        object.__setattr__(self, "Y", _freeze(Y))

    @classmethod
    def from_matrices(cls, Y: Sequence) -> "ObservationBlock":
        return cls(np.stack([as_complex_matrix(y) for y in Y]))

    @property
    def T(self) -> int:
        return self.Y.shape[0]

    @property
    def N(self) -> int:
        return self.Y.shape[1]

    @property
    def M(self) -> int:
        return self.Y.shape[2]

    def sample_covariances(self) -> np.ndarray:
        """Stack of ``(1/M) Y_t Y_t^H``, exactly Hermitian."""
        S = self.Y @ self.Y.conj().swapaxes(-1, -2) / self.M
        return 0.5 * (S + S.conj().swapaxes(-1, -2))


def scale_to_sir(H, B, alpha: float) -> np.ndarray:
    """Rescale ``B`` so that ``tr(H H^H) / tr(B B^H) == alpha``."""
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    H = as_complex_matrix(H)
    B = as_complex_matrix(B)
    p_h = float(np.vdot(H, H).real)
    p_b = float(np.vdot(B, B).real)
    if p_b == 0.0:
        raise ZeroInterference("interference matrix is identically zero")
    return B * math.sqrt(p_h / (alpha * p_b))


def generate_channels(cfg: ScenarioConfig, rng=None) -> ChannelSet:
    """Draw Gaussian ``H_t`` and ``B_t`` slot by slot and assemble ``G_t``.

    Slots are drawn sequentially from one stream, so a scenario with more slots
    extends (rather than replaces) the channels of a shorter one.
    """
    if rng is None:
        rng = RngStream(cfg.seed, CHANNEL_STREAM)
    sigma = math.sqrt(cfg.sigma2)
    noise = sigma * np.eye(cfg.N, dtype=np.complex128)
    Hs, Bs, Gs = [], [], []
    for _ in range(cfg.T):
        H = complex_normal(rng, (cfg.N, cfg.n0))
        B = scale_to_sir(H, complex_normal(rng, (cfg.N, cfg.n_interf)), cfg.sir_linear)
        Hs.append(H)
        Bs.append(B)
        Gs.append(np.hstack([B, noise]))
    return ChannelSet(H=np.stack(Hs), G=np.stack(Gs), B=np.stack(Bs),
                      sigma2=cfg.sigma2, sir_linear=cfg.sir_linear)


def sample_observations(ch: ChannelSet, M: int, rng) -> ObservationBlock:
    """Draw fresh ``W_t`` (shape ``n x M``) for every slot and return ``Y_t = G_t W_t``."""
    if M < 1:
        raise ValueError("M must be positive")
    W = complex_normal(rng, (ch.T, ch.n, M))
    return ObservationBlock(ch.G @ W)


# Assumption checks ---------------------------------------------------------


@dataclass(frozen=True)
class AssumptionCheck:
    name: str
    passed: bool
    value: object


@dataclass(frozen=True)
class AssumptionReport:
    checks: tuple[AssumptionCheck, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __getitem__(self, name: str) -> AssumptionCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)


def check_assumptions(ch: ChannelSet, M: int) -> AssumptionReport:
    """Measure the model assumptions on a concrete channel set.

    The rank check reports ``p_t`` and whether ``0 < p_t < N`` holds; it is
    informational only and a full-rank ``H_t`` (``p_t == N``) still passes.
    """
    N = ch.N
    norm_g = [float(np.linalg.norm(g, 2)) for g in ch.G]
    norm_h = [float(np.linalg.norm(h, 2)) for h in ch.H]
    lam_min = [float(np.linalg.eigvalsh(gg)[0]) for gg in ch.GG]
    ranks = []
    for hh in ch.HH:
        w = np.linalg.eigvalsh(hh)
        ranks.append(int(np.sum(w > RANK_TOL * w[-1])) if w[-1] > 0 else 0)
    checks = [AssumptionCheck("M>N", M > N, (M, N)),
              AssumptionCheck("norm_G", bool(np.all(np.isfinite(norm_g))), norm_g),
              AssumptionCheck("norm_H", bool(np.all(np.isfinite(norm_h))), norm_h)]
    if ch.sigma2 is not None:
        floor = ch.sigma2 * (1.0 - 1e-10)
        checks.append(AssumptionCheck("lambda_min_GG>=sigma2", min(lam_min) >= floor, lam_min))
    else:
        checks.append(AssumptionCheck("lambda_min_GG>0", min(lam_min) > 0, lam_min))
    strict = all(0 < p < N for p in ranks)
    checks.append(AssumptionCheck("rank_H", all(p > 0 for p in ranks),
                                  {"p": ranks, "strict_margin": strict}))
    return AssumptionReport(tuple(checks))


# Directory import/export ----------------------------------------------------


def save_channels(ch: ChannelSet, directory, M: int | None = None) -> None:
    """Write ``H_t.cmat``/``G_t.cmat`` files and a JSON manifest (``M`` is optional)."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t in range(ch.T):
        write_cmat(d / f"H_{t + 1}.cmat", ch.H[t])
        write_cmat(d / f"G_{t + 1}.cmat", ch.G[t])
    manifest = {"kind": "channels", "T": ch.T, "N": ch.N, "n0": ch.n0, "n": ch.n,
                "sigma2": ch.sigma2, "sir_linear": ch.sir_linear}
    if M is not None:
        manifest["M"] = int(M)
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def read_manifest(directory) -> dict:
    path = Path(directory) / "manifest.json"
    if not path.exists():
        raise ValueError(f"{directory}: missing manifest.json")
    return json.loads(path.read_text(encoding="utf-8"))


def load_known_channels(directory) -> np.ndarray:
    """Read only the ``H_t`` files, the part of a channel set the receiver knows."""
    d = Path(directory)
    m = read_manifest(d)
    H = np.stack([read_cmat(d / f"H_{t + 1}.cmat") for t in range(int(m["T"]))])
    if H.shape[1:] != (m["N"], m["n0"]):
        raise ValueError(f"{directory}: H files disagree with manifest dimensions")
    return H


def load_channels(directory) -> ChannelSet:
    d = Path(directory)
    m = read_manifest(d)
    H = load_known_channels(d)
    G = np.stack([read_cmat(d / f"G_{t + 1}.cmat") for t in range(int(m["T"]))])
    return ChannelSet(H=H, G=G, sigma2=m.get("sigma2"), sir_linear=m.get("sir_linear"))


def save_observations(obs: ObservationBlock, directory) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for t in range(obs.T):
        write_cmat(d / f"Y_{t + 1}.cmat", obs.Y[t])
    manifest = {"kind": "observations", "T": obs.T, "N": obs.N, "M": obs.M}
    (d / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def load_observations(directory) -> ObservationBlock:
    d = Path(directory)
    m = read_manifest(d)
    obs = ObservationBlock(np.stack([read_cmat(d / f"Y_{t + 1}.cmat") for t in range(int(m["T"]))]))
    if (obs.N, obs.M) != (m["N"], m["M"]):
        raise ValueError(f"{directory}: Y files disagree with manifest dimensions")
    return obs
