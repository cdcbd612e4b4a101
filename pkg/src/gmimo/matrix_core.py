"""Dense complex-matrix numerics.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. The helpers here
validate shapes and finiteness, symmetrize Hermitian products, and expose the
handful of HPD kernels (Cholesky log-determinant, solves, traces) the
estimators are built from.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg as la

from .errors import NotPositiveDefinite

__all__ = [
    "RngStream",
    "as_complex_matrix",
    "hermitian",
    "gram",
    "cholesky_hpd",
    "logdet_hpd",
    "solve_hpd",
    "trace_prod",
    "extreme_eigs",
    "generalized_eigvalsh",
    "complex_normal",
    "sample_standard_complex_gaussian",
    "format_complex",
    "parse_complex",
    "write_cmat",
    "read_cmat",
]

HERMITIAN_TOL = 1e-12
PIVOT_FLOOR = 1e-300


@dataclass
class RngStream:
    """Reproducible random stream identified by ``(seed, stream_id)``.

    The underlying generator is derived from a ``SeedSequence`` whose spawn key
    is the stream id, so disjoint ids give statistically independent streams
    and the same pair always replays the same sequence. A stream advances as it
    is consumed and must not be shared between workers.
    """

    seed: int
    stream_id: int = 0
    generator: np.random.Generator = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (0 <= self.seed < 2**64 and 0 <= self.stream_id < 2**64):
            raise ValueError("seed and stream_id must be 64-bit unsigned integers")
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream_id),))
        self.generator = np.random.default_rng(seq)


def _generator(rng) -> np.random.Generator:
    if isinstance(rng, RngStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RngStream or numpy Generator, got {type(rng).__name__}")


def as_complex_matrix(A) -> np.ndarray:
    """Return ``A`` as a finite 2-D complex array, raising ``ValueError`` otherwise."""
    M = np.asarray(A, dtype=np.complex128)
    if M.ndim != 2 or M.shape[0] < 1 or M.shape[1] < 1:
        raise ValueError(f"expected a non-empty 2-D matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError("matrix has non-finite entries")
    return M


def hermitian(S, tol: float = HERMITIAN_TOL) -> np.ndarray:
    """Validate that ``S`` is Hermitian within ``tol`` and return ``(S + S^H)/2``."""
    S = as_complex_matrix(S)
    if S.shape[0] != S.shape[1]:
        raise ValueError(f"Hermitian matrix must be square, got shape {S.shape}")
    gap = np.abs(S - S.conj().T)
    if np.any(gap > tol * np.maximum(1.0, np.abs(S))):
        raise ValueError("matrix is not Hermitian within tolerance")
    return 0.5 * (S + S.conj().T)


def gram(A) -> np.ndarray:
    """Return ``A A^H``, symmetrized so it is exactly Hermitian."""
    A = as_complex_matrix(A)
    S = A @ A.conj().T
    return 0.5 * (S + S.conj().T)


def cholesky_hpd(S) -> np.ndarray:
    """Lower Cholesky factor of an HPD matrix.

    Raises ``NotPositiveDefinite`` when factorization fails or a pivot falls
    below ``PIVOT_FLOOR``.
    """
    S = np.asarray(S, dtype=np.complex128)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("Cholesky factorization failed") from exc
    d = np.diagonal(L, axis1=-2, axis2=-1).real
    if not np.all(d > PIVOT_FLOOR):
        raise NotPositiveDefinite(f"Cholesky pivot below {PIVOT_FLOOR:g}")
    return L


def logdet_hpd(S) -> float:
    """Natural log-determinant of an HPD matrix, ``2 sum(log diag(L))``."""
    L = cholesky_hpd(S)
    return float(2.0 * np.sum(np.log(np.diagonal(L).real)))


def solve_hpd(S, B) -> np.ndarray:
    """Solve ``S X = B`` for HPD ``S`` by Cholesky; ``B`` may be a vector or matrix."""
    S = np.asarray(S, dtype=np.complex128)
    B = np.asarray(B, dtype=np.complex128)
    if B.shape[0] != S.shape[0]:
        raise ValueError(f"dimension mismatch: S is {S.shape}, B has {B.shape[0]} rows")
    L = cholesky_hpd(S)
    return la.cho_solve((L, True), B, check_finite=False)


def trace_prod(A, B) -> complex:
    """``tr(A B)`` without forming the product."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[0] or A.shape[0] != B.shape[1]:
        raise ValueError(f"trace_prod dimension mismatch: {A.shape} vs {B.shape}")
    return complex(np.einsum("ik,ki->", A, B))


def extreme_eigs(S) -> tuple[float, float]:
    """Smallest and largest eigenvalue of a Hermitian matrix."""
    w = np.linalg.eigvalsh(hermitian(S))
    return float(w[0]), float(w[-1])


def generalized_eigvalsh(A, S) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues of ``L^{-1} A L^{-H}`` where ``S = L L^H``, plus ``logdet S``.

    For Hermitian PSD ``A`` these are the eigenvalues of ``A S^{-1}`` (a matrix
    similar to a Hermitian one), clipped at zero. Works on stacks: ``S`` has
    shape ``(..., N, N)`` and ``A`` broadcasts against it.
    """
    S = np.asarray(S, dtype=np.complex128)
    A = np.broadcast_to(np.asarray(A, dtype=np.complex128), S.shape)
    L = cholesky_hpd(S)
    C = np.linalg.solve(L, A)
    D = np.linalg.solve(L, C.conj().swapaxes(-1, -2))
    D = 0.5 * (D + D.conj().swapaxes(-1, -2))
    mu = np.clip(np.linalg.eigvalsh(D), 0.0, None)
    logdet_s = 2.0 * np.sum(np.log(np.diagonal(L, axis1=-2, axis2=-1).real), axis=-1)
    return mu, logdet_s


def complex_normal(rng, shape) -> np.ndarray:
    """Array of i.i.d. standard complex Gaussians (real and imaginary parts ~ N(0, 1/2))."""
    g = _generator(rng)
    shape = tuple(shape)
    z = g.standard_normal(shape + (2,))
    return (z[..., 0] + 1j * z[..., 1]) * math.sqrt(0.5)


def sample_standard_complex_gaussian(rows: int, cols: int, rng) -> np.ndarray:
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    return complex_normal(rng, (rows, cols))


# Matrix interchange format --------------------------------------------------


def format_complex(z: complex) -> str:
    """Render ``z`` as ``re{+|-}im i`` with 17 significant digits."""
    re, im = float(z.real), float(z.imag)
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{re:.17g}{sign}{abs(im):.17g}i"


def parse_complex(token: str) -> complex:
    token = token.strip()
    if not token.endswith("i"):
        raise ValueError(f"malformed complex field {token!r}")
    try:
        return complex(token[:-1] + "j")
    except ValueError as exc:
        raise ValueError(f"malformed complex field {token!r}") from exc


def write_cmat(path, A) -> None:
    A = as_complex_matrix(A)
    rows, cols = A.shape
    lines = [f"{rows} {cols} complex"]
    lines.extend(" ".join(format_complex(z) for z in row) for row in A)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_cmat(path) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").splitlines()
    if not text:
        raise ValueError(f"{path}: empty matrix file")
    header = text[0].split()
    if len(header) != 3 or header[2] != "complex":
        raise ValueError(f"{path}: bad header {text[0]!r}")
    rows, cols = int(header[0]), int(header[1])
    body = [line for line in text[1:] if line.strip()]
    if len(body) != rows:
        raise ValueError(f"{path}: expected {rows} rows, found {len(body)}")
    out = np.empty((rows, cols), dtype=np.complex128)
    for i, line in enumerate(body):
        fields = line.split(" ")
        if len(fields) != cols:
            raise ValueError(f"{path}: row {i + 1} has {len(fields)} fields, expected {cols}")
        out[i] = [parse_complex(f) for f in fields]
    return as_complex_matrix(out)
