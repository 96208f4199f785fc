"""Dense linear algebra, a portable seeded generator and finite-difference checks.

Matrices are plain 2-D ``numpy`` float arrays.  The eigensolver is a cyclic
Jacobi method written out explicitly so the pseudo-inverse used for
population recovery does not hinge on LAPACK behaviour; metro graphs have at
most a few hundred vertices, which keeps the O(n^3) sweep cost negligible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "EigenDecomposition",
    "NumericalError",
    "Rng",
    "as_matrix",
    "eig_symmetric",
    "fd_gradient",
    "matmul",
    "pseudo_inverse",
]

_MASK64 = (1 << 64) - 1


class NumericalError(ArithmeticError):
    """Raised when a computation produces non-finite values or cannot converge."""


def as_matrix(a) -> np.ndarray:
    m = np.array(a, dtype=float)
    if m.ndim == 1:
        m = m.reshape(1, -1)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("matrix has non-finite entries")
    return m


def matmul(a, b) -> np.ndarray:
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(f"dimension mismatch: {a.shape} x {b.shape}")
    return a @ b


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in ascending order; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    sweeps: int

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.T


def _check_symmetric(s: np.ndarray, tol: float = 1e-10) -> None:
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"matrix is not square: {s.shape}")
    scale = max(1.0, float(np.max(np.abs(s)))) if s.size else 1.0
    if s.size and float(np.max(np.abs(s - s.T))) > tol * scale:
        raise ValueError("matrix is not symmetric")


def eig_symmetric(s, tol: float = 1e-12, max_sweeps: int = 100) -> EigenDecomposition:
    """Cyclic Jacobi eigendecomposition of a real symmetric matrix.

    Sweeps over all (p, q) pairs in row order, annihilating each off-diagonal
    entry with one plane rotation, until the off-diagonal Frobenius norm drops
    below ``tol * max(1, ||S||_F)`` or ``max_sweeps`` sweeps have run.
    """
    a = as_matrix(s).copy()
    _check_symmetric(a)
    n = a.shape[0]
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    threshold = tol * max(1.0, float(np.linalg.norm(a)))

    def off_norm() -> float:
        off = a - np.diag(np.diag(a))
        return float(np.linalg.norm(off))

    sweeps = 0
    while off_norm() >= threshold:
        if sweeps == max_sweeps:
            raise NumericalError(
                f"Jacobi did not converge in {max_sweeps} sweeps (off-norm {off_norm():.3e})"
            )
        sweeps += 1
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                sn = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq

    w = np.diag(a).copy()
    order = np.argsort(w, kind="stable")
    return EigenDecomposition(eigenvalues=w[order], eigenvectors=v[:, order], sweeps=sweeps)


def pseudo_inverse(s, rcond: float = 1e-10) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a symmetric matrix via its eigendecomposition.

    Eigenvalues with ``|lambda| <= rcond * max|lambda|`` are treated as zero.
    """
    dec = eig_symmetric(s)
    w = dec.eigenvalues
    if w.size == 0:
        return np.zeros((0, 0))
    cutoff = rcond * float(np.max(np.abs(w)))
    keep = np.abs(w) > cutoff
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    v = dec.eigenvectors
    out = (v * inv) @ v.T
    return 0.5 * (out + out.T)


def fd_gradient(f: Callable[[np.ndarray], float], at, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix."""
    if h <= 0:
        raise ValueError("step h must be positive")
    x = np.array(at, dtype=float)
    grad = np.zeros_like(x)
    flat = x.reshape(-1)
    g = grad.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        fp = float(f(x))
        flat[i] = orig - h
        fm = float(f(x))
        flat[i] = orig
        if not (math.isfinite(fp) and math.isfinite(fm)):
            raise NumericalError(f"function is not finite near entry {i}")
        g[i] = (fp - fm) / (2.0 * h)
    return grad


class Rng:
    """SplitMix64 generator.

    The state advances by the golden-ratio increment ``0x9E3779B97F4A7C15`` and
    each output is the state passed through the mixing function::

        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        z =  z ^ (z >> 31)

    all modulo 2**64.  Floats take the top 53 bits, ``randbelow`` rejects the
    biased tail, normals use Box-Muller on two uniforms.  The recipe is small
    enough to reproduce in any language, so seeded splits and initialisations
    are portable.
    """

    def __init__(self, seed: int):
        self.state = int(seed) & _MASK64

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        return z ^ (z >> 31)

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def uniform(self, low: float = 0.0, high: float = 1.0) -> float:
        return low + (high - low) * self.random()

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.next_u64()
            if x < limit:
                return x % n

    def normal(self) -> float:
        u1 = 1.0 - self.random()  # (0, 1]
        u2 = self.random()
        return math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)

    def uniform_array(self, shape, low: float = 0.0, high: float = 1.0) -> np.ndarray:
        size = int(np.prod(shape))
        return np.array([self.uniform(low, high) for _ in range(size)], dtype=float).reshape(shape)

    def normal_array(self, shape) -> np.ndarray:
        size = int(np.prod(shape))
        return np.array([self.normal() for _ in range(size)], dtype=float).reshape(shape)

    def permutation(self, n: int) -> list[int]:
        """Fisher-Yates shuffle of ``range(n)``."""
        items = list(range(n))
        for i in range(n - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items
