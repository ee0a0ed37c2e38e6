"""Dense complex matrix kernel.

Matrices are plain ``numpy`` arrays of dtype ``complex128``. Tolerances are
relative to ``1 + ||.||_F`` so they behave sensibly near the zero matrix.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .errors import InvalidInput, NumericalFailure

HERMITIAN_TOL = 1e-10
JACOBI_OFF_TOL = 1e-14
JACOBI_MAX_SWEEPS = 100


class HermitianEig(NamedTuple):
    """Eigenvalues in ascending order and the unitary of eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim != 2:
        raise InvalidInput(f"{name} must be two-dimensional, got shape {m.shape}")
    return m


def fro(a: np.ndarray) -> float:
    return float(np.linalg.norm(a))


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.asarray(a)).T


def hermitian_part(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + adjoint(a))


def is_hermitian(h: np.ndarray, tol: float = HERMITIAN_TOL) -> bool:
    h = np.asarray(h)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        return False
    return fro(h - adjoint(h)) <= tol * (1.0 + fro(h))


def check_hermitian(h, name: str = "matrix") -> np.ndarray:
    """Return the symmetrized matrix ``(H + H^*)/2``; raise if H is not Hermitian."""
    h = as_matrix(h, name)
    if h.shape[0] != h.shape[1]:
        raise InvalidInput(f"{name} must be square, got shape {h.shape}")
    if not is_hermitian(h):
        raise InvalidInput(f"{name} is not Hermitian (||H - H*||_F = {fro(h - adjoint(h)):.3e})")
    return hermitian_part(h)


def jacobi_eigh(h, tol: float = JACOBI_OFF_TOL, max_sweeps: int = JACOBI_MAX_SWEEPS) -> HermitianEig:
    """Cyclic Jacobi eigensolver for a complex Hermitian matrix.

    Each (p, q) rotation first removes the phase of ``A[p, q]`` with a diagonal
    unitary and then applies the real symmetric Jacobi rotation. Sweeps stop
    once the off-diagonal Frobenius norm drops below ``tol * (1 + ||H||_F)``.
    """
    a = check_hermitian(h).copy()
    size = a.shape[0]
    v = np.eye(size, dtype=np.complex128)
    threshold = tol * (1.0 + fro(a))

    for _ in range(max_sweeps):
        off = fro(a - np.diag(np.diag(a)))
        if off <= threshold:
            break
        for p in range(size - 1):
            for q in range(p + 1, size):
                apq = a[p, q]
                r = abs(apq)
                if r == 0.0:
                    continue
                phase = apq / r
                app = a[p, p].real
                aqq = a[q, q].real
                tau = (aqq - app) / (2.0 * r)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.hypot(1.0, tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = adjoint(u) @ a[idx, :]
                v[:, idx] = v[:, idx] @ u
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
    else:
        raise NumericalFailure(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.real(np.diag(a))
    order = np.argsort(w, kind="stable")
    return HermitianEig(w[order], v[:, order])


def eig_hermitian(h, method: str = "lapack") -> HermitianEig:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending.

    ``method="lapack"`` uses ``numpy.linalg.eigh``; ``method="jacobi"`` runs the
    in-house cyclic Jacobi solver. Both symmetrize before solving.
    """
    if method == "jacobi":
        return jacobi_eigh(h)
    if method != "lapack":
        raise InvalidInput(f"unknown eigensolver {method!r}")
    hs = check_hermitian(h)
    try:
        w, v = np.linalg.eigh(hs)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return HermitianEig(w, v)


def lambda_min(h) -> float:
    return float(np.linalg.eigvalsh(check_hermitian(h))[0])


def is_psd(h, tol: float = 1e-9) -> bool:
    """True iff the smallest eigenvalue of the Hermitian ``h`` is at least ``-tol``."""
    return lambda_min(h) >= -tol


def psd_sqrt(h, inverse: bool = False) -> np.ndarray:
    """Square root (or inverse square root) of a positive definite matrix."""
    w, v = eig_hermitian(h)
    if inverse:
        if w[0] <= 0:
            raise InvalidInput("inverse square root requires a positive definite matrix")
        d = 1.0 / np.sqrt(w)
    else:
        d = np.sqrt(np.clip(w, 0.0, None))
    return (v * d) @ adjoint(v)


def kron(a, b) -> np.ndarray:
    return np.kron(as_matrix(a, "A"), as_matrix(b, "B"))


def partial_trace(m, dims: tuple[int, int], which: int) -> np.ndarray:
    """Trace out tensor factor ``which`` (0 = first, 1 = second) of ``M`` on C^d1 (x) C^d2."""
    m = as_matrix(m)
    d1, d2 = dims
    if m.shape != (d1 * d2, d1 * d2):
        raise InvalidInput(f"matrix of shape {m.shape} does not match dims {dims}")
    t = m.reshape(d1, d2, d1, d2)
    if which == 0:
        return np.einsum("iaib->ab", t)
    if which == 1:
        return np.einsum("iaja->ij", t)
    raise InvalidInput(f"factor index must be 0 or 1, got {which}")


def inner(a, b) -> complex:
    """Hilbert-Schmidt inner product Tr(A^* B)."""
    a = as_matrix(a, "A")
    b = as_matrix(b, "B")
    if a.shape != b.shape:
        raise InvalidInput(f"shape mismatch {a.shape} vs {b.shape}")
    return complex(np.vdot(a, b))


def block_diag(blocks) -> np.ndarray:
    blocks = [as_matrix(b) for b in blocks]
    rows = sum(b.shape[0] for b in blocks)
    cols = sum(b.shape[1] for b in blocks)
    out = np.zeros((rows, cols), dtype=np.complex128)
    r = c = 0
    for b in blocks:
        out[r:r + b.shape[0], c:c + b.shape[1]] = b
        r += b.shape[0]
        c += b.shape[1]
    return out


def matrix_unit(i: int, j: int, d: int) -> np.ndarray:
    e = np.zeros((d, d), dtype=np.complex128)
    e[i, j] = 1.0
    return e


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return hermitian_part(g)


def random_complex(shape, rng: np.random.Generator) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = random_complex((d, rank or d), rng)
    rho = g @ adjoint(g)
    return rho / np.trace(rho).real


def haar_isometry(rows: int, cols: int, rng: np.random.Generator) -> np.ndarray:
    """A Haar-distributed ``rows x cols`` isometry (V^* V = I), rows >= cols."""
    if rows < cols:
        raise InvalidInput("an isometry needs rows >= cols")
    q, r = np.linalg.qr(random_complex((rows, cols), rng))
    d = np.diag(r)
    return q * (d / np.abs(d))
