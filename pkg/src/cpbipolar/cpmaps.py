"""Completely positive maps M_m -> M_n stored as Choi matrices.

Conventions, fixed across the package:

* ``choi = sum_ij E_ij (x) Phi(E_ij)`` with the input factor M_m first, so
  ``choi.reshape(m, n, m, n)[i, a, j, b] == Phi(E_ij)[a, b]``.
* Kraus form ``Phi(x) = sum_t V_t x V_t^*`` with ``V_t`` of shape ``(n, m)``.
* C*-coefficients act on the output side: ``Psi(x) = sum_i a_i^* Phi_i(x) a_i``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import linalg as la
from .errors import (
    InconsistentOracle,
    InvalidCoefficients,
    InvalidInput,
    NotCompletelyPositive,
)

PSD_TOL = 1e-9
COEFF_TOL = 1e-10
KRAUS_DROP_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class CPMap:
    """A linear map M_m -> M_n represented by its (mn x mn) Choi matrix.

    Construction only checks shape and Hermiticity. Complete positivity is a
    property (:meth:`is_cp`), because the transpose map and differences of CP
    maps are also useful to represent.
    """

    m: int
    n: int
    choi: np.ndarray

    def __post_init__(self):
        choi = la.as_matrix(self.choi, "choi")
        d = self.m * self.n
        if self.m < 1 or self.n < 1 or choi.shape != (d, d):
            raise InvalidInput(f"choi shape {choi.shape} does not match m={self.m}, n={self.n}")
        object.__setattr__(self, "choi", la.check_hermitian(choi, "choi"))

    def is_cp(self, tol: float = PSD_TOL) -> bool:
        return la.lambda_min(self.choi) >= -tol * (1.0 + la.fro(self.choi))

    def __call__(self, x) -> np.ndarray:
        return apply(self, x)

    def __add__(self, other: "CPMap") -> "CPMap":
        _same_dims([self, other])
        return CPMap(self.m, self.n, self.choi + other.choi)

    def __mul__(self, alpha: float) -> "CPMap":
        return CPMap(self.m, self.n, alpha * self.choi)

    __rmul__ = __mul__


@dataclass(frozen=True)
class CStarCoefficients:
    """Terms ``(a_i, map_index_i)`` with ``sum_i a_i^* a_i = I_n``."""

    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        terms = tuple((la.as_matrix(a, "coefficient"), int(j)) for a, j in self.terms)
        if not terms:
            raise InvalidCoefficients("a C*-combination needs at least one term")
        n = terms[0][0].shape[0]
        for a, _ in terms:
            if a.shape != (n, n):
                raise InvalidCoefficients(f"coefficient of shape {a.shape}, expected {(n, n)}")
        object.__setattr__(self, "terms", terms)
        resid = self.normalization_residual()
        if resid > COEFF_TOL:
            raise InvalidCoefficients(f"||sum a_i^* a_i - I||_F = {resid:.3e} exceeds {COEFF_TOL}")

    @property
    def n(self) -> int:
        return self.terms[0][0].shape[0]

    def normalization_residual(self) -> float:
        total = sum(la.adjoint(a) @ a for a, _ in self.terms)
        return la.fro(total - np.eye(self.n))

    @classmethod
    def from_isometry(cls, iso: np.ndarray, map_indices: Sequence[int]) -> "CStarCoefficients":
        """Split the rows of an ``(r*n) x n`` isometry into ``r`` blocks ``a_i``."""
        n = iso.shape[1]
        blocks = [iso[i * n:(i + 1) * n, :] for i in range(iso.shape[0] // n)]
        if len(blocks) != len(map_indices):
            raise InvalidInput("one map index per coefficient block is required")
        return cls(tuple(zip(blocks, map_indices)))


def _same_dims(maps: Sequence[CPMap]) -> tuple[int, int]:
    if not maps:
        raise InvalidInput("empty map family")
    m, n = maps[0].m, maps[0].n
    for phi in maps:
        if (phi.m, phi.n) != (m, n):
            raise InvalidInput(f"mixed dimensions {(phi.m, phi.n)} vs {(m, n)}")
    return m, n


def choi_from_kraus(ops: Sequence[np.ndarray], m: int, n: int) -> CPMap:
    choi = np.zeros((m * n, m * n), dtype=np.complex128)
    for v in ops:
        v = la.as_matrix(v, "Kraus operator")
        if v.shape != (n, m):
            raise InvalidInput(f"Kraus operator of shape {v.shape}, expected {(n, m)}")
        # column (i, a) of the Choi vector is V[a, i]
        vec = v.T.reshape(-1)
        choi += np.outer(vec, vec.conj())
    return CPMap(m, n, choi)


def kraus_from_choi(phi: CPMap) -> list[np.ndarray]:
    """Kraus operators from the eigendecomposition of the Choi matrix."""
    if not phi.is_cp():
        raise NotCompletelyPositive(
            f"Choi matrix has lambda_min = {la.lambda_min(phi.choi):.3e}")
    w, v = la.eig_hermitian(phi.choi)
    ops = []
    for lam, vec in zip(w[::-1], v.T[::-1]):
        if lam <= KRAUS_DROP_TOL:
            continue
        ops.append(np.sqrt(lam) * vec.reshape(phi.m, phi.n).T)
    return ops


def apply(phi: CPMap, x) -> np.ndarray:
    """Phi(x) = Tr_1[(x^T (x) I_n) choi]."""
    x = la.as_matrix(x, "x")
    if x.shape != (phi.m, phi.m):
        raise InvalidInput(f"input of shape {x.shape}, expected {(phi.m, phi.m)}")
    c = phi.choi.reshape(phi.m, phi.n, phi.m, phi.n)
    return np.einsum("ij,iajb->ab", x, c)


def ampliate_apply(phi: CPMap, k: int, s) -> np.ndarray:
    """(id_k (x) Phi)(s) for s given as a k x k block matrix of m x m blocks."""
    s = la.as_matrix(s, "s")
    m, n = phi.m, phi.n
    if k < 1 or s.shape != (k * m, k * m):
        raise InvalidInput(f"test element of shape {s.shape}, expected {(k * m, k * m)}")
    c = phi.choi.reshape(m, n, m, n)
    out = np.einsum("piqj,iajb->paqb", s.reshape(k, m, k, m), c)
    return out.reshape(k * n, k * n)


def cstar_combine(maps: Sequence[CPMap], coeffs: CStarCoefficients) -> CPMap:
    """The C*-convex combination sum_i a_i^* Phi_{j(i)}(.) a_i."""
    m, n = _same_dims(maps)
    if coeffs.n != n:
        raise InvalidCoefficients(f"coefficients act on C^{coeffs.n}, maps output M_{n}")
    choi = np.zeros((m * n, m * n), dtype=np.complex128)
    eye_m = np.eye(m)
    for a, j in coeffs.terms:
        if not 0 <= j < len(maps):
            raise InvalidInput(f"map index {j} out of range")
        w = np.kron(eye_m, a)
        choi += la.adjoint(w) @ maps[j].choi @ w
    return CPMap(m, n, choi)


def identity_map(d: int) -> CPMap:
    return choi_from_kraus([np.eye(d)], d, d)


def depolarizing(n: int) -> CPMap:
    """x -> Tr(x) I_n / n on M_n."""
    return CPMap(n, n, np.eye(n * n) / n)


def transpose_map(d: int) -> CPMap:
    """x -> x^T; positive but not completely positive for d >= 2 (Choi = SWAP)."""
    choi = sum(np.kron(la.matrix_unit(i, j, d), la.matrix_unit(j, i, d))
               for i in range(d) for j in range(d))
    return CPMap(d, d, choi)


def point_map(x) -> CPMap:
    """The map C -> M_n, 1 -> x; its Choi matrix is x itself."""
    x = la.as_matrix(x, "x")
    return CPMap(1, x.shape[0], x)


def random_kraus(m: int, n: int, kraus_rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    return [la.random_complex((n, m), rng) for _ in range(kraus_rank)]


def random_cp(m: int, n: int, kraus_rank: int, option: str = "none",
              seed: int | np.random.Generator | None = None) -> CPMap:
    """A random CP map with i.i.d. complex Gaussian Kraus operators.

    ``option="unital"`` rescales so that sum V V^* = I_n, ``"trace_preserving"``
    so that sum V^* V = I_m.
    """
    if kraus_rank < 1:
        raise InvalidInput("kraus_rank must be at least 1")
    if option not in ("none", "unital", "trace_preserving"):
        raise InvalidInput(f"unknown option {option!r}")
    if option == "unital" and kraus_rank * m < n:
        raise InvalidInput("a unital map M_m -> M_n needs kraus_rank * m >= n")
    if option == "trace_preserving" and kraus_rank * n < m:
        raise InvalidInput("a trace-preserving map M_m -> M_n needs kraus_rank * n >= m")
    rng = np.random.default_rng(seed)
    ops = random_kraus(m, n, kraus_rank, rng)
    if option == "unital":
        corr = la.psd_sqrt(sum(v @ la.adjoint(v) for v in ops), inverse=True)
        ops = [corr @ v for v in ops]
    elif option == "trace_preserving":
        corr = la.psd_sqrt(sum(la.adjoint(v) @ v for v in ops), inverse=True)
        ops = [v @ corr for v in ops]
    return choi_from_kraus(ops, m, n)


def tomography_states(m: int, n: int) -> list[np.ndarray]:
    """Density matrices spanning M_{mn}: diagonal units plus the x- and y-type
    pure states on every pair of basis vectors."""
    d = m * n
    states = [la.matrix_unit(i, i, d) for i in range(d)]
    for i in range(d):
        for j in range(i + 1, d):
            for phase in (1.0, 1j):
                v = np.zeros(d, dtype=np.complex128)
                v[i] = 1.0
                v[j] = phase
                states.append(np.outer(v, v.conj()) / 2.0)
    return states


def choi_tomography(pairing_oracle: Callable, m: int, n: int,
                    checks: int = 3, tol: float = 1e-9) -> CPMap:
    """Reconstruct a map from its pairings with canonical Choi tests.

    ``pairing_oracle`` receives a :class:`~cpbipolar.mtests.MatrixTest` and
    returns a complex number. Each canonical test with state rho returns
    Tr(rho C), which fixes every entry of C by linearity. A few extra mixed
    states are queried afterwards and must agree with the reconstruction.
    """
    from .mtests import canonical_choi_test

    d = m * n
    states = tomography_states(m, n)
    values = [complex(pairing_oracle(canonical_choi_test(rho, m, n))) for rho in states]
    c = np.zeros((d, d), dtype=np.complex128)
    for i in range(d):
        c[i, i] = values[i]
    pos = d
    for i in range(d):
        for j in range(i + 1, d):
            vx, vy = values[pos], values[pos + 1]
            pos += 2
            base = c[i, i] + c[j, j]
            # Tr(rho_x C) = (base + C_ij + C_ji)/2, Tr(rho_y C) = (base + i C_ij - i C_ji)/2
            plus = 2.0 * vx - base
            minus = -1j * (2.0 * vy - base)
            c[i, j] = 0.5 * (plus + minus)
            c[j, i] = 0.5 * (plus - minus)

    scale = 1.0 + la.fro(c)
    if la.fro(c - la.adjoint(c)) > tol * scale:
        raise InconsistentOracle("reconstructed Choi matrix is not Hermitian")
    rng = np.random.default_rng(0)
    for _ in range(checks):
        rho = la.random_density(d, rng)
        got = complex(pairing_oracle(canonical_choi_test(rho, m, n)))
        expected = complex(np.trace(rho @ c))
        if abs(got - expected) > tol * scale:
            raise InconsistentOracle(
                f"oracle value {got} disagrees with linear prediction {expected}")
    return CPMap(m, n, c)
