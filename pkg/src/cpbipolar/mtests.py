"""Matrix tests (k, f, s), the evaluation pairing, folding and realification.

A state f on M_k(M_n) is stored as its density matrix ``rho`` with
f(X) = Tr(rho X); ``s`` is a k x k block matrix with m x m blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import linalg as la
from .cpmaps import CPMap, CStarCoefficients, ampliate_apply
from .errors import InvalidCoefficients, InvalidInput

STATE_TOL = 1e-10
GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class MatrixTest:
    k: int
    rho: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        rho = la.as_matrix(self.rho, "rho")
        s = la.as_matrix(self.s, "s")
        k = int(self.k)
        if k < 1:
            raise InvalidInput("test level k must be positive")
        if rho.shape[0] != rho.shape[1] or rho.shape[0] % k:
            raise InvalidInput(f"rho of shape {rho.shape} is not a k x k block matrix (k={k})")
        if s.shape[0] != s.shape[1] or s.shape[0] % k:
            raise InvalidInput(f"s of shape {s.shape} is not a k x k block matrix (k={k})")
        rho = check_state(rho)
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "s", s)

    @property
    def m(self) -> int:
        return self.s.shape[0] // self.k

    @property
    def n(self) -> int:
        return self.rho.shape[0] // self.k

    def scaled(self, factor: complex) -> "MatrixTest":
        return MatrixTest(self.k, self.rho, factor * self.s)


@dataclass(frozen=True)
class FoldResult:
    """A folded test and the scale R with sum_j c_j <t_j, Phi> = R <test, Phi>."""

    test: MatrixTest
    scale: float


def check_state(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Validate a density matrix (Hermitian, PSD, unit trace) and return it symmetrized."""
    try:
        rho = la.check_hermitian(rho, "rho")
    except InvalidInput as exc:
        raise InvalidInput(f"not a state: {exc}") from None
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise InvalidInput(f"not a state: Tr(rho) = {tr!r}")
    if la.lambda_min(rho) < -tol:
        raise InvalidInput(f"not a state: lambda_min(rho) = {la.lambda_min(rho):.3e}")
    return rho


def _check_compatible(t: MatrixTest, phi: CPMap) -> None:
    if (t.m, t.n) != (phi.m, phi.n):
        raise InvalidInput(f"test for maps M_{t.m} -> M_{t.n} paired with M_{phi.m} -> M_{phi.n}")


def pairing(t: MatrixTest, phi: CPMap) -> complex:
    """<(k, f, s), Phi> = f(Phi_k(s)) = Tr(rho (id_k (x) Phi)(s))."""
    _check_compatible(t, phi)
    out = ampliate_apply(phi, t.k, t.s)
    return complex(np.sum(t.rho.T * out))


def _embed_states(tests: Sequence[MatrixTest], weights) -> np.ndarray:
    blocks = [w * t.rho for w, t in zip(weights, tests)]
    return la.block_diag(blocks)


def _common_dims(tests: Sequence[MatrixTest]) -> tuple[int, int]:
    if not tests:
        raise InvalidInput("at least one test is required")
    dims = {(t.m, t.n) for t in tests}
    if len(dims) != 1:
        raise InvalidInput(f"tests with mixed (m, n): {sorted(dims)}")
    return dims.pop()


def fold_max(tests: Sequence[MatrixTest]) -> FoldResult:
    """Block-diagonal test S = diag(s_j) with the averaged compressed state."""
    _common_dims(tests)
    big_k = sum(t.k for t in tests)
    weights = [1.0 / len(tests)] * len(tests)
    folded = MatrixTest(big_k, _embed_states(tests, weights), la.block_diag([t.s for t in tests]))
    return FoldResult(folded, 1.0)


def fold_linear(tests: Sequence[MatrixTest], coeffs: Sequence[complex]) -> FoldResult:
    """Absorb sum_j c_j <t_j, .> into a single test: phases go into S, moduli into F."""
    if len(tests) != len(coeffs):
        raise InvalidInput("one coefficient per test is required")
    kept = [(t, complex(c)) for t, c in zip(tests, coeffs) if c != 0]
    if not kept:
        raise InvalidInput("all coefficients are zero")
    tests = [t for t, _ in kept]
    _common_dims(tests)
    radii = np.array([abs(c) for _, c in kept])
    phases = [c / abs(c) for _, c in kept]
    total = float(radii.sum())
    s = la.block_diag([ph * t.s for ph, t in zip(phases, tests)])
    rho = _embed_states(tests, radii / total)
    return FoldResult(MatrixTest(sum(t.k for t in tests), rho, s), total)


def realify(t: MatrixTest, theta: float) -> MatrixTest:
    """The 2k-level Hermitian test whose pairing is Re(e^{-i theta} <t, Phi>)."""
    z = t.s.shape[0]
    s_tilde = np.zeros((2 * z, 2 * z), dtype=np.complex128)
    s_tilde[:z, z:] = np.exp(-1j * theta) * t.s
    s_tilde[z:, :z] = np.exp(1j * theta) * la.adjoint(t.s)
    omega = np.full((2, 2), 0.5, dtype=np.complex128)
    return MatrixTest(2 * t.k, np.kron(omega, t.rho), s_tilde)


def golden_max(f, lo: float, hi: float, tol: float = 1e-9, max_iter: int = 200):
    """Golden-section search for the maximum of a unimodal ``f`` on [lo, hi]."""
    a, b = lo, hi
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2 = f(x2)
    return (x1, f1) if f1 >= f2 else (x2, f2)


def theta_grid(size: int) -> np.ndarray:
    return 2.0 * np.pi * np.arange(size) / size


def abs_via_sup(t: MatrixTest, phi: CPMap, grid_size: int = 1024,
                refine: bool = False, tol: float = 1e-9) -> float:
    """max over a uniform phase grid of the realified pairings, optionally
    refined by golden-section search around the best grid phase."""
    if grid_size < 4:
        raise InvalidInput("grid_size must be at least 4")

    def value(theta):
        return pairing(realify(t, theta), phi).real

    grid = theta_grid(grid_size)
    vals = [value(th) for th in grid]
    best = int(np.argmax(vals))
    if not refine:
        return float(vals[best])
    h = 2.0 * np.pi / grid_size
    _, refined = golden_max(value, grid[best] - h, grid[best] + h, tol=tol)
    return float(max(refined, vals[best]))


def scalar_target_reduce(t: MatrixTest) -> np.ndarray:
    """s_rho = sum_ij rho_ji s_ij for a test against functionals (n = 1)."""
    if t.n != 1:
        raise InvalidInput(f"scalar-target reduction needs n = 1, got n = {t.n}")
    k, m = t.k, t.m
    blocks = t.s.reshape(k, m, k, m)
    return np.einsum("ji,iajb->ab", t.rho, blocks)


def scalar_domain_pairing(t: MatrixTest, x) -> complex:
    """f(s (x) x) for a test against maps C -> M_n, 1 -> x (m = 1)."""
    if t.m != 1:
        raise InvalidInput(f"scalar-domain pairing needs m = 1, got m = {t.m}")
    x = la.as_matrix(x, "x")
    if x.shape != (t.n, t.n):
        raise InvalidInput(f"x of shape {x.shape}, expected {(t.n, t.n)}")
    return complex(np.trace(t.rho @ np.kron(t.s, x)))


def normalized_trace(x) -> complex:
    return complex(np.trace(x)) / x.shape[0]


def tracial_decompose(b, coeffs: CStarCoefficients) -> list[tuple[np.ndarray, float]]:
    """Split a tracial density ``b`` along a C*-coefficient family.

    Returns pairs (b_i, c_i) with b_i = (I_k (x) a_i) b (I_k (x) a_i^*) and
    c_i its normalized trace, so that sum_i c_i = 1.
    """
    b = la.check_hermitian(b, "b")
    n = coeffs.n
    if b.shape[0] % n:
        raise InvalidInput(f"b of shape {b.shape} is not a block matrix over M_{n}")
    if abs(normalized_trace(b) - 1.0) > STATE_TOL or la.lambda_min(b) < -STATE_TOL:
        raise InvalidInput("b must be PSD with normalized trace 1")
    if coeffs.normalization_residual() > 1e-10:
        raise InvalidCoefficients("sum a_i^* a_i != I")
    eye_k = np.eye(b.shape[0] // n)
    out = []
    for a, _ in coeffs.terms:
        w = np.kron(eye_k, a)
        bi = w @ b @ la.adjoint(w)
        out.append((bi, normalized_trace(bi).real))
    return out


def canonical_choi_test(rho, m: int, n: int) -> MatrixTest:
    """Test at level m with s = sum_ij E_ij (x) E_ij; its pairing is Tr(rho C_Phi)."""
    rho = la.as_matrix(rho, "rho")
    if rho.shape != (m * n, m * n):
        raise InvalidInput(f"rho of shape {rho.shape}, expected {(m * n, m * n)}")
    omega = np.zeros(m * m, dtype=np.complex128)
    omega[:: m + 1] = 1.0
    return MatrixTest(m, rho, np.outer(omega, omega))


def random_test(k: int, m: int, n: int, rng: np.random.Generator, hermitian: bool = False) -> MatrixTest:
    """Random full-rank state and Gaussian test element (Hermitian if asked)."""
    s = la.random_complex((k * m, k * m), rng)
    if hermitian:
        s = la.hermitian_part(s)
    return MatrixTest(k, la.random_density(k * n, rng), s)
