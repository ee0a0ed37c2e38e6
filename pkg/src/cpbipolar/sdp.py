"""Small dense SDP facility for saturated-polar suprema.

The primal problem over coefficient Choi matrices C_j (n^2 x n^2) is

    maximize   sum_j <H_j, C_j>
    subject to C_j >= 0,  sum_j Tr_1(C_j) = I_n,

and its dual is ``minimize Tr(Y) s.t. I_n (x) Y >= H_j`` for all j. The dual
has only n^2 real unknowns, so it is solved with a log-barrier Newton method.
Both ends of the returned bracket are checked after the solve: the dual
matrix is shifted until it is feasible, and the barrier's primal estimate is
congruence-normalized onto the affine constraint.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .errors import InvalidInput

log = logging.getLogger(__name__)

GAP_TOL = 1e-6
BARRIER_GAP = 1e-10
BARRIER_REDUCTION = 0.1
MAX_OUTER = 200
MAX_NEWTON = 100
MNP_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class PolarSdpInstance:
    n: int
    objectives: tuple

    def __post_init__(self):
        objs = tuple(la.check_hermitian(h, "objective") for h in self.objectives)
        if not objs:
            raise InvalidInput("at least one objective is required")
        d = self.n * self.n
        for h in objs:
            if h.shape != (d, d):
                raise InvalidInput(f"objective of shape {h.shape}, expected {(d, d)}")
        object.__setattr__(self, "objectives", objs)

    @property
    def size(self) -> int:
        return len(self.objectives)

    def objective(self, chois: Sequence[np.ndarray]) -> float:
        return float(sum(la.inner(h, c).real for h, c in zip(self.objectives, chois)))


@dataclass(eq=False)
class ValueBracket:
    lower: float
    upper: float
    primal_witness: list = field(default_factory=list)
    dual_witness: np.ndarray | None = None
    status: str = "OK"

    @property
    def gap(self) -> float:
        return self.upper - self.lower


def hermitian_basis(n: int) -> np.ndarray:
    """Orthonormal real basis of the n x n Hermitian matrices, shape (n^2, n, n)."""
    basis = []
    for i in range(n):
        basis.append(la.matrix_unit(i, i, n))
    r = 1.0 / np.sqrt(2.0)
    for i in range(n):
        for j in range(i + 1, n):
            e = la.matrix_unit(i, j, n)
            basis.append(r * (e + e.T))
            basis.append(r * 1j * (e - e.T))
    return np.array(basis)


def dual_residual(inst: PolarSdpInstance, y: np.ndarray) -> float:
    """min_j lambda_min(I (x) Y - H_j); nonnegative iff Y is dual feasible."""
    lift = np.kron(np.eye(inst.n), y)
    return min(la.lambda_min(lift - h) for h in inst.objectives)


def primal_residual(inst: PolarSdpInstance, chois: Sequence[np.ndarray]) -> float:
    n = inst.n
    total = sum(la.partial_trace(c, (n, n), 0) for c in chois)
    return la.fro(total - np.eye(n))


def normalize_primal(n: int, chois: Sequence[np.ndarray]) -> list[np.ndarray]:
    """Congruence C_j -> (I (x) T^{-1/2}) C_j (I (x) T^{-1/2}) with T = sum Tr_1 C_j."""
    total = sum(la.partial_trace(c, (n, n), 0) for c in chois)
    corr = np.kron(np.eye(n), la.psd_sqrt(total, inverse=True))
    return [la.hermitian_part(corr @ c @ corr) for c in chois]


def _max_step(zinv: np.ndarray, dz: np.ndarray) -> float:
    """Largest alpha <= 1 keeping Z_j - alpha dZ_j inside the PSD cone, with a 0.99 margin."""
    lam = np.linalg.eigvals(zinv @ dz).real.max()
    return 1.0 if lam <= 0 else min(1.0, 0.99 / lam)


def _barrier_solve(inst: PolarSdpInstance):
    n = inst.n
    hs = np.array(inst.objectives)
    n_obj = len(hs)
    basis = hermitian_basis(n)
    lifts = np.array([np.kron(np.eye(n), b) for b in basis])
    trace_b = np.real(np.einsum("aii->a", basis))

    scale = max(1.0, max(np.abs(np.linalg.eigvalsh(h)).max() for h in hs))
    y_mat = (max(np.linalg.eigvalsh(h)[-1] for h in hs) + 1.0) * np.eye(n)
    y = np.real(np.einsum("aij,ji->a", basis, y_mat))

    def build(yv):
        return np.einsum("a,aij->ij", yv, lifts)

    def barrier(yv, t):
        try:
            chol = np.linalg.cholesky(build(yv)[None] - hs)
        except np.linalg.LinAlgError:
            return np.inf
        logdiag = np.log(np.real(np.diagonal(chol, axis1=1, axis2=2)))
        return t * float(trace_b @ yv) - 2.0 * float(logdiag.sum())

    t = 1.0 / scale
    converged = False
    outer = 0
    for outer in range(MAX_OUTER):
        for _ in range(MAX_NEWTON):
            zinv = np.linalg.inv(build(y)[None] - hs)
            mz = zinv[:, None] @ lifts[None]
            grad = t * trace_b - np.real(np.einsum("jaii->a", mz))
            hess = np.real(np.einsum("jaik,jbki->ab", mz, mz))
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -np.linalg.lstsq(hess, grad, rcond=None)[0]
            dec = -float(grad @ step)
            if dec <= 1e-12:
                break
            alpha = _max_step(zinv, -build(step)[None])
            if dec > 0.1:
                # damped phase; inside the quadratic region the full step is safe
                f0 = barrier(y, t)
                while alpha > 1e-14:
                    if barrier(y + alpha * step, t) <= f0 - 0.25 * alpha * dec:
                        break
                    alpha *= 0.5
                else:
                    break
            y = y + alpha * step
            if dec <= 1e-10:
                break
        if n_obj * n * n / t <= BARRIER_GAP * (1.0 + abs(float(trace_b @ y))):
            converged = True
            break
        t /= BARRIER_REDUCTION

    lift = build(y)
    chois = list(np.linalg.inv(lift[None] - hs) / t)
    y_mat = np.einsum("a,aij->ij", y, basis)
    return la.hermitian_part(y_mat), [la.hermitian_part(c) for c in chois], converged, outer


def solve_polar_sdp(inst: PolarSdpInstance, gap_tol: float = GAP_TOL,
                    fallback_samples: int = 500, seed: int = 0) -> ValueBracket:
    """Certified bracket [lower, upper] for the saturated-polar SDP."""
    n = inst.n
    y, chois, converged, _ = _barrier_solve(inst)

    shift = -dual_residual(inst, y)
    if shift > 0:
        y = y + shift * np.eye(n)
    upper = float(np.trace(y).real)

    chois = normalize_primal(n, chois)
    lower = inst.objective(chois)
    status = "OK"
    if upper - lower > gap_tol * (1.0 + abs(upper)):
        sampled, sample_chois = sample_primal(inst, fallback_samples, seed)
        if sampled > lower:
            lower, chois = sampled, sample_chois
        if upper - lower > gap_tol * (1.0 + abs(upper)):
            status = "LOOSE"
            log.warning("SDP bracket loose: [%g, %g] (barrier converged=%s)", lower, upper, converged)
    lower = min(lower, upper)
    return ValueBracket(lower, upper, chois, y, status)


def random_coefficient_chois(n: int, n_obj: int, rng: np.random.Generator,
                             max_terms: int | None = None) -> list[np.ndarray]:
    """Feasible primal point from a random Kraus family sum a_i^* a_i = I
    whose terms are dealt out to the objectives at random."""
    max_terms = max_terms or n_obj * n * n
    terms = int(rng.integers(1, max_terms + 1))
    iso = la.haar_isometry(terms * n, n, rng)
    owners = rng.integers(0, n_obj, size=terms)
    chois = [np.zeros((n * n, n * n), dtype=np.complex128) for _ in range(n_obj)]
    for i in range(terms):
        # psi(y) = a^* y a, i.e. Kraus operator a^*; Choi vector entries a^*[b, c] at (c, b)
        vec = np.conj(iso[i * n:(i + 1) * n, :]).reshape(-1)
        chois[owners[i]] += np.outer(vec, vec.conj())
    return chois


def sample_primal(inst: PolarSdpInstance, samples: int, seed=0):
    rng = np.random.default_rng(seed)
    best, best_chois = -np.inf, None
    for _ in range(samples):
        chois = random_coefficient_chois(inst.n, inst.size, rng)
        val = inst.objective(chois)
        if val > best:
            best, best_chois = val, chois
    return best, best_chois


def sample_primal_lower_bound(inst: PolarSdpInstance, samples: int, seed=0) -> float:
    """Best objective over Monte-Carlo feasible coefficient families."""
    if samples < 1:
        raise InvalidInput("samples must be positive")
    return sample_primal(inst, samples, seed)[0]


@dataclass(eq=False)
class MinNormResult:
    distance: float
    witness: np.ndarray | None
    weights: np.ndarray
    nearest: np.ndarray
    iterations: int
    converged: bool


def _realvec(mats) -> np.ndarray:
    flat = np.array([np.asarray(m, dtype=np.complex128).reshape(-1) for m in mats])
    return np.concatenate([flat.real, flat.imag], axis=1)


def min_norm_point(points: Sequence[np.ndarray], target: np.ndarray, tol: float = 1e-9,
                   max_iter: int = MNP_MAX_ITER) -> MinNormResult:
    """Nearest point of conv(points) to ``target`` by away-step conditional gradient.

    Stops when ||x - target|| <= tol or when the Frank-Wolfe gap is at most
    tol * ||x - target|| / 2, which bounds the distance error by tol.
    """
    if len(points) == 0:
        raise InvalidInput("min_norm_point needs at least one point")
    target = la.as_matrix(target, "target")
    for p in points:
        if np.shape(p) != target.shape:
            raise InvalidInput(f"point of shape {np.shape(p)} vs target {target.shape}")
    pts = _realvec(points)
    tv = _realvec([target])[0]

    start = int(np.argmin(np.linalg.norm(pts - tv, axis=1)))
    w = np.zeros(len(pts))
    w[start] = 1.0
    x = pts[start].copy()
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        g = x - tv
        dist = float(np.linalg.norm(g))
        scores = pts @ g
        fw = int(np.argmin(scores))
        gx = float(g @ x)
        fw_gap = gx - float(scores[fw])
        if dist <= tol or fw_gap <= 0.5 * tol * dist:
            converged = True
            break
        active = np.flatnonzero(w > 0)
        away = int(active[np.argmax(scores[active])])
        away_gap = float(scores[away]) - gx
        if fw_gap >= away_gap:
            d = pts[fw] - x
            gmax = 1.0
        else:
            d = x - pts[away]
            gmax = w[away] / (1.0 - w[away]) if w[away] < 1.0 else np.inf
        dd = float(d @ d)
        if dd == 0.0:
            converged = True
            break
        gamma = min(max(-float(g @ d) / dd, 0.0), gmax)
        if fw_gap >= away_gap:
            w *= 1.0 - gamma
            w[fw] += gamma
        else:
            w *= 1.0 + gamma
            w[away] -= gamma
            if gamma == gmax:
                w[away] = 0.0
        w[w < 1e-300] = 0.0
        w /= w.sum()
        x = w @ pts

    nearest = np.einsum("p,pij->ij", w, np.asarray(points, dtype=np.complex128))
    diff = target - nearest
    distance = la.fro(diff)
    witness = la.hermitian_part(diff) / distance if distance > tol else None
    return MinNormResult(distance, witness, w, nearest, it, converged)


@dataclass(eq=False)
class ProjectionResult:
    """Barrier estimate of min ||sum_j A_j(C_j) - target|| over the spectrahedron.

    ``chois`` is strictly feasible and attains ``distance``; ``lower_bound``
    comes from the barrier suboptimality estimate f - f* <= nu / t at the
    last central point.
    """

    distance: float
    lower_bound: float
    chois: list
    converged: bool


def _trace_one_matrix(n: int, basis: np.ndarray, small: np.ndarray) -> np.ndarray:
    # E[c, a] = <b_c, Tr_1 B_a> in the real Hermitian coordinates
    tr1 = np.array([la.partial_trace(b, (n, n), 0) for b in basis])
    return np.real(np.einsum("cij,aij->ca", small.conj(), tr1))


def nearest_feasible(n: int, ops: Sequence[np.ndarray], target: np.ndarray, tol: float = 1e-9,
                     max_outer: int = 60, t_max: float = 1e16) -> ProjectionResult:
    """Minimize ||sum_j R_j x_j - target|| with x_j the Hermitian-basis coordinates
    of C_j >= 0 and sum_j Tr_1 C_j = I.

    ``ops[j]`` is a real matrix acting on the n^4 coordinates of C_j. The
    path-following method keeps every iterate strictly feasible, so the
    returned point is always a valid coefficient family.
    """
    n_obj = len(ops)
    if n_obj == 0:
        raise InvalidInput("at least one block is required")
    basis = hermitian_basis(n * n)
    small = hermitian_basis(n)
    size = len(basis)
    r_all = np.concatenate([np.asarray(op, dtype=float) for op in ops], axis=1)
    if r_all.shape != (len(target), n_obj * size):
        raise InvalidInput(f"operator shape {r_all.shape} does not match target and blocks")
    eq = np.concatenate([_trace_one_matrix(n, basis, small)] * n_obj, axis=1)
    rtr = r_all.T @ r_all
    rtt = r_all.T @ target
    nu = n_obj * n * n

    x0 = np.real(np.einsum("aij,ji->a", basis, np.eye(n * n) / (n_obj * n)))
    x = np.tile(x0, n_obj)
    # iterates move in the null space of the trace constraint, so they stay feasible
    _, sing, vt = np.linalg.svd(eq)
    null = vt[int(np.sum(sing > 1e-12 * sing[0])):].T

    def mats(xv):
        return np.einsum("ja,aik->jik", xv.reshape(n_obj, size), basis)

    def phi(xv, t):
        try:
            chol = np.linalg.cholesky(mats(xv))
        except np.linalg.LinAlgError:
            return np.inf
        res = r_all @ xv - target
        logdet = 2.0 * np.log(np.real(np.diagonal(chol, axis1=1, axis2=2))).sum()
        return 0.5 * t * float(res @ res) - float(logdet)

    scale = 1.0 + float(np.linalg.norm(target))
    t = 1.0 / scale ** 2
    converged = False
    for _ in range(max_outer):
        for _ in range(MAX_NEWTON):
            try:
                cinv = np.linalg.inv(mats(x))
            except np.linalg.LinAlgError:
                break
            mz = cinv[:, None] @ basis[None]
            grad = t * (rtr @ x - rtt) - np.real(np.einsum("jaii->ja", mz)).reshape(-1)
            hess = t * rtr
            for j in range(n_obj):
                sl = slice(j * size, (j + 1) * size)
                hess[sl, sl] += np.real(np.einsum("aik,bki->ab", mz[j], mz[j]))
            g_red = null.T @ grad
            h_red = null.T @ hess @ null
            try:
                step = null @ -np.linalg.solve(h_red, g_red)
            except np.linalg.LinAlgError:
                step = null @ -np.linalg.lstsq(h_red, g_red, rcond=None)[0]
            dec = -float(grad @ step)
            if dec <= 1e-12:
                break
            f0 = phi(x, t)
            alpha = 1.0
            while alpha > 1e-14:
                if phi(x + alpha * step, t) <= f0 - 0.25 * alpha * dec:
                    break
                alpha *= 0.5
            else:
                break
            x = x + alpha * step
        res = r_all @ x - target
        dist = float(np.linalg.norm(res))
        gap = dist - np.sqrt(max(0.0, dist * dist - 2.0 * nu / t))
        if dist <= tol or gap <= tol:
            converged = True
            break
        if t >= t_max:
            break
        t /= BARRIER_REDUCTION

    chois = [la.hermitian_part(c) for c in mats(x)]
    dist = float(np.linalg.norm(r_all @ x - target))
    lower = float(np.sqrt(max(0.0, dist * dist - 2.0 * nu / t)))
    return ProjectionResult(dist, lower, chois, converged)
