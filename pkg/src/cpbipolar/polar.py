"""Polars, saturated-polar suprema and bipolar verdicts.

For Psi = sum_i a_i^* Phi_{j(i)}(.) a_i the pairing splits as
sum_j Tr(rho (id_k (x) psi_j)(X_j)) with X_j = (Phi_j)_k(s) and the CP maps
psi_j(y) = sum_{i: j(i)=j} a_i^* y a_i, which satisfy sum_j psi_j(I) = I.
In terms of the Choi matrices C_j of psi_j the pairing is sum_j <L_j, C_j>, a
linear objective over the spectrahedron of :mod:`cpbipolar.sdp`. The modulus
is handled one phase at a time: Re(e^{-i theta} z) maximized over a grid.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import linalg as la
from .cpmaps import (
    CPMap,
    CStarCoefficients,
    _same_dims,
    ampliate_apply,
    cstar_combine,
    kraus_from_choi,
)
from .errors import InvalidInput
from .mtests import MatrixTest, canonical_choi_test, fold_linear, golden_max, pairing, theta_grid
from .sdp import (
    PolarSdpInstance,
    ValueBracket,
    _realvec,
    hermitian_basis,
    min_norm_point,
    nearest_feasible,
    normalize_primal,
    solve_polar_sdp,
)

DEFAULT_GRID = 64
REAL_TOL = 1e-12
UNBOUNDED = (-math.inf, math.inf)


@dataclass(eq=False)
class SaturatedSupResult:
    """Certified bracket for sup over sat(K) of |<t, Psi>|.

    ``per_theta_values`` holds (theta, bracket) for every phase that was
    solved, grid phases first and refinement phases after them.
    """

    value_bracket: ValueBracket
    theta_star: float
    per_theta_values: list
    real_test: bool


@dataclass(eq=False)
class SeparationCertificate:
    """A test in the saturated polar of K whose value at the target exceeds 1.

    ``scale`` satisfies scale * <test, Psi> = <W, C_Psi> for the Hermitian
    separating functional W found in Choi space. ``thetas`` and
    ``dual_witnesses`` are the per-phase dual matrices Y that bound the
    saturated supremum; they are enough to re-check the bound without an SDP.
    """

    test: MatrixTest
    scale: float
    sat_sup_upper: float
    value_at_target: float
    thetas: list = field(default_factory=list)
    dual_witnesses: list = field(default_factory=list)
    generators: list | None = None
    target: CPMap | None = None


class Verdict(enum.Enum):
    INSIDE = "INSIDE"
    OUTSIDE = "OUTSIDE"
    UNDECIDED = "UNDECIDED"


@dataclass(eq=False)
class BipolarVerdict:
    kind: Verdict
    distance: float
    weights: np.ndarray | None = None
    atoms: list | None = None
    certificate: SeparationCertificate | None = None
    best_test: MatrixTest | None = None
    distance_lower_bound: float = 0.0


@dataclass
class BipolarParams:
    eps: float = 1e-6
    hull_samples: int = 64
    max_terms: int | None = None
    seed: int = 0
    tol: float = 1e-6
    rounds: int = 40
    margin: float = 1e-6


@dataclass(eq=False)
class PolarMembership:
    """``member`` is True, False, or None when the bracket straddles 1 + tol."""

    member: bool | None
    certificate: SaturatedSupResult


def representers(maps: Sequence[CPMap], weight: np.ndarray, k: int, s: np.ndarray) -> list[np.ndarray]:
    """L_j with Tr(weight (id_k (x) Psi)(s)) = sum_j <L_j, C_j> for Psi = sum_j psi_j o Phi_j."""
    n = maps[0].n
    w4 = np.asarray(weight).reshape(k, n, k, n)
    out = []
    for phi in maps:
        x4 = ampliate_apply(phi, k, s).reshape(k, n, k, n)
        lj = np.einsum("qbpa,pcqd->cadb", w4, x4).conj()
        out.append(lj.reshape(n * n, n * n))
    return out


def _phase_instance(n: int, ls: Sequence[np.ndarray], theta: float) -> PolarSdpInstance:
    ph = np.exp(1j * theta)
    return PolarSdpInstance(n, tuple(la.hermitian_part(ph * lj) for lj in ls))


def _is_real_functional(ls: Sequence[np.ndarray]) -> bool:
    return all(la.fro(lj - la.adjoint(lj)) <= REAL_TOL * (1.0 + la.fro(lj)) for lj in ls)


def _check_family(maps: Sequence[CPMap], t: MatrixTest | None = None) -> tuple[int, int]:
    m, n = _same_dims(maps)
    if t is not None and (t.m, t.n) != (m, n):
        raise InvalidInput(f"test for M_{t.m} -> M_{t.n} against maps M_{m} -> M_{n}")
    return m, n


def polygon_radius(thetas: Sequence[float], uppers: Sequence[float]) -> float:
    """max |z| over {z : Re(e^{-i theta_l} z) <= U_l for all l}.

    Every vertex of the polygon is a pairwise intersection of boundary lines
    that satisfies all constraints; candidates are filtered with a small
    relative slack so that no true vertex is lost to rounding.
    """
    th = np.asarray(thetas, dtype=float)
    u = np.asarray(uppers, dtype=float)
    ordered = np.sort(np.mod(th, 2.0 * np.pi))
    gaps = np.diff(np.concatenate([ordered, ordered[:1] + 2.0 * np.pi]))
    if gaps.max() >= np.pi:
        return math.inf
    a, b = np.cos(th), np.sin(th)
    i, j = np.triu_indices(len(th), 1)
    det = a[i] * b[j] - a[j] * b[i]
    ok = np.abs(det) > 1e-12
    i, j, det = i[ok], j[ok], det[ok]
    x = (u[i] * b[j] - u[j] * b[i]) / det
    y = (a[i] * u[j] - a[j] * u[i]) / det
    slack = 1e-9 * (1.0 + np.abs(u).max())
    feasible = np.all(np.outer(x, a) + np.outer(y, b) <= u + slack, axis=1)
    if not feasible.any():
        return float(np.abs(u).max() / math.cos(float(gaps.max()) / 2.0))
    return float(np.hypot(x[feasible], y[feasible]).max())


def _sup_upper(real: bool, thetas, uppers) -> float:
    if real:
        return max(max(uppers), 0.0)
    return polygon_radius(thetas, uppers)


def sat_sup(maps: Sequence[CPMap], t: MatrixTest, theta_grid_size: int = DEFAULT_GRID,
            refine: bool = True, refine_tol: float = 1e-6) -> SaturatedSupResult:
    """Certified bracket for sup_{Psi in sat(K)} |f(Psi_k(s))|.

    Each phase theta gives an SDP bracket for sup Re(e^{-i theta} <t, Psi>),
    i.e. a certified supporting half-plane of the set of pairing values. The
    lower end is the best phase (golden-section refined around the best grid
    phase); the upper end is the largest modulus on the polygon cut out by
    all solved half-planes. Tests whose pairing is real on every map only
    need the phases 0 and pi.
    """
    _, n = _check_family(maps, t)
    if theta_grid_size < 4:
        raise InvalidInput("theta grid needs at least 4 phases")
    ls = representers(maps, t.rho, t.k, t.s)
    real = _is_real_functional(ls)
    thetas = [0.0, math.pi] if real else [float(x) for x in theta_grid(theta_grid_size)]
    per_theta = [(th, solve_polar_sdp(_phase_instance(n, ls, th))) for th in thetas]
    best = max(range(len(per_theta)), key=lambda i: per_theta[i][1].lower)
    theta_star, best_bracket = per_theta[best]
    lower = best_bracket.lower
    primal = best_bracket.primal_witness

    if refine and not real and lower > 0:
        h = 2.0 * math.pi / theta_grid_size

        def g(theta):
            br = solve_polar_sdp(_phase_instance(n, ls, theta))
            per_theta.append((float(theta), br))
            return br.lower

        golden_max(g, theta_star - h, theta_star + h, tol=refine_tol)
        best = max(range(len(per_theta)), key=lambda i: per_theta[i][1].lower)
        theta_star, best_bracket = per_theta[best]
        lower, primal = best_bracket.lower, best_bracket.primal_witness

    upper = _sup_upper(real, [th for th, _ in per_theta], [br.upper for _, br in per_theta])
    top = max(range(len(per_theta)), key=lambda i: per_theta[i][1].upper)
    status = "LOOSE" if any(br.status == "LOOSE" for _, br in per_theta) else "OK"
    bracket = ValueBracket(min(lower, upper), upper, primal, per_theta[top][1].dual_witness, status)
    return SaturatedSupResult(bracket, theta_star, per_theta, real)


def witness_combination(maps: Sequence[CPMap], chois: Sequence[np.ndarray]) -> tuple[CStarCoefficients, CPMap]:
    """Turn primal coefficient Choi matrices into explicit a_i and the combined map."""
    n = maps[0].n
    terms = []
    for j, c in enumerate(chois):
        psi = CPMap(n, n, c)
        for v in kraus_from_choi(psi):
            terms.append((la.adjoint(v), j))
    coeffs = CStarCoefficients(tuple(terms))
    return coeffs, cstar_combine(maps, coeffs)


def in_polar_of_tests(phi: CPMap, tests: Sequence[MatrixTest], slack: float = 0.0) -> bool:
    return all(abs(pairing(t, phi)) <= 1.0 + slack for t in tests)


def in_saturated_polar(t: MatrixTest, maps: Sequence[CPMap], tol: float = 1e-8,
                       theta_grid_size: int = DEFAULT_GRID) -> PolarMembership:
    res = sat_sup(maps, t, theta_grid_size)
    br = res.value_bracket
    if br.upper <= 1.0 + tol:
        return PolarMembership(True, res)
    if br.lower > 1.0 + tol:
        return PolarMembership(False, res)
    return PolarMembership(None, res)


def random_cstar_coefficients(n: int, n_maps: int, max_terms: int,
                              rng: np.random.Generator) -> CStarCoefficients:
    """Columns of a Haar isometry cut into n x n blocks, each assigned a random generator."""
    terms = int(rng.integers(1, max_terms + 1))
    iso = la.haar_isometry(terms * n, n, rng)
    owners = rng.integers(0, n_maps, size=terms)
    return CStarCoefficients.from_isometry(iso, [int(j) for j in owners])


def hull_sample(maps: Sequence[CPMap], count: int, max_terms: int, seed=0) -> list[CPMap]:
    """Random elements of cconv(K)."""
    if count < 1 or max_terms < 1:
        raise InvalidInput("count and max_terms must be positive")
    _, n = _check_family(maps)
    rng = np.random.default_rng(seed)
    return [cstar_combine(maps, random_cstar_coefficients(n, len(maps), max_terms, rng))
            for _ in range(count)]


def witness_to_test(w: np.ndarray, m: int, n: int):
    """Matrix test and scale R with R * <test, Phi> = <W, C_Phi> for Hermitian W."""
    vals, vecs = la.eig_hermitian(w)
    tests, coeffs = [], []
    pos = vals > 0
    for mask, sign in ((pos, 1.0), (~pos, -1.0)):
        weights = sign * vals[mask]
        total = float(weights.sum())
        if total <= 0:
            continue
        part = (vecs[:, mask] * weights) @ la.adjoint(vecs[:, mask])
        tests.append(canonical_choi_test(part / total, m, n))
        coeffs.append(sign * total)
    folded = fold_linear(tests, coeffs)
    return folded.test, folded.scale


def _default_max_terms(maps: Sequence[CPMap], params: BipolarParams) -> int:
    return params.max_terms or maps[0].n ** 2 * len(maps)


def _canonical_s(m: int) -> np.ndarray:
    omega = np.zeros(m * m, dtype=np.complex128)
    omega[:: m + 1] = 1.0
    return np.outer(omega, omega)


def composition_operator(phi: CPMap) -> np.ndarray:
    """Real matrix sending the Hermitian coordinates of C_psi to the Choi matrix of psi o Phi."""
    m, n = phi.m, phi.n
    c4 = phi.choi.reshape(m, n, m, n)
    basis = hermitian_basis(n * n).reshape(-1, n, n, n, n)
    out = np.einsum("icKd,zcadb->ziaKb", c4, basis).reshape(len(basis), m * n, m * n)
    return _realvec(out).T


@dataclass(eq=False)
class Projection:
    """Element of sat(K) nearest to a target, with a certified lower bound on the distance."""

    distance: float
    lower_bound: float
    coefficients: CStarCoefficients
    member: CPMap
    converged: bool


def project_to_hull(phi: CPMap, maps: Sequence[CPMap], tol: float = 1e-9) -> Projection:
    """Nearest explicit C*-combination of K to phi in Choi space (barrier path)."""
    _, n = _check_family([phi, *maps])
    ops = [composition_operator(g) for g in maps]
    res = nearest_feasible(n, ops, _realvec([phi.choi])[0], tol=tol)
    coeffs, member = witness_combination(maps, normalize_primal(n, res.chois))
    dist = la.fro(member.choi - phi.choi)
    return Projection(dist, min(res.lower_bound, dist), coeffs, member, res.converged)


def _certificate_from_sat(test: MatrixTest, scale: float, res: SaturatedSupResult,
                          value: float, maps, target) -> SeparationCertificate:
    return SeparationCertificate(
        test=test,
        scale=scale,
        sat_sup_upper=res.value_bracket.upper,
        value_at_target=value,
        thetas=[th for th, _ in res.per_theta_values],
        dual_witnesses=[br.dual_witness for _, br in res.per_theta_values],
        generators=list(maps),
        target=target,
    )


def separation_hunt(phi0: CPMap, maps: Sequence[CPMap], params: BipolarParams | None = None,
                    extra_atoms: Sequence[CPMap] = ()) -> SeparationCertificate | None:
    """Search for a test t with certified sat_sup(K, t) <= 1 and |<t, Phi0>| > 1.

    Hull points and their negatives are separated from C_Phi0 in Choi space;
    the separating direction becomes a canonical-test fold, its saturated
    supremum is certified by SDP, and maximizers that beat the sampled hull
    are added as new hull points for the next round.
    """
    params = params or BipolarParams()
    m, n = _check_family([phi0, *maps])
    atoms = (list(maps) + hull_sample(maps, params.hull_samples, _default_max_terms(maps, params), params.seed)
             + list(extra_atoms))
    for _ in range(params.rounds):
        chois = [a.choi for a in atoms]
        mn = min_norm_point(chois + [-c for c in chois], phi0.choi, tol=params.tol)
        if mn.witness is None:
            return None
        test, scale = witness_to_test(mn.witness, m, n)
        res = sat_sup(maps, test)
        u = res.value_bracket.upper
        v = abs(pairing(test, phi0))
        if v > u * (1.0 + params.margin) + params.tol:
            c = (1.0 - params.tol) / max(u, 0.5 * v)
            scaled = test.scaled(c)
            res_c = sat_sup(maps, scaled)
            v_c = abs(pairing(scaled, phi0))
            if res_c.value_bracket.upper <= 1.0 and v_c > 1.0 + params.margin:
                return _certificate_from_sat(scaled, scale / c, res_c, v_c, maps, phi0)
        grew = False
        for _, br in res.per_theta_values:
            if br.primal_witness:
                atoms.append(witness_combination(maps, br.primal_witness)[1])
                grew = True
        if not grew:
            return None
    return None


def in_double_polar(phi: CPMap, maps: Sequence[CPMap],
                    params: BipolarParams | None = None) -> BipolarVerdict:
    """INSIDE (explicit convex combination of hull points), OUTSIDE (certificate)
    or UNDECIDED.

    The sampled hull is the generators, random C*-combinations of them and
    one optimized combination: the barrier projection of phi onto sat(K).
    """
    params = params or BipolarParams()
    _check_family([phi, *maps])
    proj = project_to_hull(phi, maps, tol=0.25 * params.eps)
    atoms = (list(maps) + hull_sample(maps, params.hull_samples, _default_max_terms(maps, params), params.seed)
             + [proj.member])
    mn = min_norm_point([a.choi for a in atoms], phi.choi, tol=0.25 * params.eps)
    if mn.distance <= params.eps:
        return BipolarVerdict(Verdict.INSIDE, mn.distance, mn.weights, atoms)
    cert = separation_hunt(phi, maps, params, extra_atoms=[proj.member])
    kind = Verdict.OUTSIDE if cert is not None else Verdict.UNDECIDED
    return BipolarVerdict(kind, mn.distance, certificate=cert, distance_lower_bound=proj.lower_bound)


def validate_certificate(cert: SeparationCertificate, maps: Sequence[CPMap] | None = None,
                         target: CPMap | None = None, tol: float = 1e-8, resolve: bool = True) -> list[str]:
    """Re-check a certificate from scratch; returns a list of problems (empty if valid).

    The stored dual matrices are checked with the Jacobi eigensolver against
    freshly computed phase objectives, the target pairing is recomputed, and
    (with ``resolve``) the saturated supremum is solved again.
    """
    maps = list(maps if maps is not None else cert.generators or [])
    target = target if target is not None else cert.target
    if not maps or target is None:
        return ["certificate has no generators or target to validate against"]
    problems = []
    t = cert.test
    n = maps[0].n
    value = abs(pairing(t, target))
    if value <= 1.0:
        problems.append(f"value at target {value} does not exceed 1")
    if abs(value - cert.value_at_target) > tol:
        problems.append(f"value at target {value} differs from stored {cert.value_at_target}")

    ls = representers(maps, t.rho, t.k, t.s)
    real = _is_real_functional(ls)
    uppers = []
    for theta, y in zip(cert.thetas, cert.dual_witnesses):
        y = la.check_hermitian(y, "dual witness")
        lift = np.kron(np.eye(n), y)
        worst = min(la.jacobi_eigh(lift - h).eigenvalues[0]
                    for h in _phase_instance(n, ls, theta).objectives)
        uppers.append(float(np.trace(y).real) + n * max(0.0, -worst))
    if real and not {0.0, math.pi}.issubset(set(cert.thetas)):
        problems.append("a real test needs dual witnesses at phases 0 and pi")
    bound = _sup_upper(real, cert.thetas, uppers) if uppers else math.inf
    if bound > 1.0 + tol:
        problems.append(f"dual bound {bound} exceeds 1")
    if abs(bound - cert.sat_sup_upper) > tol:
        problems.append(f"dual bound {bound} differs from stored {cert.sat_sup_upper}")
    if resolve:
        upper = sat_sup(maps, t).value_bracket.upper
        if upper > 1.0 + tol:
            problems.append(f"re-solved saturated supremum {upper} exceeds 1")
    return problems


def scalar_polar_interval(values: Sequence[float]) -> tuple[float, float]:
    """Polar {s : |x s| <= 1 for all x in K} of K subset R_+, as a closed interval."""
    vals = [float(v) for v in values]
    if not vals:
        raise InvalidInput("K must be nonempty")
    if any(v < 0 for v in vals):
        raise InvalidInput("K must consist of nonnegative reals")
    top = max(vals)
    if top == 0.0:
        return UNBOUNDED
    return (-1.0 / top, 1.0 / top)


def scalar_double_polar(values: Sequence[float]) -> tuple[float, float]:
    """{x >= 0 : |x s| <= 1 for all s in K°} = [0, sup K]."""
    lo, hi = scalar_polar_interval(values)
    if hi == math.inf:
        return (0.0, 0.0)
    return (0.0, 1.0 / hi)
