"""Acceptance criteria, one test each; every test prints a PASS/FAIL line."""

from __future__ import annotations

import json
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from cpbipolar import linalg as la
from cpbipolar.cli import ExperimentConfig, main, run_scenario, scalar_grid_check
from cpbipolar.cpmaps import (
    choi_from_kraus,
    choi_tomography,
    cstar_combine,
    depolarizing,
    identity_map,
    random_cp,
    random_kraus,
    transpose_map,
)
from cpbipolar.mtests import abs_via_sup, pairing, random_test
from cpbipolar.polar import (
    BipolarParams,
    Verdict,
    in_double_polar,
    random_cstar_coefficients,
    sat_sup,
    scalar_double_polar,
    scalar_polar_interval,
    separation_hunt,
    validate_certificate,
)
from cpbipolar.sdp import PolarSdpInstance, sample_primal_lower_bound, solve_polar_sdp


def report(number: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def test_criterion_01_identity_suite():
    start = time.perf_counter()
    rep = run_scenario(ExperimentConfig("verify-identities", seed=0, trials=1000))
    elapsed = time.perf_counter() - start
    worst = {key: max(r["metrics"][key] for r in rep.records)
             for key in ("fold_max", "fold_linear", "realify", "recombine")}
    ok = rep.fail_count == 0 and max(worst.values()) <= 1e-10 and elapsed <= 60.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    report("1", ok, f"{len(rep.records)} instances, max errors {detail}, {elapsed:.1f}s")


def test_criterion_02_choi_criterion():
    rng = np.random.default_rng(2)
    worst = min(la.lambda_min(choi_from_kraus(random_kraus(m, n, r, rng), m, n).choi)
                for m, n, r in ((int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 4)))
                                for _ in range(200)))
    eig = np.linalg.eigvalsh(transpose_map(2).choi)
    ok = (worst >= -1e-9 and np.allclose(eig, [-1, 1, 1, 1], atol=1e-9)
          and not transpose_map(2).is_cp(1e-9))
    report("2", ok, f"min Choi eigenvalue over 200 maps {worst:.1e}, transpose spectrum {np.round(eig, 12).tolist()}")


def test_criterion_03_sdp_certification():
    rng = np.random.default_rng(3)
    worst_gap = worst_dual = worst_mc = -np.inf
    for i in range(100):
        inst = PolarSdpInstance(2, tuple(la.random_hermitian(4, rng) for _ in range(int(rng.integers(1, 3)))))
        br = solve_polar_sdp(inst)
        worst_gap = max(worst_gap, br.gap / (1 + abs(br.upper)))
        lift = np.kron(np.eye(2), br.dual_witness)
        lam = min(la.jacobi_eigh(lift - h).eigenvalues[0] for h in inst.objectives)
        worst_dual = max(worst_dual, -lam, abs(np.trace(br.dual_witness).real - br.upper))
        worst_mc = max(worst_mc, sample_primal_lower_bound(inst, 500, seed=i) - br.upper)
    ok = worst_gap <= 1e-6 and worst_dual <= 1e-9 and worst_mc <= 1e-8
    report("3", ok, f"100 SDPs, max relative gap {worst_gap:.1e}, dual infeasibility {worst_dual:.1e}, "
                    f"max MC excess over upper bound {worst_mc:.1e}")


def test_criterion_04_phase_sweep():
    rng = np.random.default_rng(4)
    worst_grid = worst_refined = 0.0
    for _ in range(200):
        m, n, k = int(rng.integers(1, 4)), int(rng.integers(1, 4)), int(rng.integers(1, 3))
        phi = random_cp(m, n, int(rng.integers(1, 4)), seed=rng)
        t = random_test(k, m, n, rng)
        z = abs(pairing(t, phi))
        worst_grid = max(worst_grid, abs(abs_via_sup(t, phi, grid_size=1024) - z))
        worst_refined = max(worst_refined, abs(abs_via_sup(t, phi, grid_size=1024, refine=True) - z))
    ok = worst_grid <= 1e-4 and worst_refined <= 1e-7
    report("4", ok, f"200 instances, grid error {worst_grid:.1e}, refined error {worst_refined:.1e}")


def test_criterion_05a_inside_verdicts():
    dims = [(2, 2), (2, 3), (3, 2), (1, 2), (2, 1), (3, 3)]
    kinds = {v: 0 for v in Verdict}
    worst = 0.0
    for i in range(100):
        rng = np.random.default_rng([5, i])
        m, n = dims[i % len(dims)]
        j = int(rng.integers(1, 4))
        maps = [random_cp(m, n, int(rng.integers(1, 4)), seed=rng) for _ in range(j)]
        target = cstar_combine(maps, random_cstar_coefficients(n, j, n * n * j, rng))
        v = in_double_polar(target, maps, BipolarParams(eps=1e-6, seed=i))
        kinds[v.kind] += 1
        if v.kind is Verdict.INSIDE:
            worst = max(worst, v.distance)
    ok = kinds[Verdict.INSIDE] == 100 and kinds[Verdict.OUTSIDE] == 0
    report("5a", ok, f"{kinds[Verdict.INSIDE]} INSIDE, {kinds[Verdict.OUTSIDE]} OUTSIDE, "
                     f"{kinds[Verdict.UNDECIDED]} UNDECIDED, max distance {worst:.1e}")


def test_criterion_05b_outside_certificate():
    maps, target = [depolarizing(2)], identity_map(2)
    cert = separation_hunt(target, maps)
    assert cert is not None, "no certificate emitted"
    problems = validate_certificate(cert, maps, target)
    upper = sat_sup(maps, cert.test).value_bracket.upper
    value = abs(pairing(cert.test, target))
    ok = not problems and upper <= 1.0 and value >= 1.01
    report("5b", ok, f"re-solved sat_sup upper {upper:.1e}, pairing at target {value:.6f}, problems {problems}")


def test_criterion_06_polar_properties():
    rep = run_scenario(ExperimentConfig("polar-properties", seed=0, trials=500))
    worst = min(r["metrics"]["order_margin"] for r in rep.records)
    top = max(r["metrics"]["max_member_pairing"] for r in rep.records)
    ok = rep.fail_count == 0
    report("6", ok, f"{rep.pass_count}/500 nested instances, min order margin {worst:.1e}, "
                    f"max member pairing {top:.6f}")


@pytest.mark.parametrize("scenario, dims", [("scalar-target", (3, 1)), ("scalar-domain", (1, 3)),
                                            ("tracial", (2, 3)), ("jamiolkowski", (3, 2))])
def test_criterion_07_reductions(scenario, dims):
    rep = run_scenario(ExperimentConfig(scenario, seed=7, dims=dims, trials=200))
    worst = max(max(r["metrics"].values()) for r in rep.records)
    ok = rep.fail_count == 0 and worst <= 1e-11
    report(f"7 ({scenario})", ok, f"200 instances, max error {worst:.1e}")


def test_criterion_08_tomography():
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(50):
        m, n = int(rng.integers(1, 4)), int(rng.integers(1, 4))
        phi = random_cp(m, n, int(rng.integers(1, 4)), seed=rng)
        rec = choi_tomography(lambda t, phi=phi: pairing(t, phi), m, n)
        worst = max(worst, la.fro(rec.choi - phi.choi))
    report("8", worst <= 1e-9, f"50 maps, max Frobenius error {worst:.1e}")


def test_criterion_09_scalar_example():
    lo, hi = scalar_polar_interval([2.0])
    grid = np.arange(-20000, 20001) * 1e-4
    feasible = grid[np.abs(2.0 * grid) <= 1.0 + 1e-12]
    chk = scalar_grid_check([2.0], 1e-4)
    dp = scalar_double_polar([2.0])
    ok = ((lo, hi) == (-0.5, 0.5) and abs(feasible.min() - lo) <= 1e-4 and abs(feasible.max() - hi) <= 1e-4
          and dp == (0.0, 2.0) and abs(chk["grid_double_polar_hi"] - 2.0) <= 1e-4)
    report("9", ok, f"polar [{lo}, {hi}], grid boundary [{feasible.min():.4f}, {feasible.max():.4f}], "
                    f"double polar {list(dp)}")


def test_criterion_10_determinism(tmp_path):
    same = True
    for scenario, trials in (("bipolar-roundtrip", 3), ("verify-identities", 20), ("scalar-case", 3)):
        docs = []
        for _ in range(2):
            out = tmp_path / f"{scenario}.json"
            main(["--scenario", scenario, "--trials", str(trials), "--seed", "11", "--out", str(out)])
            doc = json.loads(out.read_text())
            doc.pop("wall_time")
            docs.append(json.dumps(doc, sort_keys=True))
        same = same and docs[0] == docs[1]
    report("10", same, "reports identical modulo wall_time for 3 scenarios")
