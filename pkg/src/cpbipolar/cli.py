"""Seeded experiment scenarios, JSON reports and the command-line entry point.

Every trial draws from its own stream ``default_rng([seed, trial])``, so a
report depends only on the resolved configuration; ``wall_time`` is the one
field that changes between identical runs.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
import time
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import linalg as la
from .cpmaps import (
    CPMap,
    ampliate_apply,
    apply,
    choi_tomography,
    cstar_combine,
    depolarizing,
    identity_map,
    point_map,
    random_cp,
)
from .errors import InvalidInput
from .mtests import (
    canonical_choi_test,
    fold_linear,
    fold_max,
    normalized_trace,
    pairing,
    random_test,
    realify,
    scalar_domain_pairing,
    scalar_target_reduce,
    tracial_decompose,
)
from .polar import (
    BipolarParams,
    Verdict,
    hull_sample,
    in_double_polar,
    in_saturated_polar,
    random_cstar_coefficients,
    sat_sup,
    scalar_double_polar,
    scalar_polar_interval,
    validate_certificate,
)
from .serialize import certificate_to_doc, serialize

DEFAULT_TOLERANCES = {
    "identity": 1e-10,
    "reduction": 1e-11,
    "polar_slack": 1e-8,
    "tomography": 1e-9,
    "eps": 1e-6,
    "scalar_step": 1e-4,
}


@dataclass
class ExperimentConfig:
    scenario: str
    seed: int = 0
    dims: tuple = (2, 2)
    trials: int = 20
    tolerances: dict = field(default_factory=dict)
    output_path: str | None = None
    csv_path: str | None = None
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenario not in SCENARIOS:
            raise InvalidInput(f"unknown scenario {self.scenario!r}; choose from {sorted(SCENARIOS)}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidInput("seed must be a nonnegative integer")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 2 or not all(1 <= d <= 4 for d in dims):
            raise InvalidInput(f"dims must be two integers in [1, 4], got {self.dims!r}")
        if self.scenario == "scalar-target":
            dims = (dims[0], 1)
        elif self.scenario == "scalar-domain":
            dims = (1, dims[1])
        self.dims = dims
        if int(self.trials) < 1:
            raise InvalidInput("trials must be at least 1")
        self.trials = int(self.trials)
        unknown = set(self.tolerances) - set(DEFAULT_TOLERANCES)
        if unknown:
            raise InvalidInput(f"unknown tolerances {sorted(unknown)}")
        self.tolerances = {**DEFAULT_TOLERANCES, **{k: float(v) for k, v in self.tolerances.items()}}

    def to_dict(self) -> dict:
        out = asdict(self)
        out["dims"] = list(self.dims)
        return out


@dataclass
class Report:
    scenario: str
    pass_count: int
    fail_count: int
    undecided_count: int
    records: list
    wall_time: float
    config: dict

    @property
    def exit_code(self) -> int:
        return 1 if self.fail_count > 0 else 0


def _f(x) -> float:
    return float(np.real(x))


def _record(status: str, **metrics) -> dict:
    return {"status": status, "metrics": {k: _f(v) for k, v in metrics.items()}}


def _ok(flag: bool) -> str:
    return "pass" if flag else "fail"


def _random_map(m, n, rng) -> CPMap:
    return random_cp(m, n, int(rng.integers(1, 4)), seed=rng)


# ---------------------------------------------------------------- scenarios

def _verify_identities(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    phi = _random_map(m, n, rng)
    tests = [random_test(int(rng.integers(1, 3)), m, n, rng) for _ in range(int(rng.integers(1, 4)))]
    vals = np.array([pairing(t, phi) for t in tests])

    folded = fold_max(tests)
    err_max = abs(pairing(folded.test, phi) - vals.mean())

    coeffs = la.random_complex(len(tests), rng)
    lin = fold_linear(tests, coeffs)
    err_lin = abs(lin.scale * pairing(lin.test, phi) - coeffs @ vals)

    theta = float(rng.uniform(0.0, 2.0 * np.pi))
    t = tests[0]
    err_real = abs(pairing(realify(t, theta), phi) - (np.exp(-1j * theta) * vals[0]).real)
    recombined = pairing(realify(t, 0.0), phi).real + 1j * pairing(realify(t, np.pi / 2), phi).real
    err_rec = abs(recombined - vals[0])

    worst = max(err_max, err_lin, err_real, err_rec)
    return _record(_ok(worst <= cfg.tolerances["identity"]), fold_max=err_max, fold_linear=err_lin,
                   realify=err_real, recombine=err_rec)


def _polar_properties(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    slack = cfg.tolerances["polar_slack"]
    big = [_random_map(m, n, rng) for _ in range(int(rng.integers(2, 4)))]
    small = big[: int(rng.integers(1, len(big)))]
    # realified tests pair to real numbers, so two phases certify the supremum
    t = realify(random_test(1, m, n, rng), float(rng.uniform(0.0, 2.0 * np.pi)))
    u_small = sat_sup(small, t).value_bracket.upper
    u_big = sat_sup(big, t).value_bracket.upper
    order = u_small <= u_big + slack

    # t0 lies in the polar of the larger family by construction
    t0 = t.scaled(1.0 / u_big)
    antitone = in_saturated_polar(t0, small, tol=slack).member is True
    lam = float(rng.uniform(-1.0, 1.0))
    balanced = in_saturated_polar(t0.scaled(lam), big, tol=slack).member is True

    members = big + hull_sample(big, 4, n * n * len(big), seed=int(rng.integers(2 ** 31)))
    worst = max(abs(pairing(t0, psi)) for psi in members)
    inclusion = worst <= 1.0 + slack
    return _record(_ok(order and antitone and balanced and inclusion), sup_small=u_small, sup_big=u_big,
                   order_margin=u_big - u_small, max_member_pairing=worst, balance_factor=lam)


def _bipolar_roundtrip(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    eps = cfg.tolerances["eps"]
    params = BipolarParams(eps=eps, seed=trial)
    if trial == 0:
        if m == n:
            maps, target = [depolarizing(n)], identity_map(n)
        else:
            base = _random_map(m, n, rng)
            maps, target = [base], 3.0 * base
        verdict = in_double_polar(target, maps, params)
        rec = {"expected": "OUTSIDE", "verdict": verdict.kind.value,
               "metrics": {"distance": _f(verdict.distance)}}
        cert = verdict.certificate
        if cert is None:
            rec["status"] = "undecided" if verdict.kind == Verdict.UNDECIDED else "fail"
            return rec
        problems = validate_certificate(cert)
        rec["metrics"].update(sat_sup_upper=_f(cert.sat_sup_upper), value_at_target=_f(cert.value_at_target))
        rec["problems"] = problems
        rec["certificate"] = certificate_to_doc(cert)
        rec["status"] = _ok(not problems and cert.sat_sup_upper <= 1.0 and cert.value_at_target > 1.0)
        return rec

    j = int(rng.integers(1, 4))
    maps = [_random_map(m, n, rng) for _ in range(j)]
    coeffs = random_cstar_coefficients(n, j, n * n * j, rng)
    target = cstar_combine(maps, coeffs)
    verdict = in_double_polar(target, maps, params)
    status = {Verdict.INSIDE: "pass", Verdict.OUTSIDE: "fail", Verdict.UNDECIDED: "undecided"}[verdict.kind]
    rec = _record(status, distance=verdict.distance, generators=j, terms=len(coeffs.terms))
    rec.update(expected="INSIDE", verdict=verdict.kind.value)
    return rec


def _scalar_target(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, _ = cfg.dims
    phi = _random_map(m, 1, rng)
    t = random_test(int(rng.integers(1, 3)), m, 1, rng)
    err = abs(pairing(t, phi) - apply(phi, scalar_target_reduce(t))[0, 0])
    return _record(_ok(err <= cfg.tolerances["reduction"]), error=err)


def _tracial(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    k = int(rng.integers(1, 3))
    j = int(rng.integers(1, 4))
    maps = [_random_map(m, n, rng) for _ in range(j)]
    coeffs = random_cstar_coefficients(n, j, n * n * j, rng)
    psi = cstar_combine(maps, coeffs)
    b = la.random_density(k * n, rng) * (k * n)
    s = la.random_complex((k * m, k * m), rng)
    parts = tracial_decompose(b, coeffs)
    lhs = normalized_trace(b @ ampliate_apply(psi, k, s))
    rhs = sum(c * normalized_trace((bi / c) @ ampliate_apply(maps[jj], k, s))
              for (bi, c), (_, jj) in zip(parts, coeffs.terms) if c > 0)
    err_sum = abs(sum(c for _, c in parts) - 1.0)
    err_comb = abs(lhs - rhs)
    ok = max(err_sum, err_comb) <= cfg.tolerances["reduction"]
    return _record(_ok(ok), weight_sum=err_sum, combination=err_comb)


def _scalar_domain(cfg: ExperimentConfig, trial: int, rng) -> dict:
    _, n = cfg.dims
    g = la.random_complex((n, n), rng)
    x = g @ la.adjoint(g)
    t = random_test(int(rng.integers(1, 3)), 1, n, rng)
    err = abs(pairing(t, point_map(x)) - scalar_domain_pairing(t, x))
    return _record(_ok(err <= cfg.tolerances["reduction"]), error=err)


def _jamiolkowski(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    phi = _random_map(m, n, rng)
    rho = la.random_density(m * n, rng)
    err = abs(pairing(canonical_choi_test(rho, m, n), phi) - np.trace(rho @ phi.choi))
    return _record(_ok(err <= cfg.tolerances["reduction"]), error=err)


def scalar_grid_check(values, step: float = 1e-4) -> dict:
    """Brute-force the polar and double polar of a finite K subset R_+ on grids."""
    top = max(values)
    reach = max(2.0, 2.0 / top) if top > 0 else 2.0
    grid = np.arange(-round(reach / step), round(reach / step) + 1) * step
    feasible = grid[np.all(np.abs(np.outer(values, grid)) <= 1.0 + 1e-12, axis=0)]
    lo, hi = scalar_polar_interval(values)
    xs = np.arange(0, round(2.0 * top / step) + 1) * step
    bound = max(abs(lo), abs(hi))
    dp = xs[np.abs(xs) * bound <= 1.0 + 1e-12] if top > 0 else xs
    return {
        "interval_lo": lo,
        "interval_hi": hi,
        "grid_lo": float(feasible.min()),
        "grid_hi": float(feasible.max()),
        "grid_covers_all": bool(feasible.size == grid.size),
        "double_polar_hi": scalar_double_polar(values)[1],
        "grid_double_polar_hi": float(dp.max()),
    }


def _scalar_case(cfg: ExperimentConfig, trial: int, rng) -> dict:
    step = cfg.tolerances["scalar_step"]
    if trial == 0:
        values = [float(v) for v in cfg.params.get("K", [2.0])]
    else:
        values = [float(v) for v in rng.uniform(0.1, 4.0, size=int(rng.integers(1, 4)))]
    chk = scalar_grid_check(values, step)
    top = max(values)
    if top == 0:
        # the polar is all of R: every grid point must be feasible
        ok = chk["interval_hi"] == np.inf and chk["grid_covers_all"] and chk["double_polar_hi"] == 0.0
    else:
        ok = (abs(chk["grid_lo"] - chk["interval_lo"]) <= step
              and abs(chk["grid_hi"] - chk["interval_hi"]) <= step
              and abs(chk["double_polar_hi"] - top) <= 1e-12
              and abs(chk["grid_double_polar_hi"] - top) <= step)
    rec = _record(_ok(ok), **chk)
    rec["K"] = values
    return rec


def _tomography(cfg: ExperimentConfig, trial: int, rng) -> dict:
    m, n = cfg.dims
    phi = _random_map(m, n, rng)
    rec_map = choi_tomography(lambda t: pairing(t, phi), m, n)
    err = la.fro(rec_map.choi - phi.choi)
    return _record(_ok(err <= cfg.tolerances["tomography"]), error=err)


SCENARIOS: dict[str, Callable] = {
    "verify-identities": _verify_identities,
    "polar-properties": _polar_properties,
    "bipolar-roundtrip": _bipolar_roundtrip,
    "scalar-target": _scalar_target,
    "tracial": _tracial,
    "scalar-domain": _scalar_domain,
    "jamiolkowski": _jamiolkowski,
    "scalar-case": _scalar_case,
    "tomography": _tomography,
}


def run_scenario(cfg: ExperimentConfig) -> Report:
    """Run every trial of a scenario; UNDECIDED trials count as failures and
    are also tallied in ``undecided_count``."""
    start = time.perf_counter()
    fn = SCENARIOS[cfg.scenario]
    records = []
    for trial in range(cfg.trials):
        rng = np.random.default_rng([cfg.seed, trial])
        rec = fn(cfg, trial, rng)
        rec["trial"] = trial
        records.append(rec)
    passed = sum(r["status"] == "pass" for r in records)
    undecided = sum(r["status"] == "undecided" for r in records)
    return Report(cfg.scenario, passed, len(records) - passed, undecided, records,
                  time.perf_counter() - start, cfg.to_dict())


def write_csv(report: Report, path: str) -> None:
    keys = sorted({k for r in report.records for k in r.get("metrics", {})})
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["trial", "status", *keys])
        for r in report.records:
            metrics = r.get("metrics", {})
            writer.writerow([r["trial"], r["status"], *(repr(metrics[k]) if k in metrics else "" for k in keys)])


# ---------------------------------------------------------------- command line

def _load_config(source: str | None) -> dict:
    if source is None:
        return {}
    text = sys.stdin.read() if source == "-" else open(source).read()
    doc = json.loads(text)
    if not isinstance(doc, dict):
        raise InvalidInput("config must be a JSON object")
    return doc


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpbipolar", description="Run a seeded scenario and emit a JSON report.")
    p.add_argument("--scenario", choices=sorted(SCENARIOS), help="scenario to run")
    p.add_argument("--config", help="JSON config file, or - for standard input")
    p.add_argument("--seed", type=int, help="base seed")
    p.add_argument("--out", help="report path (default: standard output)")
    p.add_argument("--trials", type=int, help="number of trials")
    p.add_argument("--dims", type=int, nargs=2, metavar=("M", "N"), help="map dimensions M_m -> M_n")
    p.add_argument("--csv", help="also write per-trial metrics as CSV")
    return p


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    doc = _load_config(args.config)
    overrides = {"scenario": args.scenario, "seed": args.seed, "output_path": args.out,
                 "trials": args.trials, "dims": args.dims, "csv_path": args.csv}
    doc.update({k: v for k, v in overrides.items() if v is not None})
    if "scenario" not in doc:
        raise InvalidInput("no scenario given (use --scenario or the config field)")
    known = {"scenario", "seed", "dims", "trials", "tolerances", "output_path", "csv_path", "params"}
    extra = set(doc) - known
    if extra:
        raise InvalidInput(f"unknown config fields {sorted(extra)}")
    return ExperimentConfig(**doc)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
    except (InvalidInput, TypeError, json.JSONDecodeError, OSError) as exc:
        parser.error(str(exc))
    report = run_scenario(cfg)
    text = serialize(report) + "\n"
    try:
        if cfg.output_path:
            with open(cfg.output_path, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        if cfg.csv_path:
            write_csv(report, cfg.csv_path)
    except OSError as exc:
        print(f"cpbipolar: cannot write output: {exc}", file=sys.stderr)
        return 3
    print(f"{cfg.scenario}: {report.pass_count} passed, {report.fail_count} failed "
          f"({report.undecided_count} undecided) in {report.wall_time:.2f}s", file=sys.stderr)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
