"""JSON documents for maps, tests, certificates and reports.

Complex scalars are ``[re, im]`` pairs and matrices are
``{"rows": r, "cols": c, "data": [[[re, im], ...], ...]}`` in row-major
order. Floats are written with Python's shortest round-trip repr, so a
document decodes to bit-identical arrays. Every top-level document carries
``"type"`` and ``"schema_version"``.
"""

from __future__ import annotations

import json
import math
from typing import Any

import numpy as np

from .cpmaps import CPMap
from .errors import CPBipolarError, ParseError, ValidationError
from .mtests import MatrixTest

SCHEMA_VERSION = 1


# ---------------------------------------------------------------- encoding

def _num(x: float) -> float | str:
    x = float(x)
    if math.isfinite(x):
        return x
    return "inf" if x > 0 else ("-inf" if x < 0 else "nan")


def complex_to_doc(z) -> list:
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def matrix_to_doc(a) -> dict:
    a = np.asarray(a, dtype=np.complex128)
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "data": [[complex_to_doc(z) for z in row] for row in a],
    }


def cpmap_to_doc(phi: CPMap) -> dict:
    return {"m": phi.m, "n": phi.n, "choi": matrix_to_doc(phi.choi)}


def test_to_doc(t: MatrixTest) -> dict:
    return {"k": t.k, "rho": matrix_to_doc(t.rho), "s": matrix_to_doc(t.s)}


def certificate_to_doc(cert) -> dict:
    return {
        "test": test_to_doc(cert.test),
        "scale": _num(cert.scale),
        "sat_sup_upper": _num(cert.sat_sup_upper),
        "value_at_target": _num(cert.value_at_target),
        "thetas": [_num(th) for th in cert.thetas],
        "dual_witnesses": [matrix_to_doc(y) for y in cert.dual_witnesses],
        "generators": [cpmap_to_doc(g) for g in cert.generators or []],
        "target": cpmap_to_doc(cert.target) if cert.target is not None else None,
    }


def _plain(obj):
    """Records are free-form JSON; non-finite floats become strings."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return _num(obj)
    return obj


def report_to_doc(report) -> dict:
    return {
        "scenario": report.scenario,
        "pass_count": report.pass_count,
        "fail_count": report.fail_count,
        "undecided_count": report.undecided_count,
        "records": _plain(report.records),
        "wall_time": report.wall_time,
        "config": _plain(report.config),
    }


def _kind(obj) -> str:
    from .cli import Report
    from .polar import SeparationCertificate

    for cls, name in ((CPMap, "CPMap"), (MatrixTest, "MatrixTest"),
                      (SeparationCertificate, "SeparationCertificate"), (Report, "Report")):
        if isinstance(obj, cls):
            return name
    raise TypeError(f"cannot serialize {type(obj).__name__}")


_ENCODERS = {
    "CPMap": cpmap_to_doc,
    "MatrixTest": test_to_doc,
    "SeparationCertificate": certificate_to_doc,
    "Report": report_to_doc,
}


def to_doc(obj) -> dict:
    kind = _kind(obj)
    doc = _ENCODERS[kind](obj)
    doc["type"] = kind
    doc["schema_version"] = SCHEMA_VERSION
    return doc


def serialize(obj) -> str:
    return json.dumps(to_doc(obj), sort_keys=True, indent=2, allow_nan=False)


# ---------------------------------------------------------------- decoding

def _field(doc: dict, key: str, where: str):
    if not isinstance(doc, dict):
        raise ParseError("expected an object", where)
    if key not in doc:
        raise ParseError(f"missing field {key!r}", where)
    return doc[key]


def _real(x, where: str) -> float:
    if isinstance(x, bool):
        raise ParseError("expected a number", where)
    if isinstance(x, (int, float)):
        return float(x)
    if x in ("inf", "-inf", "nan"):
        return float(x)
    raise ParseError("expected a number", where)


def _int(x, where: str) -> int:
    if isinstance(x, bool) or not isinstance(x, int):
        raise ParseError("expected an integer", where)
    return x


def complex_from_doc(x, where: str = "$") -> complex:
    if not isinstance(x, list) or len(x) != 2:
        raise ParseError("complex scalar must be [re, im]", where)
    return complex(_real(x[0], f"{where}[0]"), _real(x[1], f"{where}[1]"))


def matrix_from_doc(doc, where: str = "$") -> np.ndarray:
    rows = _int(_field(doc, "rows", where), f"{where}.rows")
    cols = _int(_field(doc, "cols", where), f"{where}.cols")
    data = _field(doc, "data", where)
    if rows < 0 or cols < 0:
        raise ParseError("negative matrix size", where)
    if not isinstance(data, list) or len(data) != rows:
        raise ParseError(f"expected {rows} rows", f"{where}.data")
    out = np.zeros((rows, cols), dtype=np.complex128)
    for i, row in enumerate(data):
        if not isinstance(row, list) or len(row) != cols:
            raise ParseError(f"expected {cols} entries", f"{where}.data[{i}]")
        for j, z in enumerate(row):
            out[i, j] = complex_from_doc(z, f"{where}.data[{i}][{j}]")
    return out


def _build(ctor, where: str):
    try:
        return ctor()
    except ParseError:
        raise
    except CPBipolarError as exc:
        raise ValidationError(f"{where}: {exc}") from exc


def cpmap_from_doc(doc, where: str = "$") -> CPMap:
    m = _int(_field(doc, "m", where), f"{where}.m")
    n = _int(_field(doc, "n", where), f"{where}.n")
    choi = matrix_from_doc(_field(doc, "choi", where), f"{where}.choi")
    return _build(lambda: CPMap(m, n, choi), where)


def test_from_doc(doc, where: str = "$") -> MatrixTest:
    k = _int(_field(doc, "k", where), f"{where}.k")
    rho = matrix_from_doc(_field(doc, "rho", where), f"{where}.rho")
    s = matrix_from_doc(_field(doc, "s", where), f"{where}.s")
    return _build(lambda: MatrixTest(k, rho, s), where)


def _list(doc, key: str, where: str) -> list:
    items = _field(doc, key, where)
    if not isinstance(items, list):
        raise ParseError("expected a list", f"{where}.{key}")
    return items


def certificate_from_doc(doc, where: str = "$", revalidate: bool = True):
    """Decode a certificate; with ``revalidate`` its dual bound and target value
    are re-checked (no new SDP solve) and any problem raises ValidationError."""
    from .polar import SeparationCertificate, validate_certificate

    test = test_from_doc(_field(doc, "test", where), f"{where}.test")
    thetas = [_real(x, f"{where}.thetas[{i}]") for i, x in enumerate(_list(doc, "thetas", where))]
    duals = [matrix_from_doc(y, f"{where}.dual_witnesses[{i}]")
             for i, y in enumerate(_list(doc, "dual_witnesses", where))]
    if len(duals) != len(thetas):
        raise ParseError("one dual witness per phase is required", f"{where}.dual_witnesses")
    gens = [cpmap_from_doc(g, f"{where}.generators[{i}]")
            for i, g in enumerate(_list(doc, "generators", where))]
    target_doc = _field(doc, "target", where)
    target = cpmap_from_doc(target_doc, f"{where}.target") if target_doc is not None else None
    cert = SeparationCertificate(
        test=test,
        scale=_real(_field(doc, "scale", where), f"{where}.scale"),
        sat_sup_upper=_real(_field(doc, "sat_sup_upper", where), f"{where}.sat_sup_upper"),
        value_at_target=_real(_field(doc, "value_at_target", where), f"{where}.value_at_target"),
        thetas=thetas,
        dual_witnesses=duals,
        generators=gens,
        target=target,
    )
    if revalidate:
        try:
            problems = validate_certificate(cert, resolve=False)
        except CPBipolarError as exc:
            problems = [str(exc)]
        if problems:
            raise ValidationError(f"{where}: certificate does not revalidate: {'; '.join(problems)}")
    return cert


def _walk_certificates(obj, where: str) -> None:
    if isinstance(obj, dict):
        for key, val in obj.items():
            if key == "certificate" and val is not None:
                certificate_from_doc(val, f"{where}.{key}")
            else:
                _walk_certificates(val, f"{where}.{key}")
    elif isinstance(obj, list):
        for i, val in enumerate(obj):
            _walk_certificates(val, f"{where}[{i}]")


def report_from_doc(doc, where: str = "$", revalidate: bool = True):
    from .cli import Report

    counts = {key: _int(_field(doc, key, where), f"{where}.{key}")
              for key in ("pass_count", "fail_count", "undecided_count")}
    records = _list(doc, "records", where)
    config = _field(doc, "config", where)
    if not isinstance(config, dict):
        raise ParseError("expected an object", f"{where}.config")
    scenario = _field(doc, "scenario", where)
    if not isinstance(scenario, str):
        raise ParseError("expected a string", f"{where}.scenario")
    if counts["pass_count"] + counts["fail_count"] != len(records):
        raise ValidationError(f"{where}: pass_count + fail_count != number of records")
    if revalidate:
        _walk_certificates(records, f"{where}.records")
    return Report(
        scenario=scenario,
        pass_count=counts["pass_count"],
        fail_count=counts["fail_count"],
        undecided_count=counts["undecided_count"],
        records=records,
        wall_time=_real(_field(doc, "wall_time", where), f"{where}.wall_time"),
        config=config,
    )


_DECODERS = {
    "CPMap": cpmap_from_doc,
    "MatrixTest": test_from_doc,
    "SeparationCertificate": certificate_from_doc,
    "Report": report_from_doc,
}


def from_doc(doc: Any):
    kind = _field(doc, "type", "$")
    version = _field(doc, "schema_version", "$")
    if version != SCHEMA_VERSION:
        raise ParseError(f"unsupported schema version {version!r}", "$.schema_version")
    if kind not in _DECODERS:
        raise ParseError(f"unknown document type {kind!r}", "$.type")
    return _DECODERS[kind](doc)


def deserialize(text: str):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, f"line {exc.lineno}:{exc.colno}") from None
    return from_doc(doc)
