from __future__ import annotations

import json

import numpy as np
import pytest

from cpbipolar import linalg as la
from cpbipolar.cli import ExperimentConfig, run_scenario
from cpbipolar.cpmaps import CPMap, depolarizing, identity_map, random_cp
from cpbipolar.errors import ParseError, ValidationError
from cpbipolar.mtests import MatrixTest, random_test
from cpbipolar.polar import separation_hunt
from cpbipolar.serialize import deserialize, matrix_to_doc, serialize, to_doc


@pytest.fixture(scope="module")
def certificate():
    cert = separation_hunt(identity_map(2), [depolarizing(2)])
    assert cert is not None
    return cert


def test_identity_map_roundtrip():
    phi = identity_map(2)
    back = deserialize(serialize(phi))
    assert isinstance(back, CPMap) and (back.m, back.n) == (2, 2)
    assert np.array_equal(back.choi, phi.choi)


def test_random_objects_roundtrip_bit_exactly(rng):
    phi = random_cp(2, 3, 2, seed=rng)
    t = random_test(2, 2, 3, rng)
    for obj in (phi, t):
        text = serialize(obj)
        back = deserialize(text)
        assert serialize(back) == text
    back = deserialize(serialize(t))
    assert np.array_equal(back.rho, t.rho) and np.array_equal(back.s, t.s) and back.k == t.k


def test_document_layout():
    doc = to_doc(MatrixTest(1, np.eye(1), np.array([[1 + 2j]])))
    assert doc["type"] == "MatrixTest" and doc["schema_version"] == 1
    assert doc["s"] == {"rows": 1, "cols": 1, "data": [[[1.0, 2.0]]]}


def test_state_with_wrong_trace_is_a_validation_error():
    doc = to_doc(MatrixTest(1, np.eye(2) / 2, np.eye(2)))
    doc["rho"] = matrix_to_doc(np.diag([0.5, 0.4]))
    with pytest.raises(ValidationError):
        deserialize(json.dumps(doc))


def test_non_hermitian_choi_is_a_validation_error():
    doc = to_doc(identity_map(2))
    doc["choi"]["data"][0][1] = [5.0, 0.0]
    with pytest.raises(ValidationError):
        deserialize(json.dumps(doc))


@pytest.mark.parametrize("mutate, location", [
    (lambda d: d.pop("m"), "$"),
    (lambda d: d.update(m="two"), "$.m"),
    (lambda d: d["choi"].update(rows=3), "$.choi.data"),
    (lambda d: d["choi"]["data"][1].pop(), "$.choi.data[1]"),
    (lambda d: d["choi"]["data"][2].__setitem__(3, [1.0]), "$.choi.data[2][3]"),
    (lambda d: d["choi"]["data"][0].__setitem__(0, [True, 0.0]), "$.choi.data[0][0][0]"),
    (lambda d: d.update(schema_version=99), "$.schema_version"),
    (lambda d: d.update(type="Unknown"), "$.type"),
])
def test_malformed_documents_report_location(mutate, location):
    doc = to_doc(identity_map(2))
    mutate(doc)
    with pytest.raises(ParseError) as info:
        deserialize(json.dumps(doc))
    assert info.value.location == location


def test_invalid_json_reports_line_and_column():
    with pytest.raises(ParseError) as info:
        deserialize('{"type": "CPMap",\n  "m": }')
    assert info.value.location == "line 2:8"


def test_certificate_roundtrip_revalidates(certificate):
    text = serialize(certificate)
    back = deserialize(text)
    assert serialize(back) == text
    assert back.value_at_target == certificate.value_at_target
    assert len(back.dual_witnesses) == len(back.thetas) == 2


def test_tampered_certificate_fails_on_load(certificate):
    doc = to_doc(certificate)
    doc["generators"] = [to_doc(identity_map(2))]
    with pytest.raises(ValidationError, match="exceeds 1"):
        deserialize(json.dumps(doc))
    doc = to_doc(certificate)
    doc["value_at_target"] = 5.0
    with pytest.raises(ValidationError, match="differs"):
        deserialize(json.dumps(doc))


def test_report_roundtrip_and_embedded_certificate():
    report = run_scenario(ExperimentConfig("bipolar-roundtrip", seed=1, trials=2))
    text = serialize(report)
    back = deserialize(text)
    assert serialize(back) == text
    assert back.pass_count == report.pass_count == 2
    doc = json.loads(text)
    doc["records"][0]["certificate"]["value_at_target"] = 0.5
    with pytest.raises(ValidationError, match=r"\$\.records\[0\]\.certificate"):
        deserialize(json.dumps(doc))
    doc = json.loads(text)
    doc["pass_count"] = 5
    with pytest.raises(ValidationError):
        deserialize(json.dumps(doc))


def test_non_finite_values_are_encoded_as_strings():
    report = run_scenario(ExperimentConfig("scalar-case", trials=1, params={"K": [0.0]}))
    doc = json.loads(serialize(report))
    metrics = doc["records"][0]["metrics"]
    assert metrics["interval_lo"] == "-inf" and metrics["interval_hi"] == "inf"
    assert deserialize(serialize(report)).records[0]["metrics"]["interval_hi"] == "inf"


def test_unknown_objects_rejected():
    with pytest.raises(TypeError):
        serialize(la.random_hermitian(2, np.random.default_rng(0)))
