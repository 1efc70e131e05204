import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tensionlab.audit import AuditOptions, audit_record
from tensionlab.errors import FormatError
from tensionlab.field import ComplexField, GridSpec
from tensionlab.metric import builtin_metric, metric_from_theta
from tensionlab.records import (
    AuditCheck,
    MapRecord,
    csv_text,
    dumps,
    fmt,
    json_number,
    read_record,
    record_from_json,
    record_to_json,
    write_record,
)

from conftest import log_cosh, strip_grid

finite = st.floats(allow_nan=False, allow_infinity=False, width=64)


def _record(mask=False):
    g = GridSpec.from_bounds(0.5, 1.0, 0.0, 0.25, 1 / 16)
    f = ComplexField.sample(g, lambda z: np.exp(z) / 3 + 0.1 * np.conj(z))
    if mask:
        m = np.ones(g.shape, dtype=bool)
        m[2, 3] = False
        f = f.with_values(np.where(m, f.values, np.nan), m)
    return MapRecord(f, metric_from_theta([0.1, 1 + 1j], id="custom"), 0.3 - 0.1j, None, "sample")


def test_round_trip_bit_exact(tmp_path):
    rec = _record()
    p = tmp_path / "r.json"
    write_record(rec, str(p))
    back = read_record(str(p))
    assert np.array_equal(back.f.values, rec.f.values)
    assert back.f.grid == rec.f.grid
    assert back.metric == rec.metric
    assert back.alpha == rec.alpha
    assert back.name == "sample"


def test_masked_round_trip(tmp_path):
    rec = _record(mask=True)
    p = tmp_path / "r.json"
    write_record(rec, str(p))
    text = p.read_text()
    assert "NaN" not in text
    back = read_record(str(p))
    assert np.array_equal(back.f.mask, rec.f.mask)
    assert np.array_equal(back.f.values[back.f.mask], rec.f.values[rec.f.mask])


def test_repeated_writes_are_identical(tmp_path):
    rec = _record()
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    write_record(rec, str(a))
    write_record(read_record(str(a)), str(b))
    assert a.read_bytes() == b.read_bytes()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(finite, finite), min_size=9, max_size=9))
def test_values_survive_json(pairs):
    g = GridSpec(0.0, 0.0, 3, 3, 0.5)
    vals = np.array([complex(a, b) for a, b in pairs]).reshape(g.shape)
    rec = MapRecord(ComplexField(g, vals), builtin_metric("euclid"))
    back = record_from_json(json.loads(dumps(record_to_json(rec))))
    assert np.array_equal(back.f.values, vals)


@pytest.mark.parametrize("mutate", [
    lambda d: d.pop("format_version"),
    lambda d: d.__setitem__("values", d["values"][:-1]),
    lambda d: d.__setitem__("grid", {"x0": 0}),
    lambda d: d.__setitem__("values", [[1.0]] * len(d["values"])),
    lambda d: d.pop("metric"),
])
def test_malformed_records(mutate):
    d = record_to_json(_record())
    mutate(d)
    with pytest.raises(FormatError):
        record_from_json(d)


def test_unreadable_files(tmp_path):
    with pytest.raises(FormatError):
        read_record(str(tmp_path / "missing.json"))
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(FormatError):
        read_record(str(bad))


def test_json_number():
    assert json_number(float("nan")) is None
    assert json_number(float("inf")) == "inf"
    assert json_number(-float("inf")) == "-inf"
    assert json_number(1.5) == 1.5
    assert json_number(None) is None


def test_audit_check_verdicts():
    assert AuditCheck("x", 1e-3, 1e-2, 0.1).verdict == "pass"
    assert AuditCheck("x", 1e-1, 1e-2, 0.1).verdict == "fail"
    assert AuditCheck("x", float("nan"), 1e-2, 0.1, applicable=False).verdict == "not-applicable"
    js = AuditCheck("x", float("inf"), 1e-2, 0.1, 2.0).to_json()
    assert js["residual"] == "inf" and js["refinement_ratio"] == 2.0


def test_audit_report_is_strict_json(exp_x):
    f = ComplexField.sample(strip_grid(1 / 32), log_cosh)
    rep = audit_record(MapRecord(f, exp_x, name="tanh"), AuditOptions())
    text = dumps(rep.to_json())
    json.loads(text)
    assert rep.passed
    assert dumps(rep.to_json()) == text


def test_csv_and_fmt():
    assert fmt(0.1) == "0.1"
    assert fmt(1 + 2j) == "(1+2j)"
    assert fmt(3) == "3"
    assert csv_text(["a", "b"], [[0.1, 1 / 3]]) == "a,b\n0.1,0.3333333333333333\n"
