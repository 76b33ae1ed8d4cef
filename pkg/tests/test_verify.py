import json
import math

import pytest

from fibrekit.errors import UnknownFamily
from fibrekit.verify import (SCHEMA_VERSION, TOLERANCE_TIERS, CheckRecord, SuiteConfig, VerificationReport,
                             report_parse, report_serialize, report_to_dict, run_suite)


@pytest.fixture
def reports(suite_reports):
    return suite_reports


def body(report):
    d = report_to_dict(report)
    d.pop("environment")
    return json.dumps(d, sort_keys=True)


def test_every_suite_behaves_as_expected(reports):
    for fid, rep in reports.items():
        bad = [(r.check_id, r.max_defect, r.error) for r in rep.records if not r.as_expected]
        assert rep.ok, (fid, bad)


def test_pass_iff_within_tolerance(reports):
    for rep in reports.values():
        for r in rep.records:
            assert r.passed == (r.max_defect <= r.tolerance)


def test_every_suite_has_a_failing_negative_control(reports):
    for rep in reports.values():
        controls = [r for r in rep.records if r.expect == "fail"]
        assert controls
        assert all(not r.passed for r in controls)
        assert rep.record("negative-control.gauss-manin-sign-flip").expect == "fail"


def test_records_sorted_and_unique(reports):
    for rep in reports.values():
        ids = [r.check_id for r in rep.records]
        assert ids == sorted(ids) and len(set(ids)) == len(ids)


def test_incomplete_blowup_is_expected(reports):
    r = reports["incomplete"].record("incomplete.blow-up")
    assert r.passed and r.expect == "pass"


def test_determinism_byte_identical():
    cfg = SuiteConfig("incomplete", samples=3, seed=11)
    a, b = run_suite(cfg), run_suite(cfg)
    assert body(a) == body(b)
    assert [r.max_defect for r in a.records] == [r.max_defect for r in b.records]


def test_worker_count_does_not_change_results():
    a = run_suite(SuiteConfig("abelian:k=1", samples=3, seed=5, workers=1))
    b = run_suite(SuiteConfig("abelian:k=1", samples=3, seed=5, workers=4))
    assert body(a) == body(b)


def test_serialize_round_trip(reports):
    rep = reports["hermitian:line-gaussian"]
    text = report_serialize(rep)
    back = report_parse(text)
    assert back == rep
    assert report_serialize(back) == text


def test_schema_and_defect_format(reports):
    data = json.loads(report_serialize(reports["abelian:k=1"]))
    assert data["schema_version"] == SCHEMA_VERSION
    assert list(data) == ["schema_version", "family", "seed", "samples", "ok", "environment", "records"]
    for rec in data["records"]:
        mantissa = rec["max_defect"].split("e")[0].replace("-", "").replace(".", "")
        assert len(mantissa) == 17
        assert isinstance(rec["max_defect"], str)


def test_empty_report():
    rep = VerificationReport("abelian:k=1", 0, 1, ())
    data = json.loads(report_serialize(rep))
    assert data["records"] == [] and data["ok"] is True
    assert report_parse(report_serialize(rep)) == rep


def test_non_finite_defects_round_trip():
    rec = CheckRecord("x", "anchor", 0, math.inf, 1e-6, False, "pass", "Boom: broken")
    rep = VerificationReport("incomplete", 0, 1, (rec,))
    back = report_parse(report_serialize(rep))
    assert back.records[0].max_defect == math.inf and not back.ok


def test_parse_rejects_other_schema():
    with pytest.raises(ValueError):
        report_parse(json.dumps({"schema_version": "0.1"}))


def test_unknown_family():
    with pytest.raises(UnknownFamily):
        run_suite(SuiteConfig("no-such"))


def test_config_validation():
    with pytest.raises(ValueError):
        SuiteConfig("incomplete", samples=0)
    with pytest.raises(ValueError):
        SuiteConfig("incomplete", tolerances={"ode": 0.0})
    with pytest.raises(ValueError):
        SuiteConfig("incomplete", base_radius=-1.0)
    cfg = SuiteConfig("incomplete", tolerances={"ode": 1e-3})
    assert cfg.tolerances["ode"] == 1e-3
    assert cfg.tolerances["algebraic"] == TOLERANCE_TIERS["algebraic"]


def test_tolerance_tiers_ordered():
    t = TOLERANCE_TIERS
    assert t["algebraic"] < t["first_fd"] < t["second_fd"]
    assert t["ode"] == 1e-6


def test_anchors_do_not_cite_numbers(reports):
    for rep in reports.values():
        for r in rep.records:
            assert r.anchor and "§" not in r.anchor and "eq" not in r.anchor.lower().split()
