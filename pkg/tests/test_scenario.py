"""Scenario scripts: parsing, execution, expected-error steps, reports."""

import pytest

from remotelab import errors as err
from remotelab.gateway.scenario import (
    ScenarioRunner,
    load_scenario,
    parse_scenario,
    run_scenario,
)
from remotelab.scenarios import scenario_path

from conftest import T0, OPEN_FIELD


def scenario(actions, name="t", seed=1):
    return parse_scenario({"name": name, "seed": seed, "actions": actions})


BASIC = [
    {"at": T0},
    {"add_student": {"id": "s1", "name": "Casey"}},
    {"add_robot": {"id": "r1", "firmware_mb": 400}},
    {"add_field": {"id": "f1", "rows": OPEN_FIELD}},
]


# --- parsing --------------------------------------------------------------

def test_parse_rejects_unknown_and_malformed_actions():
    with pytest.raises(err.ScenarioParseError):
        scenario([{"frobnicate": {}}])
    with pytest.raises(err.ScenarioParseError):
        scenario([{"at": T0, "advance": 5}])       # two keys in one action
    with pytest.raises(err.ScenarioParseError):
        parse_scenario({"name": "x"})              # no actions at all


def test_bundled_scripts_load():
    sc = load_scenario(scenario_path("class13"))
    assert sc.name == "class13"
    assert len(sc.actions) > 50


# --- execution ------------------------------------------------------------

def test_happy_path_report_is_pass():
    sc = scenario(BASIC + [
        {"reserve": {"id": "res1", "student": "s1", "robots": ["r1"],
                     "start": T0 + 900, "duration": 60, "field": "f1"}},
        {"advance": 2000},
        {"assert_reservation": {"id": "res1", "state": "Active"}},
        {"assert_robot": {"id": "r1", "state": "Active",
                          "firmware_version": 2}},
        {"advance": 3000},
        {"assert_reservation": {"id": "res1", "state": "Completed"}},
        {"assert_counts": {"reservations": 1, "Completed": 1}},
        {"assert_no_overlaps": {}},
        {"assert_invariants": {}},
        {"assert_replay": {}},
    ])
    report = ScenarioRunner(sc).run()
    assert report.ok
    assert report.text().endswith("result: PASS\n")


def test_expected_errors_pass_and_unexpected_ones_fail():
    sc = scenario(BASIC + [
        {"reserve": {"id": "res1", "student": "s1", "robots": ["r1"],
                     "start": T0 + 900, "duration": 60, "field": "f1"}},
        {"reserve": {"id": "res2", "student": "s1", "robots": ["r1"],
                     "start": T0 + 900, "duration": 60, "field": "f1",
                     "expect_error": "Conflict"}},
        {"reserve": {"id": "res3", "student": "s1", "robots": ["r1"],
                     "start": T0 + 900, "duration": 60, "field": "f1",
                     "expect_error": "QuotaExceeded"}},   # actually a Conflict
    ])
    report = ScenarioRunner(sc).run()
    assert [s.ok for s in report.steps[-3:]] == [True, True, False]
    assert not report.ok
    assert report.text().endswith("result: FAIL\n")


def test_failed_assertions_do_not_halt_the_run():
    sc = scenario(BASIC + [
        {"assert_robot": {"id": "r1", "state": "Fault"}},
        {"assert_robot": {"id": "r1", "state": "Idle"}},
    ])
    report = ScenarioRunner(sc).run()
    assert [s.ok for s in report.steps[-2:]] == [False, True]


def test_time_at_step_reconstructs_the_clock():
    sc = scenario([{"at": T0}, {"advance": 100}, {"advance": 50},
                   {"at": T0 + 1000}])
    runner = ScenarioRunner(sc)
    assert runner.time_at_step(0) == 0
    assert runner.time_at_step(1) == T0
    assert runner.time_at_step(3) == T0 + 150
    assert runner.time_at_step(4) == T0 + 1000


def test_runs_are_deterministic():
    a = run_scenario(scenario_path("class13"))
    b = run_scenario(scenario_path("class13"))
    assert a.text() == b.text()


def test_class13_passes_wholesale():
    report = run_scenario(scenario_path("class13"))
    assert report.ok, report.text()
