"""Declarative scenario scripts: a timed list of actions and assertions
run against a fresh store with a controlled clock.

Scripts are YAML: {name, seed, actions: [ {action: {...}}, ... ]}.
Every action executes at the script's current clock; `at` and `advance`
move the clock (and drive the lab through every due transition). Actions
reference entities by explicit ids so a script can be resumed mid-way
against a recovered store, which is how crash-recovery is exercised.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field

import yaml

from .. import errors as err
from ..model import DriveCommand, FaultKind, TimeSlot
from ..service import Lab
from ..state import BOOKED_STATES

MUTATORS = {
    "at", "advance", "add_student", "add_robot", "add_field", "add_node",
    "add_camera", "reserve", "cancel", "provision_workspace",
    "deprovision_workspace", "inject_fault", "spawn_agent", "step_sim",
    "dispatch", "sweep", "heartbeat_agents", "reprovision",
}
ASSERTIONS = {
    "assert_reservation", "assert_robot", "assert_workspace", "assert_quota",
    "assert_cost", "assert_counts", "assert_available", "assert_no_overlaps",
    "assert_invariants", "assert_replay", "assert_peer",
}


@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    actions: tuple[dict, ...]


@dataclass
class StepResult:
    index: int
    description: str
    ok: bool
    detail: str = ""
    last_seq: int = 0

    def line(self) -> str:
        status = "ok" if self.ok else "FAIL"
        suffix = f" ({self.detail})" if self.detail else ""
        return f"step {self.index:03d} {status:4s} {self.description}{suffix}"


@dataclass
class ScenarioReport:
    name: str
    steps: list[StepResult] = field(default_factory=list)
    invariant_violations: list[str] = field(default_factory=list)
    replay_ok: bool = True

    @property
    def ok(self) -> bool:
        return (all(s.ok for s in self.steps)
                and not self.invariant_violations and self.replay_ok)

    def text(self) -> str:
        lines = [f"scenario {self.name}"]
        lines += [s.line() for s in self.steps]
        lines.append(f"invariant sweep: "
                     f"{'clean' if not self.invariant_violations else 'VIOLATIONS'}")
        lines += [f"  {v}" for v in self.invariant_violations]
        lines.append(f"replay check: {'match' if self.replay_ok else 'MISMATCH'}")
        lines.append(f"result: {'PASS' if self.ok else 'FAIL'}")
        return "\n".join(lines) + "\n"


def load_scenario(path) -> Scenario:
    with open(path, encoding="utf-8") as fh:
        raw = yaml.safe_load(fh)
    return parse_scenario(raw)


def parse_scenario(raw: dict) -> Scenario:
    if not isinstance(raw, dict) or "actions" not in raw:
        raise err.ScenarioParseError(0, "script must map name/seed/actions")
    actions = raw["actions"] or []
    for i, action in enumerate(actions):
        if not isinstance(action, dict) or len(action) != 1:
            raise err.ScenarioParseError(i, "each action is a single-key map")
        key = next(iter(action))
        if key not in MUTATORS | ASSERTIONS:
            raise err.ScenarioParseError(i, f"unknown action {key!r}")
    return Scenario(name=raw.get("name", "unnamed"),
                    seed=int(raw.get("seed", 0)),
                    actions=tuple(actions))


class ScenarioRunner:
    def __init__(self, scenario: Scenario, lab: Lab | None = None):
        self.scenario = scenario
        self.lab = lab if lab is not None else Lab(
            token_rng=random.Random(scenario.seed))
        self.t = 0

    def time_at_step(self, step: int) -> int:
        """Scenario clock just before `step`, from the script alone."""
        t = 0
        for action in self.scenario.actions[:step]:
            key, args = next(iter(action.items()))
            if key == "at":
                t = int(args)
            elif key == "advance":
                t += int(args)
        return t

    def run(self, start_step: int = 0) -> ScenarioReport:
        report = ScenarioReport(name=self.scenario.name)
        self.t = self.time_at_step(start_step)
        for i in range(start_step, len(self.scenario.actions)):
            action = self.scenario.actions[i]
            key, args = next(iter(action.items()))
            args = args if isinstance(args, dict) else args
            try:
                detail = self._execute(key, args)
                result = StepResult(index=i, description=key, ok=True,
                                    detail=detail or "",
                                    last_seq=self.lab.store.last_seq)
            except err.ScenarioAssertionFailed as exc:
                result = StepResult(index=i, description=key, ok=False,
                                    detail=str(exc),
                                    last_seq=self.lab.store.last_seq)
            except err.LabError as exc:
                expected = args.get("expect_error") if isinstance(args, dict) \
                    else None
                if expected and type(exc).__name__ == expected:
                    result = StepResult(index=i, description=key, ok=True,
                                        detail=f"rejected: {expected}",
                                        last_seq=self.lab.store.last_seq)
                else:
                    result = StepResult(index=i, description=key, ok=False,
                                        detail=f"{type(exc).__name__}: {exc}",
                                        last_seq=self.lab.store.last_seq)
            report.steps.append(result)
        report.invariant_violations = self.lab.invariant_violations()
        report.replay_ok = self.lab.replay_matches_live()
        return report

    # --- action execution -------------------------------------------------

    def _execute(self, key: str, args) -> str:
        lab, t = self.lab, self.t
        if key == "at":
            self.t = int(args)
            lab.advance_to(self.t)
            return f"t={self.t}"
        if key == "advance":
            self.t += int(args)
            lab.advance_to(self.t)
            return f"t={self.t}"
        if key == "add_student":
            token = args.get("token", f"tok-{self.scenario.seed}-{args['id']}")
            sid = args["id"]
            lab.store.append("student_added", {
                "id": sid, "display_name": args.get("name", sid),
                "max_tier": int(args.get("tier", 3)),
                "weekly_quota_min": int(args.get("quota", 240)),
            }, t)
            lab.store.append("credential_issued", {
                "student_id": sid,
                "token_hash": hashlib.sha256(token.encode()).hexdigest(),
            }, t)
            return sid
        if key == "add_robot":
            lab.add_robot(args.get("model", "labbot"),
                          args.get("caps", ["diff_drive", "lidar", "camera",
                                            "wifi"]),
                          t, robot_id=args["id"],
                          firmware_size_mb=int(args.get("firmware_mb", 4000)),
                          wheel_bias=float(args.get("wheel_bias", 0.0)))
            return args["id"]
        if key == "add_field":
            return lab.add_field(args.get("name", args["id"]), args["rows"],
                                 t, field_id=args["id"])
        if key == "add_node":
            return lab.add_node(int(args["cpu"]), int(args["ram"]),
                                bool(args.get("gpu", False)),
                                int(args.get("rate", 90)), t,
                                node_id=args["id"])
        if key == "add_camera":
            lab.add_camera(args["id"], args["field"], tuple(args["fov"]))
            return args["id"]
        if key == "reserve":
            slot = TimeSlot(start=int(args["start"]),
                            duration_min=int(args["duration"]))
            rid = args.get("id", f"res-{lab.store.next_seq:06d}")
            lab.store.append("reservation_requested", {
                "id": rid, "student_id": args["student"],
                "robot_ids": sorted(args["robots"]),
                "start": slot.start, "duration_min": slot.duration_min,
                "field_layout_id": args["field"],
            }, t)
            return rid
        if key == "cancel":
            lab.cancel(args["reservation"],
                       args.get("actor", "admin"), t)
            return args["reservation"]
        if key == "provision_workspace":
            ws = lab.provision_workspace(args["student"],
                                         bool(args.get("gpu", False)), t)
            return ws.id
        if key == "deprovision_workspace":
            ws = lab.store.state.live_workspace_of(args["student"])
            if ws is None:
                raise err.UnknownWorkspace(args["student"])
            lab.deprovision_workspace(ws.id, t)
            return ws.id
        if key == "inject_fault":
            lab.inject_fault(args["robot"], FaultKind(args["kind"]), t)
            return f"{args['robot']} {args['kind']}"
        if key == "spawn_agent":
            lab.spawn_agent(args["robot"], args["field"],
                            int(args.get("seed", self.scenario.seed)), t)
            return args["robot"]
        if key == "step_sim":
            lab.step_sim(int(args), t) if not isinstance(args, dict) else \
                lab.step_sim(int(args["ticks"]), t)
            return ""
        if key == "dispatch":
            lab.dispatch(args["robot"],
                         DriveCommand(v=float(args.get("v", 0.0)),
                                      omega=float(args.get("w", 0.0)),
                                      duration_ticks=int(args.get("ticks", 1))),
                         args["student"], t)
            return ""
        if key == "reprovision":
            lab.start_reprovision(args["robot"], t)
            return args["robot"]
        if key == "sweep":
            moves = lab.sweep(t)
            return f"{len(moves)} transitions"
        if key == "heartbeat_agents":
            lab.heartbeat_agents(t)
            return ""
        return self._assert(key, args or {})

    # --- assertions -------------------------------------------------------

    def _assert(self, key: str, args: dict) -> str:
        lab = self.lab
        state = lab.store.state

        def check(cond: bool, msg: str) -> None:
            if not cond:
                raise err.ScenarioAssertionFailed(key, msg)

        if key == "assert_reservation":
            res = state.reservations.get(args["id"])
            check(res is not None, f"no reservation {args['id']}")
            check(res.state.value == args["state"],
                  f"{args['id']} is {res.state.value}, wanted {args['state']}")
            return f"{args['id']}={args['state']}"
        if key == "assert_robot":
            robot = state.robots.get(args["id"])
            check(robot is not None, f"no robot {args['id']}")
            if "state" in args:
                check(robot.state.value == args["state"],
                      f"{args['id']} is {robot.state.value}")
            if "firmware_version" in args:
                check(robot.firmware_version == args["firmware_version"],
                      f"firmware {robot.firmware_version}")
            if "battery" in args:
                check(robot.battery_pct == args["battery"],
                      f"battery {robot.battery_pct}")
            return args["id"]
        if key == "assert_workspace":
            ws = state.live_workspace_of(args["student"])
            if args.get("state") == "absent":
                check(ws is None, f"{args['student']} still has {ws}")
                return "absent"
            check(ws is not None, f"no live workspace for {args['student']}")
            check(ws.state.value == args["state"],
                  f"workspace is {ws.state.value}")
            return ws.id
        if key == "assert_quota":
            got = lab.quota_remaining(args["student"], int(args["week_of"]))
            check(got == int(args["equals"]),
                  f"quota {got} != {args['equals']}")
            return f"{args['student']}={got}"
        if key == "assert_cost":
            total, breakdown = lab.cost_report(int(args["from"]),
                                               int(args["to"]))
            if "total" in args:
                check(total == int(args["total"]),
                      f"total {total} != {args['total']}")
            if "nodes_billed" in args:
                check(len(breakdown) == int(args["nodes_billed"]),
                      f"{len(breakdown)} nodes billed")
            return f"total={total}"
        if key == "assert_counts":
            by_state: dict[str, int] = {}
            for r in state.reservations.values():
                by_state[r.state.value] = by_state.get(r.state.value, 0) + 1
            for want_state, want_n in args.items():
                if want_state == "reservations":
                    check(len(state.reservations) == int(want_n),
                          f"{len(state.reservations)} reservations")
                else:
                    check(by_state.get(want_state, 0) == int(want_n),
                          f"{by_state.get(want_state, 0)} {want_state}")
            return ",".join(f"{k}={v}" for k, v in sorted(by_state.items()))
        if key == "assert_available":
            got = lab.available_robots(
                TimeSlot(start=int(args["start"]),
                         duration_min=int(args["duration"])),
                frozenset(args.get("caps", [])))
            check(got == list(args["equals"]),
                  f"available {got} != {args['equals']}")
            return str(len(got))
        if key == "assert_no_overlaps":
            booked = [r for r in state.reservations.values()
                      if r.state in BOOKED_STATES]
            for i, a in enumerate(booked):
                for b in booked[i + 1:]:
                    check(not (set(a.robot_ids) & set(b.robot_ids)
                               and a.slot.overlaps(b.slot)),
                          f"{a.id} overlaps {b.id}")
            return f"{len(booked)} booked"
        if key == "assert_invariants":
            bad = lab.invariant_violations()
            check(not bad, "; ".join(bad))
            return "clean"
        if key == "assert_replay":
            check(lab.replay_matches_live(), "replay diverges from live state")
            return "match"
        if key == "assert_peer":
            peer = state.peers.get(args["id"])
            check(peer is not None, f"no peer {args['id']}")
            check(peer.status.value == args["status"],
                  f"{args['id']} is {peer.status.value}")
            return args["id"]
        raise err.ScenarioParseError(0, f"unknown assertion {key!r}")


def run_scenario(path, lab: Lab | None = None) -> ScenarioReport:
    scenario = load_scenario(path)
    return ScenarioRunner(scenario, lab).run()
