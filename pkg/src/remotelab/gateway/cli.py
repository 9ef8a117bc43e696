"""Command-line entry points.

`labd serve` runs the HTTP gateway with a real-time clock driving the
lab. `labctl` administers the store directly (same config file): add
inventory, run scenarios, render cost reports.
"""

from __future__ import annotations

import sys
import threading
import time
from pathlib import Path

import click

from ..config import LabConfig, load_config
from ..model import Tier
from ..service import Lab


def _load(config_path: str | None) -> LabConfig:
    if config_path:
        return load_config(config_path)
    return LabConfig()


def _lab(config_path: str | None) -> Lab:
    return Lab(_load(config_path))


@click.command()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML config file")
@click.option("--host", default="127.0.0.1")
@click.option("--port", default=8080, type=int)
@click.option("--tick-interval", default=1.0, type=float,
              help="seconds between lab clock ticks")
def labd(config_path, host, port, tick_interval):
    """Run the lab gateway service."""
    import uvicorn

    from .api import create_app

    lab = _lab(config_path)
    app = create_app(lab)

    def clock_loop():
        while True:
            now = int(time.time())
            lab.tick(now)
            if lab.agents:
                lab.step_sim(max(int(tick_interval / lab.config.sim.dt), 1),
                             now)
                lab.heartbeat_agents(now)
            time.sleep(tick_interval)

    threading.Thread(target=clock_loop, daemon=True).start()
    uvicorn.run(app, host=host, port=port, log_level="warning")


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True),
              default=None, help="TOML config file")
@click.pass_context
def labctl(ctx, config_path):
    """Administer the lab store."""
    ctx.obj = config_path


@labctl.group()
def student():
    """Student accounts."""


@student.command("add")
@click.argument("name")
@click.option("--tier", default=3, type=click.IntRange(1, 3))
@click.option("--quota", default=None, type=int, help="weekly minutes")
@click.option("--id", "student_id", default="")
@click.pass_obj
def student_add(config_path, name, tier, quota, student_id):
    lab = _lab(config_path)
    sid, token = lab.add_student(name, int(time.time()), max_tier=Tier(tier),
                                 weekly_quota_min=quota,
                                 student_id=student_id)
    click.echo(f"student {sid}")
    click.echo(f"token {token}")


@labctl.group()
def robot():
    """Lab robots."""


@robot.command("add")
@click.option("--model", required=True)
@click.option("--caps", default="diff_drive,lidar,camera,wifi",
              help="comma-separated capability set")
@click.option("--firmware-mb", default=4000, type=int)
@click.option("--wheel-bias", default=0.0, type=float)
@click.option("--id", "robot_id", default="")
@click.pass_obj
def robot_add(config_path, model, caps, firmware_mb, wheel_bias, robot_id):
    lab = _lab(config_path)
    r = lab.add_robot(model, caps.split(","), int(time.time()),
                      robot_id=robot_id, firmware_size_mb=firmware_mb,
                      wheel_bias=wheel_bias)
    click.echo(f"robot {r.id}")


@labctl.group()
def node():
    """Compute nodes."""


@node.command("add")
@click.option("--cpu", required=True, type=int)
@click.option("--ram", required=True, type=int, help="MB")
@click.option("--gpu", is_flag=True)
@click.option("--rate", required=True, type=int, help="cents/hour")
@click.option("--id", "node_id", default="")
@click.pass_obj
def node_add(config_path, cpu, ram, gpu, rate, node_id):
    lab = _lab(config_path)
    nid = lab.add_node(cpu, ram, gpu, rate, int(time.time()),
                       node_id=node_id)
    click.echo(f"node {nid}")


@labctl.group()
def scenario():
    """Scenario scripts."""


@scenario.command("run")
@click.argument("script", type=click.Path(exists=True))
@click.option("--out", "out_dir", type=click.Path(), default=None,
              help="also write report.txt (plus telemetry figures if the "
                   "scenario drove any robots) into this directory")
@click.pass_obj
def scenario_run(config_path, script, out_dir):
    from .scenario import ScenarioRunner, load_scenario

    sc = load_scenario(script)
    runner = ScenarioRunner(sc)
    report = runner.run()
    click.echo(report.text(), nl=False)
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report.text())
        if runner.lab.telemetry and any(runner.lab.telemetry.values()):
            from ..report import write_telemetry_report
            layouts = list(runner.lab.store.state.field_layouts.values())
            write_telemetry_report(runner.lab.telemetry,
                                   layouts[0] if layouts else None, out)
    sys.exit(0 if report.ok else 1)


@labctl.group()
def report():
    """Rendered reports (CSV + figures)."""


@report.command("cost")
@click.option("--from", "from_ts", required=True, type=int)
@click.option("--to", "to_ts", required=True, type=int)
@click.option("--out", "out_dir", type=click.Path(), default="reports")
@click.pass_obj
def report_cost(config_path, from_ts, to_ts, out_dir):
    from ..report import write_cost_report

    lab = _lab(config_path)
    csv_path, png_path = write_cost_report(lab.store.state, from_ts, to_ts,
                                           out_dir)
    total, _ = lab.cost_report(from_ts, to_ts)
    click.echo(f"total {total} cents")
    click.echo(f"wrote {csv_path} and {png_path}")
