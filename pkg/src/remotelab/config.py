"""Tunable constants, loadable from a TOML config file.

Sections mirror the subsystems: [store], [scheduler], [provisioner],
[overlay], [sim], [auth]. Anything omitted keeps its default.
"""

from __future__ import annotations

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, replace
from pathlib import Path


@dataclass(frozen=True)
class StoreConfig:
    directory: str = ""              # empty = in-memory
    snapshot_every: int = 1000


@dataclass(frozen=True)
class SchedulerConfig:
    slot_grid_min: int = 15
    max_slot_min: int = 120
    default_quota_min: int = 240


@dataclass(frozen=True)
class ProvisionerConfig:
    node_boot_s: int = 60
    image_pull_s: int = 20
    container_start_s: int = 5
    flash_base_s: int = 120
    flash_rate_mb_s: int = 40
    idle_grace_s: int = 15 * 60
    max_nodes: int = 32
    workspace_cpu: int = 2
    workspace_ram_mb: int = 4096
    # template for auto-scaled nodes: 8 workspaces of (2 cpu, 4 GiB) each
    node_template_cpu: int = 16
    node_template_ram_mb: int = 32768
    node_template_gpu: bool = True
    node_template_rate_cents: int = 90


@dataclass(frozen=True)
class OverlayConfig:
    subnet: str = "10.80.0.0/16"
    stale_after_s: int = 90
    evict_after_s: int = 300
    heartbeat_s: int = 30


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.1
    v_max: float = 0.5
    omega_max: float = 2.0
    queue_depth: int = 16
    battery_fault_pct: float = 10.0
    drive_drain_per_s: float = 0.5     # (0.05 * 10) applied per dt while moving
    idle_drain_per_s: float = 0.05     # (0.005 * 10) applied per dt otherwise
    default_seed: int = 0


@dataclass(frozen=True)
class AuthConfig:
    admin_token: str = "admin-secret"


@dataclass(frozen=True)
class LabConfig:
    store: StoreConfig = field(default_factory=StoreConfig)
    scheduler: SchedulerConfig = field(default_factory=SchedulerConfig)
    provisioner: ProvisionerConfig = field(default_factory=ProvisionerConfig)
    overlay: OverlayConfig = field(default_factory=OverlayConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    auth: AuthConfig = field(default_factory=AuthConfig)


_SECTIONS = {
    "store": StoreConfig,
    "scheduler": SchedulerConfig,
    "provisioner": ProvisionerConfig,
    "overlay": OverlayConfig,
    "sim": SimConfig,
    "auth": AuthConfig,
}


def load_config(path: str | Path) -> LabConfig:
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    cfg = LabConfig()
    updates = {}
    for name, cls in _SECTIONS.items():
        if name in raw:
            unknown = set(raw[name]) - {f for f in cls.__dataclass_fields__}
            if unknown:
                raise ValueError(f"[{name}] has unknown keys: {sorted(unknown)}")
            updates[name] = replace(getattr(cfg, name), **raw[name])
    return replace(cfg, **updates)
