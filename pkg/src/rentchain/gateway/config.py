"""Structured platform configuration, loadable from a JSON file."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..offchain import DEFAULT_MAX_PHOTO_BYTES

CHAIN_SERVICE = "chain"
RECORDS_SERVICE = "records"


@dataclass
class PlatformConfig:
    data_dir: str = "./rentchain-data"
    host: str = "127.0.0.1"
    port: int = 8430
    # file layout under data_dir unless overridden with absolute paths
    wallet_root: str = "wallets"
    db_dir: str = "offchain"
    db_keyfile: str = "offchain/master.key"
    ca_keyfile: str = "ca/root.json"
    ledger_log: str = "ledger/rental-channel.log"
    notifier_log: str = "notifications.jsonl"
    # services hosted by this process; both by default (Fig-1 topology in one process)
    services: list[str] = field(default_factory=lambda: [CHAIN_SERVICE, RECORDS_SERVICE])
    auth_mode: str = "simulated"  # simulated | external
    auth_secret: str = "rentchain-dev-secret"
    token_ttl_seconds: int = 3600
    channel: str = "rental-channel"
    read_org: str = "Org2"
    write_org: str = "Org1"
    paynet_seed: int = 7
    latency_range: tuple[float, float] = (1.0, 60.0)
    initial_funding: dict = field(default_factory=lambda: {"USDC": 10_000_000000, "USDT": 10_000_000000})
    # simulated-time origin and the wall-clock multiplier used by `serve`
    start_time: str = "2024-01-01T00:00:00+00:00"
    time_scale: float = 0.0  # 0 = time advances only through the admin endpoint
    default_payment_deadline_hours: float = 48.0
    max_photo_bytes: int = DEFAULT_MAX_PHOTO_BYTES

    def path(self, name: str) -> Path:
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.data_dir) / p

    @classmethod
    def load(cls, path: Path) -> "PlatformConfig":
        data = json.loads(Path(path).read_text())
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(**data)
        if isinstance(cfg.latency_range, list):
            cfg.latency_range = tuple(cfg.latency_range)
        return cfg

    def dump(self, path: Path) -> None:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data["latency_range"] = list(self.latency_range)
        Path(path).write_text(json.dumps(data, indent=2, sort_keys=True))
