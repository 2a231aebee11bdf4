"""Gateway configuration: documented key=value file, env override.

Recognized keys: host, port, block_interval, authority_count,
pod_store_path, replica_store_path, chain_store_path, outbox_path.
The COVCERT_CONFIG environment variable overrides the config file path.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

ENV_VAR = "COVCERT_CONFIG"


@dataclass
class GatewayConfig:
    host: str = "127.0.0.1"
    port: int = 8470
    block_interval: float = 1.0
    authority_count: int = 5
    pod_store_path: str | None = None
    replica_store_path: str | None = None
    chain_store_path: str | None = None
    outbox_path: str | None = None

    @classmethod
    def load(cls, path: str | None = None) -> "GatewayConfig":
        path = os.environ.get(ENV_VAR, path)
        cfg = cls()
        if path is None or not os.path.exists(path):
            return cfg
        with open(path, encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#") or "=" not in line:
                    continue
                key, value = (part.strip() for part in line.split("=", 1))
                if key in ("port", "authority_count"):
                    setattr(cfg, key, int(value))
                elif key == "block_interval":
                    cfg.block_interval = float(value)
                elif key in (
                    "host",
                    "pod_store_path",
                    "replica_store_path",
                    "chain_store_path",
                    "outbox_path",
                ):
                    setattr(cfg, key, value or None)
        return cfg
