"""Service configuration: JSON file plus environment overrides.

Example config file:

    {
      "storage_path": "./data",
      "port": 8080,
      "host": "127.0.0.1",
      "durable": true,
      "snapshot_every": 1000,
      "defaults": {
        "initial_rating": 1000.0,
        "k_numerator": 40.0,
        "k_decay": 0.05,
        "yellow_threshold": 1000.0,
        "blue_threshold": 1200.0,
        "competence_threshold": 1100.0,
        "review_quorum": 3,
        "target_success": 0.65,
        "fit_weights": [0.5, 0.3, 0.2]
      }
    }

``PEERLEARN_PORT`` and ``PEERLEARN_STORAGE`` override the file.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .domain import OfferingConfig
from .errors import ConfigError


@dataclass
class ServiceConfig:
    storage_path: str = "./data"
    port: int = 8080
    host: str = "127.0.0.1"
    durable: bool = True
    snapshot_every: int = 1000  # events between snapshot compactions
    defaults: OfferingConfig = field(default_factory=OfferingConfig)

    @classmethod
    def load(cls, path: Optional[str] = None) -> "ServiceConfig":
        data: dict = {}
        if path is not None:
            try:
                data = json.loads(Path(path).read_text(encoding="utf-8"))
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {path}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config file is not valid JSON: {exc}") from None
        raw_defaults = data.get("defaults", {})
        if "fit_weights" in raw_defaults:
            raw_defaults["fit_weights"] = tuple(raw_defaults["fit_weights"])
        try:
            defaults = OfferingConfig(**raw_defaults)
        except TypeError as exc:
            raise ConfigError(f"bad defaults section: {exc}") from None
        defaults.validate()
        config = cls(
            storage_path=data.get("storage_path", "./data"),
            port=int(data.get("port", 8080)),
            host=data.get("host", "127.0.0.1"),
            durable=bool(data.get("durable", True)),
            snapshot_every=int(data.get("snapshot_every", 1000)),
            defaults=defaults,
        )
        if os.environ.get("PEERLEARN_PORT"):
            config.port = int(os.environ["PEERLEARN_PORT"])
        if os.environ.get("PEERLEARN_STORAGE"):
            config.storage_path = os.environ["PEERLEARN_STORAGE"]
        return config
