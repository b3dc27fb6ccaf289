"""Tuning configuration: the JSON file binding tuner output to the signer.

One file carries, per parameter set, the fusion shape, the padding scheme,
the per-kernel hash-backend row, and the relax toggle, plus the global
scratch budget and worker width. Values round-trip losslessly and are
re-validated against the executor's capacity rules on load.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .backends import KERNELS, BackendSelection
from .banksim import PaddingScheme
from .errors import ConfigError, FormatError
from .params import PARAMETER_SETS, derive
from .tuner import (
    DEFAULT_SEME,
    FusionCandidate,
    TuneInput,
    padding_solve,
    tree_tune,
)
from .vexec import MAX_LANES, FusedSetLayout

ENV_CONFIG_PATH = "HERO_SIGN_CONFIG"
DEFAULT_WORKERS = 4


@dataclass
class SetConfig:
    fusion: FusionCandidate
    padding: PaddingScheme
    backends: dict[str, str]
    relax: bool


@dataclass
class TuningConfig:
    seme_per_block: int = DEFAULT_SEME
    worker_width: int = DEFAULT_WORKERS
    sets: dict[str, SetConfig] = field(default_factory=dict)

    @classmethod
    def default(cls, seme: int = DEFAULT_SEME, alpha: float = 0.5) -> "TuningConfig":
        selection = BackendSelection.default()
        sets = {}
        for set_id in PARAMETER_SETS:
            p = derive(set_id)
            best = tree_tune(TuneInput(p, seme_per_block=seme, alpha=alpha)).best
            sets[set_id] = SetConfig(
                fusion=best,
                padding=padding_solve(p.n),
                backends=selection.row(set_id),
                relax=(set_id == "256f"),
            )
        return cls(seme_per_block=seme, sets=sets)

    def layout_for(self, set_id: str) -> FusedSetLayout:
        p = derive(set_id)
        return FusedSetLayout.from_candidate(self.sets[set_id].fusion, p)

    def selection(self) -> BackendSelection:
        return BackendSelection.from_rows(
            {set_id: cfg.backends for set_id, cfg in self.sets.items()}
        )

    def validate(self) -> None:
        """Executor-capacity and schema checks on every stored value."""
        if self.worker_width < 1:
            raise ConfigError(f"worker width must be >= 1, got {self.worker_width}")
        if set(self.sets) != set(PARAMETER_SETS):
            raise ConfigError(
                f"config must cover exactly {sorted(PARAMETER_SETS)}, got {sorted(self.sets)}"
            )
        for set_id, cfg in self.sets.items():
            p = derive(set_id)
            c = cfg.fusion
            layout = FusedSetLayout.from_candidate(c, p)  # checks lane/tree shape
            if layout.lanes_per_set > MAX_LANES:
                raise ConfigError(f"{set_id}: {layout.lanes_per_set} lanes > {MAX_LANES}")
            scratch = c.sets_fused * c.trees_per_set * p.fors_t * p.n
            if not cfg.relax and scratch > self.seme_per_block:
                raise ConfigError(
                    f"{set_id}: fusion needs {scratch} scratch bytes, "
                    f"budget {self.seme_per_block}"
                )
            if cfg.relax and scratch // 2 > self.seme_per_block:
                raise ConfigError(f"{set_id}: relaxed fusion exceeds scratch budget")
            if cfg.padding.access_bytes != p.n:
                raise ConfigError(
                    f"{set_id}: padding solved for {cfg.padding.access_bytes}-byte "
                    f"accesses, set uses {p.n}"
                )
            unknown = set(cfg.backends) - set(KERNELS)
            if unknown:
                raise ConfigError(f"{set_id}: unknown kernels {sorted(unknown)}")
        self.selection()  # validates totality and backend names

    # -- serialization ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "seme_per_block": self.seme_per_block,
            "worker_width": self.worker_width,
            "sets": {
                set_id: {
                    "fusion": {
                        "lanes_per_set": cfg.fusion.lanes_per_set,
                        "sets_fused": cfg.fusion.sets_fused,
                        "trees_per_set": cfg.fusion.trees_per_set,
                        "lane_utilization": cfg.fusion.lane_utilization,
                        "scratch_utilization": cfg.fusion.scratch_utilization,
                        "sync_score": cfg.fusion.sync_score,
                    },
                    "padding": {
                        "access_bytes": cfg.padding.access_bytes,
                        "banks_per_access": cfg.padding.banks_per_access,
                        "lane_interval": cfg.padding.lane_interval,
                        "rows_per_region": cfg.padding.rows_per_region,
                    },
                    "backends": dict(cfg.backends),
                    "relax": cfg.relax,
                }
                for set_id, cfg in sorted(self.sets.items())
            },
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TuningConfig":
        try:
            sets = {}
            for set_id, raw in data["sets"].items():
                sets[set_id] = SetConfig(
                    fusion=FusionCandidate(**raw["fusion"]),
                    padding=PaddingScheme(**raw["padding"]),
                    backends=dict(raw["backends"]),
                    relax=bool(raw["relax"]),
                )
            cfg = cls(
                seme_per_block=int(data["seme_per_block"]),
                worker_width=int(data["worker_width"]),
                sets=sets,
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"malformed tuning config: {exc!r}") from exc
        cfg.validate()
        return cfg

    def save(self, path: "str | Path") -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: "str | Path") -> "TuningConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise FormatError(f"config {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def resolve_config(path: "str | None" = None) -> TuningConfig:
    """Explicit path, else the environment override, else built-in defaults."""
    path = path or os.environ.get(ENV_CONFIG_PATH)
    if path:
        return TuningConfig.load(path)
    return TuningConfig.default()
