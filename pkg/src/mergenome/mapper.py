"""Tensor correspondence between heterogeneous checkpoints: a weighted
type/dimension/parameter compatibility score and constrained greedy matching."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .container import Checkpoint
from .errors import InputFormatError


@dataclass(frozen=True)
class MapperConfig:
    beta1: float = 0.5
    beta2: float = 0.3
    beta3: float = 0.2
    threshold: float = 0.6
    enforce_monotone_layers: bool = True

    def __post_init__(self):
        if not math.isclose(self.beta1 + self.beta2 + self.beta3, 1.0, abs_tol=1e-9):
            raise ValueError("beta weights must sum to 1")
        if self.threshold < 0.0:
            # values above 1 are allowed; they simply disable matching
            raise ValueError("threshold must be >= 0")


@dataclass(frozen=True)
class TensorDesc:
    """What the mapper needs to know about one tensor."""

    name: str
    shape: tuple[int, ...]
    component: str
    layer: int | None

    @property
    def numel(self) -> int:
        return int(np.prod(self.shape, dtype=np.int64)) if self.shape else 1


def type_score(a: TensorDesc, b: TensorDesc) -> float:
    """1 for equal component classes, 0.5 for layer tensors of different
    classes, 0 otherwise."""
    if a.component == b.component:
        return 1.0
    if a.layer is not None and b.layer is not None:
        return 0.5
    return 0.0


def dim_score(a: TensorDesc, b: TensorDesc) -> float:
    """1 for equal shapes; per-axis extent ratio for equal ranks; 0 otherwise."""
    if a.shape == b.shape:
        return 1.0
    if len(a.shape) != len(b.shape):
        return 0.0
    ratios = []
    for ea, eb in zip(a.shape, b.shape):
        if ea == eb:
            ratios.append(1.0)
        elif ea == 0 or eb == 0:
            ratios.append(0.0)
        else:
            ratios.append(min(ea, eb) / max(ea, eb))
    return float(np.mean(ratios))


def param_score(a: TensorDesc, b: TensorDesc) -> float:
    """Element-count ratio; 1 when both tensors are empty."""
    na, nb = a.numel, b.numel
    if na == 0 and nb == 0:
        return 1.0
    if na == 0 or nb == 0:
        return 0.0
    return min(na, nb) / max(na, nb)


def compatibility(a: TensorDesc, b: TensorDesc, cfg: MapperConfig) -> float:
    return (
        cfg.beta1 * type_score(a, b)
        + cfg.beta2 * dim_score(a, b)
        + cfg.beta3 * param_score(a, b)
    )


@dataclass(frozen=True)
class Match:
    name_a: str
    name_b: str
    comp_score: float
    type_score: float
    dim_score: float
    param_score: float


@dataclass
class MatchTable:
    matches: list[Match]
    unmatched_a: list[str] = field(default_factory=list)
    unmatched_b: list[str] = field(default_factory=list)


def describe(ckpt: Checkpoint) -> list[TensorDesc]:
    topo = ckpt.topology
    return [
        TensorDesc(
            name=entry.name,
            shape=entry.shape,
            component=topo.component_of(entry.name),
            layer=topo.layer_of(entry.name),
        )
        for entry in ckpt
    ]


def match_models(a: Checkpoint, b: Checkpoint, cfg: MapperConfig | None = None) -> MatchTable:
    """Greedy one-to-one matching over all candidate pairs above the
    threshold, best compatibility first (ties broken by name pair).  With
    monotone enforcement, accepted layer-tensor matches never cross in depth.
    """
    cfg = cfg or MapperConfig()
    descs_a = describe(a)
    descs_b = describe(b)
    candidates = []
    for da in descs_a:
        for db in descs_b:
            ts = type_score(da, db)
            ds = dim_score(da, db)
            ps = param_score(da, db)
            comp = cfg.beta1 * ts + cfg.beta2 * ds + cfg.beta3 * ps
            if comp >= cfg.threshold:
                candidates.append((comp, da, db, ts, ds, ps))
    candidates.sort(key=lambda c: (-c[0], c[1].name, c[2].name))

    matched_a: set[str] = set()
    matched_b: set[str] = set()
    layer_pairs: list[tuple[int, int]] = []
    matches: list[Match] = []
    for comp, da, db, ts, ds, ps in candidates:
        if da.name in matched_a or db.name in matched_b:
            continue
        if cfg.enforce_monotone_layers and da.layer is not None and db.layer is not None:
            if any((da.layer - la) * (db.layer - lb) < 0 for la, lb in layer_pairs):
                continue
            layer_pairs.append((da.layer, db.layer))
        matched_a.add(da.name)
        matched_b.add(db.name)
        matches.append(Match(da.name, db.name, comp, ts, ds, ps))

    matches.sort(key=lambda m: m.name_a)
    return MatchTable(
        matches=matches,
        unmatched_a=[d.name for d in descs_a if d.name not in matched_a],
        unmatched_b=[d.name for d in descs_b if d.name not in matched_b],
    )


def save_match_table(table: MatchTable, path) -> None:
    payload = {
        "matches": [
            {
                "name_a": m.name_a,
                "name_b": m.name_b,
                "comp_score": m.comp_score,
                "type_score": m.type_score,
                "dim_score": m.dim_score,
                "param_score": m.param_score,
            }
            for m in table.matches
        ],
        "unmatched_a": table.unmatched_a,
        "unmatched_b": table.unmatched_b,
    }
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", "utf-8")


def load_match_table(path) -> MatchTable:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: cannot read match table ({exc})") from exc
    matches = [
        Match(
            m["name_a"],
            m["name_b"],
            float(m["comp_score"]),
            float(m["type_score"]),
            float(m["dim_score"]),
            float(m["param_score"]),
        )
        for m in payload.get("matches", [])
    ]
    return MatchTable(
        matches=matches,
        unmatched_a=list(payload.get("unmatched_a", [])),
        unmatched_b=list(payload.get("unmatched_b", [])),
    )
