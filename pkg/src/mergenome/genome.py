"""The 14-gene merge genome: bounds, per-tensor ratio derivation, and the
evolutionary variation operators (spherical crossover, Gaussian mutation)."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .container import ATTENTION, EMBEDDING, FFN
from .errors import InputFormatError

GENE_NAMES = (
    "global_ratio",
    "attn_ratio",
    "ffn_ratio",
    "embed_ratio",
    "density_a",
    "density_b",
    "block_0_ratio",
    "block_1_ratio",
    "block_2_ratio",
    "block_3_ratio",
    "block_4_ratio",
    "block_5_ratio",
    "mri_trust",
    "merge_method_weight",
)

GENE_BOUNDS: dict[str, tuple[float, float]] = {
    **{name: (0.05, 0.95) for name in GENE_NAMES[:4]},
    "density_a": (0.30, 1.00),
    "density_b": (0.30, 1.00),
    **{f"block_{i}_ratio": (0.05, 0.95) for i in range(6)},
    "mri_trust": (0.0, 1.0),
    "merge_method_weight": (0.0, 1.0),
}

# Narrower spreads used only when seeding a population around a warm-start
# genome; the normative bounds above stay in force everywhere.
INIT_SPREAD: dict[str, float] = {
    "global_ratio": 0.4,
    "attn_ratio": 0.6,
    "ffn_ratio": 0.6,
    "embed_ratio": 0.6,
    "density_a": 0.7,
    "density_b": 0.7,
    **{f"block_{i}_ratio": 0.9 for i in range(6)},
    "mri_trust": 1.0,
    "merge_method_weight": 1.0,
}

_LO = np.array([GENE_BOUNDS[n][0] for n in GENE_NAMES])
_HI = np.array([GENE_BOUNDS[n][1] for n in GENE_NAMES])
_WIDTH = _HI - _LO
_INIT_WIDTH = np.array([INIT_SPREAD[n] for n in GENE_NAMES])

RATIO_LO, RATIO_HI = 0.05, 0.95


@dataclass(frozen=True)
class Genome:
    """One complete merge strategy; immutable and cheap to copy."""

    global_ratio: float
    attn_ratio: float
    ffn_ratio: float
    embed_ratio: float
    density_a: float
    density_b: float
    block_0_ratio: float
    block_1_ratio: float
    block_2_ratio: float
    block_3_ratio: float
    block_4_ratio: float
    block_5_ratio: float
    mri_trust: float
    merge_method_weight: float

    def as_array(self) -> np.ndarray:
        return np.array([getattr(self, n) for n in GENE_NAMES], dtype=np.float64)

    @classmethod
    def from_array(cls, values) -> "Genome":
        values = np.asarray(values, dtype=np.float64)
        if values.shape != (len(GENE_NAMES),):
            raise ValueError(f"expected {len(GENE_NAMES)} genes, got shape {values.shape}")
        return cls(**{n: float(v) for n, v in zip(GENE_NAMES, values)})

    def block_ratio(self, block: int) -> float:
        return getattr(self, f"block_{block}_ratio")

    def replace(self, **changes) -> "Genome":
        values = self.to_dict()
        values.update(changes)
        return Genome(**values)

    def to_dict(self) -> dict[str, float]:
        return {n: float(getattr(self, n)) for n in GENE_NAMES}

    @classmethod
    def from_dict(cls, payload: dict) -> "Genome":
        missing = [n for n in GENE_NAMES if n not in payload]
        extra = [k for k in payload if k not in GENE_NAMES]
        if missing or extra:
            raise InputFormatError(
                f"genome JSON must have exactly the 14 gene keys "
                f"(missing: {missing or 'none'}, unexpected: {extra or 'none'})"
            )
        return cls(**{n: float(payload[n]) for n in GENE_NAMES})

    def validate(self) -> None:
        for name in GENE_NAMES:
            lo, hi = GENE_BOUNDS[name]
            value = getattr(self, name)
            if not (lo <= value <= hi) or not math.isfinite(value):
                raise InputFormatError(
                    f"gene {name}={value} outside bounds [{lo}, {hi}]"
                )


assert tuple(f.name for f in fields(Genome)) == GENE_NAMES


def clamp(g: Genome) -> Genome:
    """Project every gene into its bound interval; idempotent."""
    return Genome.from_array(np.clip(g.as_array(), _LO, _HI))


def load_genome(path) -> Genome:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: cannot read genome JSON ({exc})") from exc
    if not isinstance(payload, dict):
        raise InputFormatError(f"{path}: genome JSON must be a flat object")
    g = Genome.from_dict(payload)
    g.validate()
    return g


def save_genome(g: Genome, path) -> None:
    Path(path).write_text(
        json.dumps(g.to_dict(), sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def block_index(layer: int, layer_count: int) -> int:
    """Assign a layer to one of six contiguous depth blocks."""
    if layer_count < 1:
        raise ValueError("layer_count must be >= 1")
    if not 0 <= layer < layer_count:
        raise ValueError(f"layer {layer} out of range [0, {layer_count})")
    return layer * 6 // layer_count


def _clamp_ratio(value: float) -> float:
    return min(max(value, RATIO_LO), RATIO_HI)


def genome_ratio(
    g: Genome, component: str, layer: int | None, layer_count: int
) -> float:
    """Collapse the applicable genes into one mixing ratio for a tensor.

    Attention/ffn layer tensors average the global, component, and block
    genes; other layer tensors average global and block; embeddings and
    non-layer tensors average global and embedding genes.
    """
    if component == EMBEDDING or layer is None:
        return _clamp_ratio((g.global_ratio + g.embed_ratio) / 2.0)
    block = g.block_ratio(block_index(layer, layer_count))
    if component == ATTENTION:
        return _clamp_ratio((g.global_ratio + g.attn_ratio + block) / 3.0)
    if component == FFN:
        return _clamp_ratio((g.global_ratio + g.ffn_ratio + block) / 3.0)
    return _clamp_ratio((g.global_ratio + block) / 2.0)


def slerp_crossover(g1: Genome, g2: Genome, t: float) -> Genome:
    """Spherical interpolation between two genomes in unit-cube coordinates.

    Near-collinear or zero-norm coordinate vectors fall back to linear
    interpolation; the result is clamped to the gene bounds.
    """
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t={t} outside [0, 1]")
    if g1 == g2:
        return clamp(g1)
    v0 = (g1.as_array() - _LO) / _WIDTH
    v1 = (g2.as_array() - _LO) / _WIDTH
    n0, n1 = np.linalg.norm(v0), np.linalg.norm(v1)
    if n0 == 0.0 or n1 == 0.0:
        u = v0 + t * (v1 - v0)
    else:
        omega = math.acos(min(1.0, max(-1.0, float(np.dot(v0, v1) / (n0 * n1)))))
        if omega < 1e-6:
            u = v0 + t * (v1 - v0)
        else:
            u = (math.sin((1.0 - t) * omega) * v0 + math.sin(t * omega) * v1) / math.sin(omega)
    return clamp(Genome.from_array(_LO + u * _WIDTH))


def mutate(
    g: Genome,
    sigma: float,
    rng: np.random.Generator,
    spread: np.ndarray | None = None,
) -> Genome:
    """Perturb each gene by Gaussian noise scaled to sigma x gene range.

    `spread` overrides the per-gene scale (used for warm-start seeding).
    Deterministic given the generator state; the result is clamped.
    """
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    widths = _WIDTH if spread is None else np.asarray(spread, dtype=np.float64)
    noise = rng.standard_normal(len(GENE_NAMES))
    return clamp(Genome.from_array(g.as_array() + sigma * widths * noise))


def init_spread_widths() -> np.ndarray:
    return _INIT_WIDTH.copy()


def bound_arrays() -> tuple[np.ndarray, np.ndarray]:
    return _LO.copy(), _HI.copy()


def to_unit_cube(g: Genome) -> np.ndarray:
    """Genome coordinates rescaled so every gene spans [0, 1]."""
    return (g.as_array() - _LO) / _WIDTH


def from_unit_cube(u) -> Genome:
    u = np.asarray(u, dtype=np.float64)
    return clamp(Genome.from_array(_LO + u * _WIDTH))
