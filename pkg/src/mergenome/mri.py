"""Per-tensor diagnostic importance: static weight statistics, probe-based
activation responses, their alpha-weighted combination, and the normalized
parent ratio used as a soft merge prior."""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .container import Checkpoint, ModelTopology, validate_pair
from .errors import InputFormatError, NoSharedTensorsError, ProbeDumpError

HISTOGRAM_BINS = 64
GENERIC = "GENERIC"
PROBE_CATEGORIES = (
    "REASONING",
    "CODE",
    "LOGIC",
    "MULTILINGUAL_KO",
    "MULTILINGUAL_EN",
    GENERIC,
)

_PROBE_RE = re.compile(r"^probe/([A-Za-z0-9_]+)/layer_(\d+)$")

# Ratios are snapped to this grid so that swapping the parents maps a ratio
# r to exactly 1 - r in floating point.
_RATIO_GRID = float(1 << 24)


@dataclass(frozen=True)
class StaticStats:
    """Bounded, dimensionless statistics of one weight tensor."""

    entropy: float
    variance_score: float
    capped_norm: float
    static_score: float


def static_score(values: np.ndarray) -> StaticStats:
    """Entropy / variance / capped-norm statistics, each normalized to [0, 1].

    Entropy uses a 64-bin histogram of magnitudes spanning [0, max|v|];
    variance is squashed by v/(1+v); the l2 norm is divided by sqrt(numel)
    and capped at 1.  All three are invariant to element order.
    """
    flat = np.asarray(values, dtype=np.float64).ravel()
    if flat.size == 0:
        raise ValueError("cannot score an empty tensor")
    flat = np.sort(flat)  # fixed summation order: exact under permutation
    magnitudes = np.abs(flat)
    max_abs = float(np.max(magnitudes))
    if max_abs == 0.0:
        return StaticStats(0.0, 0.0, 0.0, 0.0)
    counts, _ = np.histogram(magnitudes, bins=HISTOGRAM_BINS, range=(0.0, max_abs))
    probs = counts[counts > 0] / flat.size
    entropy = float(-(probs * np.log(probs)).sum() / math.log(HISTOGRAM_BINS))
    entropy = min(max(entropy, 0.0), 1.0)
    variance = float(np.var(flat))
    variance_score = variance / (1.0 + variance)
    capped_norm = min(1.0, float(np.linalg.norm(flat)) / math.sqrt(flat.size))
    static = (entropy + variance_score + capped_norm) / 3.0
    return StaticStats(entropy, variance_score, capped_norm, static)


def _cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = float(np.linalg.norm(a)), float(np.linalg.norm(b))
    if na == 0.0 or nb == 0.0:
        return 0.0
    return min(1.0, max(-1.0, float(np.dot(a, b) / (na * nb))))


def probe_categories(dump: Checkpoint) -> dict[str, set[int]]:
    """Map category name -> set of layer indices present in an activation dump."""
    found: dict[str, set[int]] = {}
    for name in dump.names():
        m = _PROBE_RE.match(name)
        if m:
            found.setdefault(m.group(1), set()).add(int(m.group(2)))
    return found


def probe_score(dump: Checkpoint, layer: int) -> float:
    """Mean cosine distance of non-GENERIC category activations to the
    GENERIC anchor at the given layer; ranges over [0, 2]."""
    anchor_name = f"probe/{GENERIC}/layer_{layer}"
    if anchor_name not in dump:
        raise ProbeDumpError(f"activation dump is missing the anchor {anchor_name!r}")
    anchor = dump.tensor(anchor_name).astype(np.float64).ravel()
    distances = []
    for category, layers in sorted(probe_categories(dump).items()):
        if category == GENERIC or layer not in layers:
            continue
        vec = dump.tensor(f"probe/{category}/layer_{layer}").astype(np.float64).ravel()
        distances.append(1.0 - _cosine(vec, anchor))
    if not distances:
        raise ProbeDumpError(
            f"activation dump has no non-{GENERIC} category at layer {layer}"
        )
    return float(np.mean(distances))


def mri_score(static: StaticStats, probe: float, alpha: float) -> float:
    """Combine static and probe terms; the probe value is halved onto [0, 1]
    so both terms share a scale."""
    return alpha * static.static_score + (1.0 - alpha) * (probe / 2.0)


def mri_ratio(mri_a: float, mri_b: float) -> float:
    """Normalized share of parent B, snapped to a 2^-24 grid so the
    parent-swap complement identity is exact; 0.5 when both scores are 0."""
    if mri_a < 0 or mri_b < 0:
        raise ValueError("importance scores must be non-negative")
    total = mri_a + mri_b
    if total == 0.0:
        return 0.5
    return round((mri_b / total) * _RATIO_GRID) / _RATIO_GRID


@dataclass(frozen=True)
class TensorMri:
    """Importance breakdown for one tensor across both parents."""

    mri_a: float
    mri_b: float
    r_mri: float
    static_a: float
    static_b: float
    probe_a: float
    probe_b: float


@dataclass
class MriReport:
    """Name-keyed importance report; `r_mri` is the parent-B share per tensor."""

    alpha: float
    tensors: dict[str, TensorMri]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def __getitem__(self, name: str) -> TensorMri:
        return self.tensors[name]

    def names(self) -> list[str]:
        return list(self.tensors)

    def ratios(self) -> dict[str, float]:
        return {name: t.r_mri for name, t in self.tensors.items()}


def probe_layer_for(topo: ModelTopology, name: str) -> int:
    """Layer whose probe response a tensor inherits: its own layer for layer
    tensors, the first layer for embeddings, the last layer otherwise."""
    component = topo.component_of(name)
    layer = topo.layer_of(name)
    last = max(topo.layer_count - 1, 0)
    if component == "embedding":
        return 0 if layer is None else min(layer, last)
    if layer is None:
        return last
    return layer


def extract_report(
    father: Checkpoint,
    mother: Checkpoint,
    dump_father: Checkpoint,
    dump_mother: Checkpoint,
    alpha: float = 0.5,
) -> MriReport:
    """Score every shared shape-equal tensor on both parents and derive the
    per-tensor ratio; deterministic and order-independent."""
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha={alpha} outside [0, 1]")
    pair = validate_pair(father, mother)
    if not pair.shared:
        raise NoSharedTensorsError("parents share no tensors of equal shape")
    topo = father.topology
    probe_cache_a: dict[int, float] = {}
    probe_cache_b: dict[int, float] = {}
    tensors: dict[str, TensorMri] = {}
    for name in pair.shared:
        layer = probe_layer_for(topo, name)
        if layer not in probe_cache_a:
            probe_cache_a[layer] = probe_score(dump_father, layer)
            probe_cache_b[layer] = probe_score(dump_mother, layer)
        stat_a = static_score(father.tensor(name))
        stat_b = static_score(mother.tensor(name))
        score_a = mri_score(stat_a, probe_cache_a[layer], alpha)
        score_b = mri_score(stat_b, probe_cache_b[layer], alpha)
        tensors[name] = TensorMri(
            mri_a=score_a,
            mri_b=score_b,
            r_mri=mri_ratio(score_a, score_b),
            static_a=stat_a.static_score,
            static_b=stat_b.static_score,
            probe_a=probe_cache_a[layer],
            probe_b=probe_cache_b[layer],
        )
    return MriReport(alpha=alpha, tensors=tensors)


def save_report(report: MriReport, path) -> None:
    payload = {
        name: {
            "mri_a": t.mri_a,
            "mri_b": t.mri_b,
            "r_mri": t.r_mri,
            "static_a": t.static_a,
            "static_b": t.static_b,
            "probe_a": t.probe_a,
            "probe_b": t.probe_b,
            "alpha": report.alpha,
        }
        for name, t in report.tensors.items()
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n", "utf-8")


def load_report(path) -> MriReport:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: cannot read importance report ({exc})") from exc
    if not isinstance(payload, dict) or not payload:
        raise InputFormatError(f"{path}: importance report must be a non-empty object")
    alphas = set()
    tensors = {}
    for name in sorted(payload):
        rec = payload[name]
        try:
            alphas.add(float(rec["alpha"]))
            tensors[name] = TensorMri(
                mri_a=float(rec["mri_a"]),
                mri_b=float(rec["mri_b"]),
                r_mri=float(rec["r_mri"]),
                static_a=float(rec["static_a"]),
                static_b=float(rec["static_b"]),
                probe_a=float(rec["probe_a"]),
                probe_b=float(rec["probe_b"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InputFormatError(f"{path}: malformed record for tensor {name!r}") from exc
    if len(alphas) != 1:
        raise InputFormatError(f"{path}: inconsistent alpha values across tensors")
    return MriReport(alpha=alphas.pop(), tensors=tensors)


@dataclass(frozen=True)
class ProbeSample:
    category: str
    text: str


def default_probe_manifest() -> list[ProbeSample]:
    """Small synthetic probe set covering all six categories; GENERIC anchors
    the cosine-distance measurement."""
    texts = {
        "REASONING": [
            "If every box holds three parts and we have seven boxes, how many parts remain after using nine?",
            "A train leaves at 9:40 and arrives at 11:05; how long is the trip in minutes?",
        ],
        "CODE": [
            "def mean(xs):\n    return sum(xs) / len(xs)",
            "for i in range(10): print(i * i)",
        ],
        "LOGIC": [
            "All squares are rectangles. This shape is a square. Therefore it is a rectangle.",
            "If it rains the road is wet. The road is dry, so it did not rain.",
        ],
        "MULTILINGUAL_KO": [
            "오늘 회의는 몇 시에 시작하나요?",
            "서울에서 부산까지 기차로 얼마나 걸리나요?",
        ],
        "MULTILINGUAL_EN": [
            "What time does the meeting start today?",
            "How long does the train from the capital take?",
        ],
        GENERIC: [
            "Hello, how are you doing today?",
            "The weather is nice this afternoon.",
            "Thanks a lot, see you tomorrow.",
        ],
    }
    return [
        ProbeSample(category, text)
        for category in PROBE_CATEGORIES
        for text in texts[category]
    ]


def load_manifest(path) -> list[ProbeSample]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputFormatError(f"{path}: cannot read probe manifest ({exc})") from exc
    if not isinstance(payload, list):
        raise InputFormatError(f"{path}: probe manifest must be a JSON list")
    samples = []
    for item in payload:
        if not isinstance(item, dict) or "category" not in item or "text" not in item:
            raise InputFormatError(f"{path}: manifest entries need category and text")
        samples.append(ProbeSample(str(item["category"]), str(item["text"])))
    if not any(s.category == GENERIC for s in samples):
        raise InputFormatError(f"{path}: probe manifest has no {GENERIC} samples")
    return samples


def save_manifest(samples, path) -> None:
    payload = [{"category": s.category, "text": s.text} for s in samples]
    Path(path).write_text(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", "utf-8")
