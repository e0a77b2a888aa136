"""Leader identification among camera detections.

An initialisation window harvests positive appearance embeddings from the
largest bounding box per frame (balanced with negatives sampled from a pool);
afterwards a binary KNN over embeddings separates the leader from everyone
else, with accepted leader embeddings fed back as new positives.  A
time-growing drift circle around the last known pixel position gates
candidates before they ever reach the classifier.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .world import Detection

__all__ = [
    "Phase",
    "RecognitionState",
    "KnnModel",
    "RecognizerError",
    "InitialisationError",
    "drift_radius",
    "gate_detection",
    "knn_classify",
    "run_initialisation",
    "following_step",
    "load_negative_pool",
    "save_negative_pool",
]


class RecognizerError(Exception):
    pass


class InitialisationError(RecognizerError):
    pass


class Phase(str, Enum):
    INITIALISING = "initialising"
    FOLLOWING = "following"
    FAULT = "fault"


@dataclass
class RecognitionState:
    phase: Phase = Phase.INITIALISING
    last_bbox: tuple[float, float, float, float] | None = None
    last_detection_time: float = 0.0
    init_deadline: float = 5.0


class KnnModel:
    """Binary KNN over appearance embeddings (leader vs. everyone else).

    ``k`` must be odd so majority votes cannot tie; distance ties break by
    insertion order (older point wins).  Negatives live in a FIFO ring capped
    at ``negative_cap`` points.
    """

    def __init__(self, k: int = 5, negative_cap: int = 500):
        if k <= 0 or k % 2 == 0:
            raise ValueError("k must be a positive odd count")
        self.k = k
        self.negative_cap = negative_cap
        self.positives: list[np.ndarray] = []
        self.negatives: list[np.ndarray] = []
        self._pos_order: list[int] = []
        self._neg_order: list[int] = []
        self._counter = 0

    def __len__(self) -> int:
        return len(self.positives) + len(self.negatives)

    def add_positive(self, embedding: np.ndarray):
        self.positives.append(np.asarray(embedding, dtype=float))
        self._pos_order.append(self._counter)
        self._counter += 1

    def add_negative(self, embedding: np.ndarray):
        self.negatives.append(np.asarray(embedding, dtype=float))
        self._neg_order.append(self._counter)
        self._counter += 1
        if len(self.negatives) > self.negative_cap:
            self.negatives.pop(0)
            self._neg_order.pop(0)


def drift_radius(t: float, w: float, s: float) -> float:
    """Pixel radius of the acceptance circle after ``t`` seconds.

    Grows linearly with elapsed time and quadratically with the width of the
    last tracked bounding box (a proxy for target closeness).
    """
    return t * s * (w / 100.0) ** 2


def _bbox_center(bbox) -> tuple[float, float]:
    x, y, w, h = bbox
    return (x + 0.5 * w, y + 0.5 * h)


def gate_detection(
    candidate_bbox,
    state: RecognitionState,
    now: float,
    s: float,
    reference: tuple[float, float] | None = None,
) -> bool:
    """Accept a candidate iff its centroid lies inside the drift circle.

    The circle is centred on ``reference`` when given (the fused leader pixel
    position) and on the last tracked bounding-box centroid otherwise; its
    radius uses the last bounding-box width.
    """
    if state.last_bbox is None:
        raise RecognizerError("gating requires a previously tracked bounding box")
    ref = reference if reference is not None else _bbox_center(state.last_bbox)
    radius = drift_radius(max(now - state.last_detection_time, 0.0), state.last_bbox[2], s)
    cand = _bbox_center(candidate_bbox)
    return math.hypot(cand[0] - ref[0], cand[1] - ref[1]) <= radius


def knn_classify(embedding: np.ndarray, model: KnnModel) -> tuple[bool, float]:
    """Majority vote among the k nearest stored points by Euclidean distance.

    Returns ``(is_leader, margin)`` with margin = (leader votes - k/2) / k.
    """
    total = len(model)
    if total == 0:
        raise RecognizerError("classifier has no reference points")
    if model.k > total:
        raise RecognizerError(f"k={model.k} exceeds stored points ({total})")
    e = np.asarray(embedding, dtype=float)
    dists = []
    labels = []
    orders = []
    if model.positives:
        p = np.asarray(model.positives)
        dists.append(np.linalg.norm(p - e, axis=1))
        labels.append(np.ones(len(p), dtype=int))
        orders.append(np.asarray(model._pos_order))
    if model.negatives:
        ng = np.asarray(model.negatives)
        dists.append(np.linalg.norm(ng - e, axis=1))
        labels.append(np.zeros(len(ng), dtype=int))
        orders.append(np.asarray(model._neg_order))
    d = np.concatenate(dists)
    lab = np.concatenate(labels)
    order = np.concatenate(orders)
    nearest = np.lexsort((order, d))[: model.k]
    votes = int(lab[nearest].sum())
    margin = (votes - model.k / 2.0) / model.k
    return (2 * votes > model.k, margin)


def run_initialisation(
    frames: list[list[Detection]],
    negative_pool: list[np.ndarray],
    rng: np.random.Generator,
    k: int = 5,
    min_frame_fraction: float = 0.8,
    negative_cap: int = 500,
) -> KnnModel:
    """Bootstrap the classifier from the initialisation window.

    Per frame the largest-area bounding box contributes a positive; one
    negative is drawn (seeded RNG) from the pool per positive so both classes
    stay balanced.  Fails when too few frames contained any detection.
    """
    if not negative_pool:
        raise InitialisationError("negative pool is empty")
    if not frames:
        raise InitialisationError("initialisation window saw no frames")
    non_empty = [f for f in frames if f]
    if len(non_empty) < min_frame_fraction * len(frames):
        raise InitialisationError(
            f"detections in {len(non_empty)}/{len(frames)} frames, "
            f"need {min_frame_fraction:.0%}"
        )
    model = KnnModel(k=k, negative_cap=negative_cap)
    for frame in non_empty:
        best = max(frame, key=lambda d: d.area)
        model.add_positive(best.embedding)
        model.add_negative(negative_pool[int(rng.integers(len(negative_pool)))])
    return model


def following_step(
    detections: list[Detection],
    state: RecognitionState,
    model: KnnModel,
    now: float,
    s: float,
    fused_feedback: tuple[float, float] | None = None,
) -> Detection | None:
    """One re-detection pass: gate, classify, pick the best leader candidate.

    Gated-out detections never touch the model.  Accepted detections that
    classify as non-leader extend the negative set; the accepted leader with
    the largest vote margin (if any) extends the positives and refreshes the
    tracked bounding box.  Returns the chosen detection or None.
    """
    if state.phase is not Phase.FOLLOWING:
        raise RecognizerError("recogniser is not in the following phase")
    best: Detection | None = None
    best_margin = -math.inf
    rejected_embeddings = []
    for det in detections:
        if not gate_detection(det.bbox, state, now, s, fused_feedback):
            continue
        is_leader, margin = knn_classify(det.embedding, model)
        if is_leader:
            if margin > best_margin:
                best = det
                best_margin = margin
        else:
            rejected_embeddings.append(det.embedding)
    for emb in rejected_embeddings:
        model.add_negative(emb)
    if best is not None:
        model.add_positive(best.embedding)
        state.last_bbox = best.bbox
        state.last_detection_time = now
    return best


def load_negative_pool(path: str | Path) -> list[np.ndarray]:
    """Read a newline-delimited embedding pool (one JSON array per line)."""
    pool = []
    with open(path, "r", encoding="utf-8") as handle:
        for line in handle:
            line = line.strip()
            if line:
                pool.append(np.asarray(json.loads(line), dtype=float))
    return pool


def save_negative_pool(path: str | Path, pool) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for emb in pool:
            handle.write(json.dumps([float(v) for v in emb]) + "\n")
