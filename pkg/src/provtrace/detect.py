"""Normal-behavior model: K-means centers, distance scoring, PR evaluation.

Training features are grouped into K clusters; a graph's anomaly score is the
Euclidean distance from its feature to the nearest center, and anything scoring
strictly above the calibrated threshold is flagged as an attack.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, ContractError

DEFAULT_K = 8  # midpoint of the recommended 5..12 operating range
KMEANS_MAX_ITER = 300

POLICY_MAX = "max"


@dataclass(slots=True)
class ClusterModel:
    k: int
    centers: np.ndarray                 # K x d
    threshold: float | None = None
    calibration: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f"K must be >= 2, got {self.k}")
        if not np.isfinite(self.centers).all():
            raise ContractError("cluster centers contain NaN/Inf")
        if self.threshold is not None and self.threshold < 0:
            raise ContractError(f"threshold must be >= 0, got {self.threshold}")

    def save(self, path: str | Path) -> None:
        payload = {
            "k": self.k,
            "dim": int(self.centers.shape[1]),
            "centers": self.centers.reshape(-1).tolist(),
            "threshold": self.threshold,
            "calibration": self.calibration,
        }
        Path(path).write_text(json.dumps(payload, sort_keys=True), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "ClusterModel":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        centers = np.asarray(payload["centers"], dtype=np.float64)
        centers = centers.reshape(payload["k"], payload["dim"])
        model = cls(k=payload["k"], centers=centers, threshold=payload["threshold"],
                    calibration=payload.get("calibration", {}))
        model.validate()
        return model


@dataclass(slots=True)
class ScoredGraph:
    graph_id: str
    score: float
    label: str
    verdict: str  # "benign" | "attack"


# ---------------------------------------------------------------------------
# K-means
# ---------------------------------------------------------------------------

def _kmeans_pp_init(features: np.ndarray, k: int,
                    rng: np.random.Generator) -> np.ndarray:
    n = features.shape[0]
    centers = np.empty((k, features.shape[1]))
    centers[0] = features[rng.integers(n)]
    d2 = ((features - centers[0]) ** 2).sum(axis=1)
    for i in range(1, k):
        total = d2.sum()
        if total <= 0:
            # All remaining mass collapsed onto chosen centers; spread uniformly.
            centers[i] = features[rng.integers(n)]
        else:
            centers[i] = features[rng.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, ((features - centers[i]) ** 2).sum(axis=1))
    return centers


def lloyd_iterations(features: np.ndarray, centers: np.ndarray,
                     max_iter: int = KMEANS_MAX_ITER
                     ) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Run Lloyd's algorithm until assignments stop changing (or max_iter).

    Empty clusters are repaired by reseeding the center to the point farthest
    from its nearest center. Returns (centers, assignment, inertia, iters).
    """
    assignment = np.full(features.shape[0], -1, dtype=np.int64)
    iters = 0
    for iters in range(1, max_iter + 1):
        d2 = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assignment = d2.argmin(axis=1)
        nearest = d2[np.arange(len(features)), new_assignment]
        for c in range(centers.shape[0]):
            chosen = new_assignment == c
            if chosen.any():
                centers[c] = features[chosen].mean(axis=0)
            else:
                far = int(nearest.argmax())
                centers[c] = features[far]
                new_assignment[far] = c
                nearest[far] = 0.0
        if (new_assignment == assignment).all():
            break
        assignment = new_assignment
    d2 = ((features[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    inertia = float(d2.min(axis=1).sum())
    return centers, assignment, inertia, iters


def fit_kmeans(features: np.ndarray, k: int = DEFAULT_K, seed: int = 0) -> ClusterModel:
    """K-means++ seeded Lloyd clustering; deterministic for a fixed seed."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ContractError(f"features must be 2-D, got shape {features.shape}")
    if not np.isfinite(features).all():
        raise ContractError("features contain NaN/Inf")
    if k < 2:
        raise ConfigError(f"K must be >= 2, got {k}")
    if features.shape[0] < k:
        raise ContractError(f"need at least K={k} features, got {features.shape[0]}")
    rng = np.random.default_rng(seed & (2**63 - 1))
    centers = _kmeans_pp_init(features, k, rng)
    centers, _, _, _ = lloyd_iterations(features, centers)
    model = ClusterModel(k=k, centers=centers)
    model.validate()
    return model


def score(feature: np.ndarray, model: ClusterModel) -> float:
    """Euclidean distance to the nearest cluster center."""
    feature = np.asarray(feature, dtype=np.float64)
    if feature.shape[-1] != model.centers.shape[1]:
        raise ContractError(
            f"feature dim {feature.shape[-1]} != center dim {model.centers.shape[1]}"
        )
    return float(np.sqrt(((model.centers - feature) ** 2).sum(axis=1)).min())


def score_many(features: np.ndarray, model: ClusterModel) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    d = np.sqrt(((features[:, None, :] - model.centers[None, :, :]) ** 2).sum(axis=2))
    return d.min(axis=1)


# ---------------------------------------------------------------------------
# Threshold calibration
# ---------------------------------------------------------------------------

def parse_policy(policy: str) -> tuple[str, float | None]:
    """'max' or 'percentile:<p>' with p in (0, 100]."""
    if policy == POLICY_MAX:
        return POLICY_MAX, None
    if policy.startswith("percentile:"):
        try:
            p = float(policy.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad percentile policy {policy!r}") from exc
        if not 0 < p <= 100:
            raise ConfigError(f"percentile must be in (0, 100], got {p}")
        return "percentile", p
    raise ConfigError(f"unknown threshold policy {policy!r}")


def calibrate_threshold(validation_features: np.ndarray, model: ClusterModel,
                        policy: str = POLICY_MAX) -> ClusterModel:
    """Set the detection threshold from benign validation scores.

    'max' guarantees zero false positives on the validation slice by
    construction; 'percentile:p' (linear interpolation) trades a controlled
    validation FP rate for sensitivity on noisy data.
    """
    validation_features = np.asarray(validation_features, dtype=np.float64)
    if validation_features.size == 0:
        raise ContractError("empty validation set")
    kind, p = parse_policy(policy)
    scores = score_many(validation_features, model)
    threshold = float(scores.max()) if kind == POLICY_MAX else float(np.percentile(scores, p))
    calibrated = ClusterModel(
        k=model.k,
        centers=model.centers,
        threshold=threshold,
        calibration={
            "policy": policy,
            "validation_count": int(len(scores)),
            "score_min": float(scores.min()),
            "score_mean": float(scores.mean()),
            "score_max": float(scores.max()),
        },
    )
    calibrated.validate()
    return calibrated


def classify(graph_id: str, feature: np.ndarray, label: str,
             model: ClusterModel) -> ScoredGraph:
    if model.threshold is None:
        raise ContractError("model threshold not calibrated; run calibrate first")
    s = score(feature, model)
    verdict = "attack" if s > model.threshold else "benign"
    return ScoredGraph(graph_id=graph_id, score=s, label=label, verdict=verdict)


# ---------------------------------------------------------------------------
# Precision-recall
# ---------------------------------------------------------------------------

@dataclass(slots=True)
class PRCurve:
    # (threshold, precision, recall) rows over decreasing thresholds
    points: list[tuple[float, float, float]]
    auc_pr: float


def pr_curve(scores: np.ndarray, labels: list[str] | np.ndarray) -> PRCurve:
    """PR operating points at every distinct score, plus a predict-all point.

    A graph is called an attack when score > threshold. At thresholds where
    nothing is flagged, precision is 1.0 by convention. The area is the
    right-step (average-precision) sum over decreasing thresholds.
    """
    scores = np.asarray(scores, dtype=np.float64)
    positive = np.asarray([lab == "attack" for lab in labels], dtype=bool)
    if len(scores) != len(positive):
        raise ContractError("scores and labels length mismatch")
    n_pos = int(positive.sum())
    n_neg = int(len(positive) - n_pos)
    if n_pos == 0 or n_neg == 0:
        raise ContractError("PR curve needs at least one attack and one benign label")

    thresholds = np.unique(scores)[::-1]  # decreasing
    points: list[tuple[float, float, float]] = []
    auc = 0.0
    prev_recall = 0.0
    sweep = np.concatenate([thresholds, [scores.min() - 1.0]])
    for t in sweep:
        predicted = scores > t
        tp = int((predicted & positive).sum())
        fp = int((predicted & ~positive).sum())
        precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
        recall = tp / n_pos
        auc += (recall - prev_recall) * precision
        prev_recall = recall
        points.append((float(t), float(precision), float(recall)))
    return PRCurve(points=points, auc_pr=float(auc))


@dataclass(slots=True)
class EvaluationReport:
    scored: list[ScoredGraph]
    tp: int
    fp: int
    tn: int
    fn: int
    precision: float
    recall: float | None
    curve: PRCurve | None

    @property
    def auc_pr(self) -> float | None:
        return self.curve.auc_pr if self.curve is not None else None


def evaluate(graph_ids: list[str], features: np.ndarray, labels: list[str],
             model: ClusterModel) -> EvaluationReport:
    """Score a test set, apply the calibrated threshold, and build the curve.

    With a single-class test set the PR curve is undefined and omitted;
    confusion counts still use the precision=1.0 zero-detection convention.
    """
    if len(graph_ids) == 0:
        raise ContractError("empty test set")
    scored = [
        classify(gid, feat, lab, model)
        for gid, feat, lab in zip(graph_ids, features, labels)
    ]
    tp = sum(1 for s in scored if s.verdict == "attack" and s.label == "attack")
    fp = sum(1 for s in scored if s.verdict == "attack" and s.label != "attack")
    tn = sum(1 for s in scored if s.verdict == "benign" and s.label != "attack")
    fn = sum(1 for s in scored if s.verdict == "benign" and s.label == "attack")
    precision = tp / (tp + fp) if (tp + fp) > 0 else 1.0
    recall = tp / (tp + fn) if (tp + fn) > 0 else None
    distinct = {s.label for s in scored}
    curve = None
    if "attack" in distinct and len(distinct) > 1:
        curve = pr_curve(np.asarray([s.score for s in scored]),
                         [s.label for s in scored])
    return EvaluationReport(scored=scored, tp=tp, fp=fp, tn=tn, fn=fn,
                            precision=precision, recall=recall, curve=curve)
