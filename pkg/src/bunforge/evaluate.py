"""Pairwise scoring of a predicted address partition against ground truth."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .errors import ValidationError


@dataclass
class ClusteringScore:
    precision: float
    recall: float
    f1: float


def _as_clusters(partition) -> list[set[str]]:
    if hasattr(partition, "values"):
        partition = partition.values()
    return [set(c) for c in partition]


def score_partition(predicted, truth) -> ClusteringScore:
    """Precision/recall over same-cluster address pairs.

    Both arguments are partitions: mappings id -> addresses or iterables
    of address collections covering the same universe. A side with zero
    same-cluster pairs scores 1.0 by convention, so identical partitions
    always score (1, 1, 1); F1 is 0 when precision and recall both vanish.
    """
    pred = _as_clusters(predicted)
    true = _as_clusters(truth)
    pred_universe = set().union(*pred) if pred else set()
    true_universe = set().union(*true) if true else set()
    if sum(len(c) for c in pred) != len(pred_universe) or sum(len(c) for c in true) != len(true_universe):
        raise ValidationError("partitions must be disjoint covers")
    if pred_universe != true_universe:
        sample = sorted(pred_universe ^ true_universe)[:5]
        raise ValidationError(f"universe mismatch: {len(pred_universe ^ true_universe)} addresses differ, e.g. {sample}")

    cluster_of = {}
    for i, c in enumerate(pred):
        for a in c:
            cluster_of[a] = i

    def npairs(k: int) -> int:
        return k * (k - 1) // 2

    pairs_pred = sum(npairs(len(c)) for c in pred)
    pairs_true = sum(npairs(len(c)) for c in true)
    pairs_both = 0
    for c in true:
        overlap = Counter(cluster_of[a] for a in c)
        pairs_both += sum(npairs(k) for k in overlap.values())

    precision = pairs_both / pairs_pred if pairs_pred else 1.0
    recall = pairs_both / pairs_true if pairs_true else 1.0
    f1 = 0.0 if precision + recall == 0 else 2 * precision * recall / (precision + recall)
    return ClusteringScore(precision=precision, recall=recall, f1=f1)
