"""Independent brute-force reference implementations used to cross-check the
package. Everything here is plain Python loops over lists of floats: no numpy,
no shared code paths with the implementations under test.
"""

from __future__ import annotations

import math


def centroid_oracle(instances: list[list[float]]) -> list[float]:
    dim = len(instances[0])
    out = []
    for i in range(dim):
        s = 0.0
        for v in instances:
            s += v[i]
        out.append(s / len(instances))
    return out


def l2_distance_oracle(a: list[float], b: list[float]) -> float:
    s = 0.0
    for x, y in zip(a, b):
        d = x - y
        s += d * d
    return math.sqrt(s)


def l1_distance_oracle(a: list[float], b: list[float]) -> float:
    s = 0.0
    for x, y in zip(a, b):
        s += abs(x - y)
    return s


def threshold_oracle(
    centroid: list[float],
    instances: list[list[float]],
    weight: float,
    norm: str = "l2",
) -> float:
    dist = l2_distance_oracle if norm == "l2" else l1_distance_oracle
    worst = 0.0
    for v in instances:
        d = dist(v, centroid)
        if d > worst:
            worst = d
    return weight * worst


def classify_oracle(
    vec: list[float],
    centroids: list[tuple[str, list[float], float]],
    norm: str = "l2",
) -> tuple[str | None, str, float]:
    """centroids: (type name, vector, threshold) in canonical order.

    Returns (accepted type or None, best type, best distance).
    """
    dist = l2_distance_oracle if norm == "l2" else l1_distance_oracle
    best_name = None
    best_d = 0.0
    best_threshold = 0.0
    for name, center, threshold in centroids:
        d = dist(vec, center)
        if best_name is None or d < best_d:
            best_name = name
            best_d = d
            best_threshold = threshold
    assert best_name is not None
    if best_d <= best_threshold:
        return best_name, best_name, best_d
    return None, best_name, best_d


def pair_count_oracle(sequences: list[list[str]]) -> dict[tuple[str, str], int]:
    counts: dict[tuple[str, str], int] = {}
    for seq in sequences:
        for i in range(1, len(seq)):
            key = (seq[i - 1], seq[i])
            counts[key] = counts.get(key, 0) + 1
    return counts


def histogram_oracle(
    per_doc_sections: list[tuple[int, list[tuple[int, str | None]]]],
    bins: int,
) -> dict[str, list[int]]:
    """per_doc_sections: (n_sections, [(index, type name or None), ...]) per doc."""
    out: dict[str, list[int]] = {}
    for n, entries in per_doc_sections:
        for index, name in entries:
            if name is None:
                continue
            p = (index + 0.5) / n
            b = int(p * bins)
            if b >= bins:
                b = bins - 1
            out.setdefault(name, [0] * bins)[b] += 1
    return out


def metrics_oracle(
    pairs: list[tuple[str, str | None]],
    type_names: list[str],
) -> dict:
    """Per-type and aggregate P/R/F1 from (gold, predicted) pairs.

    Undefined metrics are None. Macro means are over types where the metric is
    defined; micro pools counts (unclassified predictions are not counted as
    predictions of any type).
    """
    per_type: dict[str, dict] = {}
    for t in type_names:
        tp = sum(1 for g, p in pairs if g == t and p == t)
        pred = sum(1 for _, p in pairs if p == t)
        gold = sum(1 for g, _ in pairs if g == t)
        precision = tp / pred if pred > 0 else None
        recall = tp / gold if gold > 0 else None
        if precision is None or recall is None or precision + recall == 0:
            f1 = None
        else:
            f1 = 2 * precision * recall / (precision + recall)
        per_type[t] = {"precision": precision, "recall": recall, "f1": f1}

    def mean_defined(key: str) -> float | None:
        vals = [m[key] for m in per_type.values() if m[key] is not None]
        return sum(vals) / len(vals) if vals else None

    tp_total = sum(1 for g, p in pairs if g == p and p is not None)
    pred_total = sum(1 for _, p in pairs if p is not None)
    gold_total = len(pairs)
    micro_p = tp_total / pred_total if pred_total > 0 else None
    micro_r = tp_total / gold_total if gold_total > 0 else None
    if micro_p is None or micro_r is None or micro_p + micro_r == 0:
        micro_f1 = None
    else:
        micro_f1 = 2 * micro_p * micro_r / (micro_p + micro_r)
    return {
        "per_type": per_type,
        "macro": {
            "precision": mean_defined("precision"),
            "recall": mean_defined("recall"),
            "f1": mean_defined("f1"),
        },
        "micro": {"precision": micro_p, "recall": micro_r, "f1": micro_f1},
    }
