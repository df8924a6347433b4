"""Independent brute-force reference implementations.

Written from first principles with explicit loops, before and apart from the
library code, so metric tests compare two derivations rather than a function
against itself. Keep this module free of imports from the package's
evaluation internals; only the label type is shared.
"""

from __future__ import annotations

import math

from signemo.labels import LABEL_ORDER, EmotionLabel


def brute_force_metrics(pairs: list[tuple[EmotionLabel, EmotionLabel]]) -> dict:
    """Per-class precision/recall/F1, balanced accuracy, macro F1.

    Direct counting: for each class, walk the whole pair list and count true
    positives, false positives, and false negatives. Empty denominators give
    0. Classes that never appear in gold are left out of the means.
    """
    per_class: dict[EmotionLabel, dict[str, float]] = {}
    for label in LABEL_ORDER:
        tp = fp = fn = 0
        for gold, pred in pairs:
            if gold == label and pred == label:
                tp += 1
            elif gold != label and pred == label:
                fp += 1
            elif gold == label and pred != label:
                fn += 1
        precision = tp / (tp + fp) if (tp + fp) > 0 else 0.0
        recall = tp / (tp + fn) if (tp + fn) > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if (precision + recall) > 0 else 0.0
        per_class[label] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": tp + fn,
        }
    present = [label for label in LABEL_ORDER if per_class[label]["support"] > 0]
    wacc = sum(per_class[l]["recall"] for l in present) / len(present)
    macro_f1 = sum(per_class[l]["f1"] for l in present) / len(present)
    return {
        "per_class": per_class,
        "wacc_percent": 100.0 * wacc,
        "macro_f1_percent": 100.0 * macro_f1,
    }


def brute_force_ac1(
    labels_a: list[EmotionLabel], labels_b: list[EmotionLabel]
) -> tuple[float, float, float]:
    """(p_o, p_e, ac1) evaluated directly from the definition.

    p_o: fraction of items where the raters match. For each class k,
    pi_k = (count_a(k)/n + count_b(k)/n) / 2; the chance term is
    p_e = sum_k pi_k * (1 - pi_k) / (K - 1) with K fixed at 7.
    """
    if len(labels_a) != len(labels_b) or not labels_a:
        raise ValueError("need equal-length, non-empty lists")
    n = len(labels_a)
    matches = sum(1 for a, b in zip(labels_a, labels_b) if a == b)
    p_o = matches / n
    k_total = len(LABEL_ORDER)
    p_e = 0.0
    for label in LABEL_ORDER:
        pi = (sum(1 for a in labels_a if a == label) / n + sum(1 for b in labels_b if b == label) / n) / 2.0
        p_e += pi * (1.0 - pi)
    p_e /= k_total - 1
    ac1 = (p_o - p_e) / (1.0 - p_e)
    assert math.isfinite(ac1)
    return p_o, p_e, ac1


def numeric_gradients(loss_fn, params: dict, eps: float = 1e-5, coords_per_tensor: int = 40) -> dict:
    """Central-difference gradients of a scalar loss over a parameter dict.

    Independent of any analytic backward pass: only loss values are used.
    Probes at most coords_per_tensor evenly spread coordinates per tensor and
    returns {name: [(flat_index, gradient), ...]}.
    """
    out: dict[str, list[tuple[int, float]]] = {}
    for name, tensor in params.items():
        flat = tensor.reshape(-1)
        n = flat.shape[0]
        step = max(1, n // coords_per_tensor)
        probes = []
        for idx in range(0, n, step):
            orig = flat[idx]
            flat[idx] = orig + eps
            up = loss_fn(params)
            flat[idx] = orig - eps
            down = loss_fn(params)
            flat[idx] = orig
            probes.append((idx, (up - down) / (2.0 * eps)))
        out[name] = probes
    return out
