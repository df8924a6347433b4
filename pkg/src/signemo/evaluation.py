"""Classification metrics and inter-annotator agreement.

wAcc is pinned as mean per-class recall (balanced accuracy) and macro F1 as
the unweighted mean of per-class F1; classes absent from the gold labels are
excluded from both means. Chance agreement for AC1 uses the full 7-class
taxonomy regardless of which classes the raters actually used, because the
annotation protocol offers all seven keys.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .corpus import ClipRecord, LabelProvenance, LabelSource
from .labels import DISPLAY_ORDER, LABEL_INDEX, LABEL_ORDER, N_CLASSES, EmotionLabel


@dataclass
class EvaluationReport:
    confusion: np.ndarray  # (7, 7) ints, rows = gold, columns = predicted
    per_class: dict[EmotionLabel, dict[str, float]]
    wacc_percent: float
    macro_f1_percent: float
    n: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "wacc_percent": self.wacc_percent,
            "macro_f1_percent": self.macro_f1_percent,
            "per_class": {
                lab.value: {k: v for k, v in m.items()} for lab, m in self.per_class.items()
            },
            "confusion": self.confusion.tolist(),
            "confusion_labels": [lab.value for lab in LABEL_ORDER],
        }


def confusion_matrix(pairs: Iterable[tuple[EmotionLabel, EmotionLabel]]) -> np.ndarray:
    counts = np.zeros((N_CLASSES, N_CLASSES), dtype=np.int64)
    for gold, pred in pairs:
        counts[LABEL_INDEX[gold], LABEL_INDEX[pred]] += 1
    return counts


def evaluate(pairs: Sequence[tuple[EmotionLabel, EmotionLabel]]) -> EvaluationReport:
    """Score (gold, predicted) pairs.

    Per-class precision/recall/F1 use the 0-on-empty-denominator convention.
    Percentages are stored at full precision; round only for display.
    """
    if not pairs:
        raise ValueError("evaluate requires at least one (gold, pred) pair")
    counts = confusion_matrix(pairs)
    gold_totals = counts.sum(axis=1)
    pred_totals = counts.sum(axis=0)
    tp = np.diag(counts)

    per_class: dict[EmotionLabel, dict[str, float]] = {}
    recalls, f1s = [], []
    for k, label in enumerate(LABEL_ORDER):
        precision = tp[k] / pred_totals[k] if pred_totals[k] > 0 else 0.0
        recall = tp[k] / gold_totals[k] if gold_totals[k] > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        per_class[label] = {
            "precision": float(precision),
            "recall": float(recall),
            "f1": float(f1),
            "support": int(gold_totals[k]),
        }
        if gold_totals[k] > 0:
            recalls.append(recall)
            f1s.append(f1)

    return EvaluationReport(
        confusion=counts,
        per_class=per_class,
        wacc_percent=float(np.mean(recalls)) * 100.0,
        macro_f1_percent=float(np.mean(f1s)) * 100.0,
        n=int(counts.sum()),
    )


def format_report(report: EvaluationReport) -> str:
    lines = [
        f"n = {report.n}",
        f"wAcc = {report.wacc_percent:.2f}%",
        f"macro F1 = {report.macro_f1_percent:.2f}%",
        "",
        f"{'class':<10} {'prec':>7} {'recall':>7} {'f1':>7} {'support':>8}",
    ]
    for label in LABEL_ORDER:
        m = report.per_class[label]
        lines.append(
            f"{label.value:<10} {100 * m['precision']:>6.2f}% {100 * m['recall']:>6.2f}%"
            f" {100 * m['f1']:>6.2f}% {m['support']:>8d}"
        )
    return "\n".join(lines)


def format_per_class_f1_table(reports: dict[str, EvaluationReport]) -> str:
    """Aligned per-class F1 table (one row per model) for paper-style comparison."""
    headers = [lab.value[:4].capitalize() + "." for lab in DISPLAY_ORDER]
    name_w = max([len(n) for n in reports] + [5])
    lines = [f"{'Model':<{name_w}} | " + " ".join(f"{h:>6}" for h in headers) + " |  Total"]
    for name, rep in reports.items():
        cells = " ".join(f"{100 * rep.per_class[lab]['f1']:>6.2f}" for lab in DISPLAY_ORDER)
        lines.append(f"{name:<{name_w}} | {cells} | {rep.macro_f1_percent:>6.2f}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Inter-annotator agreement

@dataclass
class AgreementReport:
    p_o: float
    p_e: float
    ac1: float
    consensus_ids: set[str]
    per_class_consensus: dict[EmotionLabel, int]
    n: int

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "p_o": self.p_o,
            "p_e": self.p_e,
            "ac1": self.ac1,
            "consensus_size": len(self.consensus_ids),
            "per_class_consensus": {lab.value: c for lab, c in self.per_class_consensus.items()},
        }


def ac1_from_agreements(p_o: float, p_e: float) -> float:
    """AC1 = (p_o - p_e) / (1 - p_e); requires p_e < 1."""
    if p_e >= 1.0:
        raise ValueError("chance agreement p_e must be < 1")
    return (p_o - p_e) / (1.0 - p_e)


def gwet_ac1(
    labels_a: Sequence[EmotionLabel],
    labels_b: Sequence[EmotionLabel],
    item_ids: Sequence[str] | None = None,
) -> AgreementReport:
    """Chance-corrected two-rater agreement over the fixed 7-class taxonomy.

    p_o is the exact-match fraction. The chance term averages the two raters'
    per-class prevalence pi_k and uses p_e = (1/(K-1)) * sum_k pi_k (1 - pi_k)
    with K = 7, which stays well-behaved under heavy class imbalance.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError(f"rater label lists differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n == 0:
        raise ValueError("agreement requires at least one item")
    if item_ids is None:
        item_ids = [str(i) for i in range(n)]
    elif len(item_ids) != n:
        raise ValueError("item_ids must align with the label lists")

    matches = [i for i in range(n) if labels_a[i] == labels_b[i]]
    p_o = len(matches) / n

    prev_a = np.zeros(N_CLASSES)
    prev_b = np.zeros(N_CLASSES)
    for a, b in zip(labels_a, labels_b):
        prev_a[LABEL_INDEX[a]] += 1
        prev_b[LABEL_INDEX[b]] += 1
    pi = (prev_a + prev_b) / (2.0 * n)
    p_e = float(np.sum(pi * (1.0 - pi)) / (N_CLASSES - 1))

    per_class = {lab: 0 for lab in LABEL_ORDER}
    for i in matches:
        per_class[labels_a[i]] += 1

    return AgreementReport(
        p_o=p_o,
        p_e=p_e,
        ac1=ac1_from_agreements(p_o, p_e),
        consensus_ids={item_ids[i] for i in matches},
        per_class_consensus=per_class,
        n=n,
    )


_GOLD_PRIORITY = (
    LabelSource.CONSENSUS,
    LabelSource.ANNOTATOR,
    LabelSource.GOLD_ACTED,
    LabelSource.TER_WEAK,
)


def resolve_gold_label(rec: ClipRecord) -> EmotionLabel | None:
    """Best available evaluation label by trust order.

    consensus > annotator > gold_acted > ter_weak; model predictions never
    count as gold. A level whose labels conflict (two annotators disagreeing)
    is skipped, and None is returned when nothing resolves, so callers can
    exclude the record instead of failing.
    """
    for source in _GOLD_PRIORITY:
        values = {label for label, prov in rec.labels if prov.source is source}
        if len(values) == 1:
            return values.pop()
    return None


@dataclass
class ConsensusResult:
    records: list[ClipRecord]  # copies carrying a consensus label
    per_class_counts: dict[EmotionLabel, int]
    missing_ids: set[str]  # lacked one or both annotator labels
    disagreement_ids: set[str]


def consensus_subset(
    records: Sequence[ClipRecord],
    annotator_a_id: str,
    annotator_b_id: str,
) -> ConsensusResult:
    """Keep records where both annotators chose the same label.

    Matching records gain a consensus-provenance label with the shared value;
    records missing either annotator's label are excluded and reported rather
    than treated as errors.
    """
    out: list[ClipRecord] = []
    counts = {lab: 0 for lab in LABEL_ORDER}
    missing: set[str] = set()
    disagreement: set[str] = set()
    for rec in records:
        a = rec.label_from(LabelSource.ANNOTATOR, annotator_a_id)
        b = rec.label_from(LabelSource.ANNOTATOR, annotator_b_id)
        if a is None or b is None:
            missing.add(rec.clip_id)
            continue
        if a != b:
            disagreement.add(rec.clip_id)
            continue
        out.append(rec.with_label(a, LabelProvenance(source=LabelSource.CONSENSUS)))
        counts[a] += 1
    return ConsensusResult(
        records=out,
        per_class_counts=counts,
        missing_ids=missing,
        disagreement_ids=disagreement,
    )
