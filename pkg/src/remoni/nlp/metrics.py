"""Exact-match scoring harness for the recognition tasks.

Metrics are computed per task (activity, emotion): accuracy plus
macro-averaged precision/recall/F1 over the classes present in the labels.
`unidentifiable` counts as a class of its own.
"""

from __future__ import annotations

from ..errors import RemoniError


class LengthMismatch(RemoniError):
    pass


def _task_metrics(pred: list[str], gold: list[str]) -> dict:
    n = len(gold)
    accuracy = sum(p == g for p, g in zip(pred, gold)) / n
    classes = sorted(set(gold))
    precisions, recalls, f1s = [], [], []
    for c in classes:
        tp = sum(1 for p, g in zip(pred, gold) if p == c and g == c)
        fp = sum(1 for p, g in zip(pred, gold) if p == c and g != c)
        fn = sum(1 for p, g in zip(pred, gold) if p != c and g == c)
        precision = tp / (tp + fp) if tp + fp else 0.0
        recall = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
        precisions.append(precision)
        recalls.append(recall)
        f1s.append(f1)
    k = len(classes)
    return {
        "accuracy": accuracy,
        "macro_precision": sum(precisions) / k,
        "macro_recall": sum(recalls) / k,
        "macro_f1": sum(f1s) / k,
    }


def evaluate_recognition(predictions, labels) -> dict:
    """Score predicted (activity, emotion) pairs against gold labels.

    Accepts RecognitionResult-likes (anything with .activity/.emotion whose
    values stringify via .value) or dicts with "activity"/"emotion" keys.
    Returns {"activity": {...}, "emotion": {...}}.
    """
    if len(predictions) != len(labels):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(labels)} labels")
    if not labels:
        raise LengthMismatch("empty evaluation set")

    def col(items, task: str) -> list[str]:
        out = []
        for item in items:
            value = item[task] if isinstance(item, dict) else getattr(item, task)
            out.append(value.value if hasattr(value, "value") else str(value))
        return out

    return {
        "activity": _task_metrics(col(predictions, "activity"), col(labels, "activity")),
        "emotion": _task_metrics(col(predictions, "emotion"), col(labels, "emotion")),
    }
