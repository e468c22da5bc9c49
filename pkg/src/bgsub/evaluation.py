"""F-measure scoring of foreground masks against ground truth."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FrameScore:
    frame_index: int
    tp: int
    fp: int
    fn: int

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f_measure(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0

    def row(self) -> dict:
        return {
            "frame_index": self.frame_index,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f_measure": self.f_measure,
        }


def f_measure(pred, gt, frame_index: int = 0) -> FrameScore:
    """Counts with foreground as the positive class."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise ValueError(f"mask size mismatch: {pred.shape} vs {gt.shape}")
    tp = int(np.count_nonzero(pred & gt))
    fp = int(np.count_nonzero(pred & ~gt))
    fn = int(np.count_nonzero(~pred & gt))
    return FrameScore(frame_index, tp, fp, fn)


@dataclass
class EvalReport:
    frames: list[FrameScore] = field(default_factory=list)

    def add(self, score: FrameScore) -> None:
        self.frames.append(score)

    @property
    def mean_f(self) -> float:
        return float(np.mean([s.f_measure for s in self.frames])) if self.frames else 0.0

    @property
    def pooled(self) -> FrameScore:
        return FrameScore(
            -1,
            sum(s.tp for s in self.frames),
            sum(s.fp for s in self.frames),
            sum(s.fn for s in self.frames),
        )

    COLUMNS = ("frame_index", "tp", "fp", "fn", "precision", "recall", "f_measure")

    def write_csv(self, path) -> None:
        import csv

        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=self.COLUMNS)
            writer.writeheader()
            for s in self.frames:
                writer.writerow(s.row())
            pooled = self.pooled.row()
            pooled["frame_index"] = "pooled"
            writer.writerow(pooled)
            writer.writerow({"frame_index": "mean", "f_measure": self.mean_f})


def evaluate(results, ground_truth: dict) -> EvalReport:
    """Score every result whose frame index has a ground-truth mask."""
    report = EvalReport()
    for res in results:
        gt = ground_truth.get(res.index)
        if gt is not None:
            report.add(f_measure(res.mask, gt, res.index))
    return report
