"""Segmentation and landmark evaluation.

Overlap scores come from plain voxel counting.  The Hausdorff distance is
computed between the two boundary voxel sets in millimeters; by default it
is the true maximum (100th percentile), with a percentile knob for
exploration.  Landmark errors are reported both in voxel units and in
millimeters, plus the per-axis |delta| <= 1 detection criterion (a hit
anywhere inside the 3x3x3 box centered on the truth).
"""

from __future__ import annotations

import statistics
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import ValidationError
from .postprocess import mask_boundary
from .volume import BinaryMask, LandmarkSet, euclidean_dist


@dataclass(frozen=True)
class SegScores:
    dsc: float
    iou: float
    sensitivity: float
    specificity: float
    hd_mm: float

    def as_dict(self) -> dict:
        return {
            "dsc": self.dsc,
            "iou": self.iou,
            "sensitivity": self.sensitivity,
            "specificity": self.specificity,
            "hd_mm": self.hd_mm,
        }


@dataclass(frozen=True)
class LandmarkError:
    name: str
    pixel_error: float  # Euclidean, voxel units
    mm_error: float     # Euclidean, millimeters
    axis_error: int     # max per-axis |delta| in voxels
    in_box: bool        # detected within the 3x3x3 box: axis_error <= 1


@dataclass(frozen=True)
class LandmarkErrors:
    per_landmark: tuple[LandmarkError, ...]
    false_positives: tuple[str, ...]  # present in prediction only
    false_negatives: tuple[str, ...]  # present in ground truth only
    mean_mm: float = field(default=float("nan"))
    median_mm: float = field(default=float("nan"))

    def get(self, name: str) -> LandmarkError | None:
        for e in self.per_landmark:
            if e.name == name:
                return e
        return None


def _check_same_grid(pred: BinaryMask, gt: BinaryMask) -> None:
    if pred.dims != gt.dims:
        raise ValidationError(f"prediction dims {pred.dims} != ground truth dims {gt.dims}", field="pred")
    if pred.spacing != gt.spacing:
        raise ValidationError(
            f"prediction spacing {pred.spacing} != ground truth spacing {gt.spacing}", field="pred"
        )


def hausdorff_mm(pred: BinaryMask, gt: BinaryMask, percentile: float = 100.0) -> float:
    """Symmetric boundary-to-boundary Hausdorff distance in millimeters.

    At the default 100th percentile this is the classic maximum over both
    directed distances; lower percentiles take the per-direction percentile
    before the symmetric max.  One empty side gives +inf (with a warning);
    two empty sides give 0.
    """
    _check_same_grid(pred, gt)
    if not (0 < percentile <= 100):
        raise ValidationError(f"percentile must be in (0, 100], got {percentile}", field="percentile")
    pb = np.argwhere(mask_boundary(pred)) * np.asarray(pred.spacing)
    gb = np.argwhere(mask_boundary(gt)) * np.asarray(gt.spacing)
    if len(pb) == 0 and len(gb) == 0:
        return 0.0
    if len(pb) == 0 or len(gb) == 0:
        warnings.warn("one mask is empty; Hausdorff distance is +inf")
        return float("inf")
    d_pg = cKDTree(gb).query(pb)[0]
    d_gp = cKDTree(pb).query(gb)[0]
    if percentile >= 100.0:
        return float(max(d_pg.max(), d_gp.max()))
    return float(max(np.percentile(d_pg, percentile), np.percentile(d_gp, percentile)))


def seg_scores(pred: BinaryMask, gt: BinaryMask, hd_percentile: float = 100.0) -> SegScores:
    """Overlap scores plus boundary Hausdorff distance for one case."""
    _check_same_grid(pred, gt)
    p = pred.data.astype(bool)
    g = gt.data.astype(bool)
    tp = int((p & g).sum())
    fp = int((p & ~g).sum())
    fn = int((~p & g).sum())
    tn = int((~p & ~g).sum())
    if tp + fp + fn == 0:
        warnings.warn("both masks are empty; overlap scores defined as 1")
        return SegScores(1.0, 1.0, 1.0, 1.0, 0.0)
    dsc = 2.0 * tp / (2 * tp + fp + fn)
    iou = tp / (tp + fp + fn)
    if tp + fn == 0:
        warnings.warn("ground truth is empty; sensitivity defined as 1")
        sens = 1.0
    else:
        sens = tp / (tp + fn)
    spec = 1.0 if tn + fp == 0 else tn / (tn + fp)
    return SegScores(dsc, iou, sens, spec, hausdorff_mm(pred, gt, hd_percentile))


def landmark_errors(pred: LandmarkSet, gt: LandmarkSet, spacing) -> LandmarkErrors:
    """Per-landmark localization errors over landmarks present in both sets.

    Landmarks present only in the prediction come back as false positives,
    only in the ground truth as false negatives.
    """
    pred_present = {e.name: e for e in pred.present()}
    gt_present = {e.name: e for e in gt.present()}
    both = [n for n in gt_present if n in pred_present]
    fps = tuple(n for n in pred_present if n not in gt_present)
    fns = tuple(n for n in gt_present if n not in pred_present)
    records = []
    for name in both:
        pv = np.asarray(pred_present[name].voxel)
        gv = np.asarray(gt_present[name].voxel)
        delta = pv - gv
        px = float(np.sqrt((delta.astype(float) ** 2).sum()))
        mm = euclidean_dist(pv, gv, spacing)
        axis = int(np.abs(delta).max())
        records.append(LandmarkError(name, px, mm, axis, axis <= 1))
    mms = [r.mm_error for r in records]
    return LandmarkErrors(
        per_landmark=tuple(records),
        false_positives=fps,
        false_negatives=fns,
        mean_mm=float(np.mean(mms)) if mms else float("nan"),
        median_mm=float(statistics.median_low(mms)) if mms else float("nan"),
    )


def _mean_median(values) -> dict:
    vals = [float(v) for v in values]
    if not vals:
        return {"mean": float("nan"), "median": float("nan"), "n": 0}
    # median of an even count is the lower middle value
    return {"mean": float(np.mean(vals)), "median": float(statistics.median_low(vals)), "n": len(vals)}


def aggregate(cases) -> dict:
    """Summarize per-case scores: mean and median (lower middle for ties).

    Accepts a list of SegScores, a list of LandmarkErrors (adding a
    per-landmark breakdown and box detection rates), or plain numbers.
    """
    cases = list(cases)
    if not cases:
        raise ValidationError("nothing to aggregate", field="cases")
    if all(isinstance(c, SegScores) for c in cases):
        out = {"n": len(cases)}
        for key in ("dsc", "iou", "sensitivity", "specificity", "hd_mm"):
            out[key] = _mean_median(getattr(c, key) for c in cases)
        return out
    if all(isinstance(c, LandmarkErrors) for c in cases):
        names: list[str] = []
        for c in cases:
            for rec in c.per_landmark:
                if rec.name not in names:
                    names.append(rec.name)
        per = {}
        for name in names:
            recs = [c.get(name) for c in cases]
            recs = [r for r in recs if r is not None]
            entry = _mean_median(r.mm_error for r in recs)
            entry["in_box_rate"] = float(np.mean([r.in_box for r in recs]))
            per[name] = entry
        all_mm = [r.mm_error for c in cases for r in c.per_landmark]
        out = _mean_median(all_mm)
        out["n"] = len(cases)
        out["per_landmark"] = per
        return out
    if all(isinstance(c, (int, float)) for c in cases):
        return _mean_median(cases)
    raise ValidationError("mixed or unsupported case types", field="cases")


def dsc_from_iou(iou: float) -> float:
    """Algebraic identity between the two overlap scores."""
    return 2.0 * iou / (1.0 + iou)
