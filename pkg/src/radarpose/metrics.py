"""Pose evaluation: person matching, joint errors, aggregate reporting.

People are matched greedily by pelvis distance (closest pair first,
up to a cutoff). Errors are reported in centimeters:

* JPE: Euclidean error of one joint, no alignment
* MRPE: pelvis JPE (so it always equals the pelvis column exactly)
* MPJPE: mean per-joint error after translating the prediction so the
  pelvises coincide
* Abs-MPJPE: mean JPE over all 15 joints

plus per-region columns (thorax, head, wrist, ankle; left/right
averaged) taken from the unaligned JPE values.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ValidationError
from .pose import JOINT_COUNT, Person, PoseSet

DEFAULT_MATCH_DISTANCE = 0.5

THORAX = 1
HEAD = 2
WRISTS = (5, 8)
ANKLES = (11, 14)


def match_persons(
    pred: PoseSet, truth: PoseSet, max_distance: float = DEFAULT_MATCH_DISTANCE
) -> tuple[list[tuple[int, int]], list[int], list[int]]:
    """Greedy closest-pelvis matching.

    Returns (matches, unmatched predictions, unmatched truths); matches
    are (prediction index, truth index) pairs with pelvis distance at
    most ``max_distance``.
    """
    n_p, n_t = len(pred), len(truth)
    matches: list[tuple[int, int]] = []
    used_p: set[int] = set()
    used_t: set[int] = set()
    if n_p and n_t:
        pp = np.stack([person.pelvis for person in pred])
        tp = np.stack([person.pelvis for person in truth])
        dist = np.linalg.norm(pp[:, None, :] - tp[None, :, :], axis=2)
        while len(used_p) < n_p and len(used_t) < n_t:
            best = None
            for i in range(n_p):
                if i in used_p:
                    continue
                for j in range(n_t):
                    if j in used_t:
                        continue
                    if best is None or dist[i, j] < best[0]:
                        best = (dist[i, j], i, j)
            if best is None or best[0] > max_distance:
                break
            matches.append((best[1], best[2]))
            used_p.add(best[1])
            used_t.add(best[2])
    return (
        matches,
        [i for i in range(n_p) if i not in used_p],
        [j for j in range(n_t) if j not in used_t],
    )


def joint_errors(pred: Person, truth: Person) -> np.ndarray:
    """(15,) Euclidean joint errors (JPE) in meters, no alignment."""
    return np.linalg.norm(pred.joints - truth.joints, axis=1)


jpe = joint_errors


def aligned_joint_errors(pred: Person, truth: Person) -> np.ndarray:
    """(15,) joint errors after translating the prediction pelvis onto the truth."""
    shifted = pred.joints - pred.pelvis + truth.pelvis
    return np.linalg.norm(shifted - truth.joints, axis=1)


def mrpe(pred: Person, truth: Person) -> float:
    return float(joint_errors(pred, truth)[0])


def mpjpe(pred: Person, truth: Person) -> float:
    return float(aligned_joint_errors(pred, truth).mean())


def abs_mpjpe(pred: Person, truth: Person) -> float:
    return float(joint_errors(pred, truth).mean())


class _Accumulator:
    def __init__(self):
        self.frames = 0
        self.matched = 0
        self.missed = 0
        self.false_positives = 0
        self.aligned_sum = np.zeros(JOINT_COUNT)
        self.jpe_sum = np.zeros(JOINT_COUNT)

    def add_frame(self, pred: PoseSet, truth: PoseSet, max_distance: float):
        self.frames += 1
        matches, extra_pred, extra_truth = match_persons(pred, truth, max_distance)
        self.matched += len(matches)
        self.false_positives += len(extra_pred)
        self.missed += len(extra_truth)
        for pi, ti in matches:
            self.aligned_sum += aligned_joint_errors(pred.people[pi], truth.people[ti])
            self.jpe_sum += joint_errors(pred.people[pi], truth.people[ti])

    def row(self, label: str) -> "ReportRow":
        if self.matched:
            aligned_cm = 100.0 * self.aligned_sum / self.matched
            jpe_cm = 100.0 * self.jpe_sum / self.matched
            mpjpe_cm = float(aligned_cm.mean())
            abs_mpjpe_cm = float(jpe_cm.mean())
        else:
            jpe_cm = np.full(JOINT_COUNT, math.nan)
            mpjpe_cm = abs_mpjpe_cm = math.nan
        return ReportRow(
            label=label,
            frames=self.frames,
            matched=self.matched,
            missed=self.missed,
            false_positives=self.false_positives,
            mrpe_cm=float(jpe_cm[0]),
            mpjpe_cm=mpjpe_cm,
            abs_mpjpe_cm=abs_mpjpe_cm,
            thorax_cm=float(jpe_cm[THORAX]),
            head_cm=float(jpe_cm[HEAD]),
            wrist_cm=float(jpe_cm[list(WRISTS)].mean()),
            ankle_cm=float(jpe_cm[list(ANKLES)].mean()),
            per_joint_cm=[float(v) for v in jpe_cm],
        )


@dataclass
class ReportRow:
    label: str
    frames: int
    matched: int
    missed: int
    false_positives: int
    mrpe_cm: float
    mpjpe_cm: float
    abs_mpjpe_cm: float
    thorax_cm: float
    head_cm: float
    wrist_cm: float
    ankle_cm: float
    per_joint_cm: list[float] = field(default_factory=list)


@dataclass
class EvalReport:
    rows: list[ReportRow]

    @property
    def overall(self) -> ReportRow:
        return self.rows[0]


def evaluate(
    preds: list[PoseSet],
    truths: list[PoseSet],
    actions: list[str] | None = None,
    max_distance: float = DEFAULT_MATCH_DISTANCE,
) -> EvalReport:
    if len(preds) != len(truths):
        raise ValidationError(
            f"{len(preds)} prediction frames vs {len(truths)} truth frames"
        )
    if actions is not None and len(actions) != len(preds):
        raise ValidationError("one action label per frame required")
    overall = _Accumulator()
    per_action: dict[str, _Accumulator] = {}
    for f, (pred, truth) in enumerate(zip(preds, truths)):
        overall.add_frame(pred, truth, max_distance)
        if actions is not None:
            per_action.setdefault(actions[f], _Accumulator()).add_frame(
                pred, truth, max_distance
            )
    rows = [overall.row("all")]
    for action in sorted(per_action):
        rows.append(per_action[action].row(action))
    return EvalReport(rows)


def _fmt(value: float) -> str:
    return "     -" if math.isnan(value) else f"{value:6.2f}"


def report_text(report: EvalReport) -> str:
    header = (
        f"{'label':<12} {'frames':>6} {'match':>5} {'miss':>5} {'fpos':>5} "
        f"{'MRPE':>6} {'MPJPE':>6} {'AbsMPJPE':>8} {'Thorax':>6} {'Head':>6} "
        f"{'Wrist':>6} {'Ankle':>6}"
    )
    lines = [header, "-" * len(header)]
    for row in report.rows:
        lines.append(
            f"{row.label:<12} {row.frames:>6} {row.matched:>5} {row.missed:>5} "
            f"{row.false_positives:>5} {_fmt(row.mrpe_cm)} {_fmt(row.mpjpe_cm)} "
            f"{_fmt(row.abs_mpjpe_cm):>8} {_fmt(row.thorax_cm)} {_fmt(row.head_cm)} "
            f"{_fmt(row.wrist_cm)} {_fmt(row.ankle_cm)}"
        )
    lines.append("(errors in cm; region columns are unaligned JPE, L/R averaged)")
    return "\n".join(lines)


def report_json(report: EvalReport) -> str:
    def clean(value):
        if isinstance(value, float) and math.isnan(value):
            return None
        return value

    rows = []
    for row in report.rows:
        d = asdict(row)
        rows.append({k: clean(v) if not isinstance(v, list) else [clean(x) for x in v]
                     for k, v in d.items()})
    return json.dumps({"rows": rows}, indent=2, sort_keys=True)
