"""Equal error rate and per-attack evaluation reports."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .exceptions import EvaluationError, FormatError

HUMAN = "human"
SPOOF = "spoof"
NO_ATTACK = "-"


@dataclass(frozen=True)
class ScoreEntry:
    utt_id: str
    score: float
    label: str
    attack_id: str = NO_ATTACK


def error_rates(positives, negatives):
    """Operating points at every distinct score, plus the ``+inf`` threshold.

    Returns ``(thresholds, frr, far)`` with ``frr(t) = P(pos < t)`` and
    ``far(t) = P(neg >= t)``.
    """
    pos = np.sort(np.asarray(positives, dtype=np.float64))
    neg = np.sort(np.asarray(negatives, dtype=np.float64))
    if pos.size == 0 or neg.size == 0:
        raise EvaluationError("EER needs at least one positive and one negative score")
    thresholds = np.unique(np.concatenate([pos, neg]))
    frr = np.searchsorted(pos, thresholds, side="left") / pos.size
    far = (neg.size - np.searchsorted(neg, thresholds, side="left")) / neg.size
    return np.append(thresholds, np.inf), np.append(frr, 1.0), np.append(far, 0.0)


def compute_eer(positives, negatives):
    """Equal error rate as a fraction in [0, 1].

    FRR rises and FAR falls as the threshold sweeps the sorted distinct
    scores. The EER is read where the two curves cross, interpolating
    linearly between the last operating point with ``FRR < FAR`` and the
    first with ``FRR >= FAR``. Only the score ranks matter.
    """
    _, frr, far = error_rates(positives, negatives)
    diff = frr - far
    i = int(np.argmax(diff >= 0.0))
    if diff[i] == 0.0:
        return float(frr[i])
    alpha = -diff[i - 1] / (diff[i] - diff[i - 1])
    return float(frr[i - 1] + alpha * (frr[i] - frr[i - 1]))


@dataclass
class EvalReport:
    per_attack_eer: dict
    known_avg: float | None
    unknown_avg: float | None
    all_avg: float | None
    known: list = field(default_factory=list)
    unknown: list = field(default_factory=list)
    missing: list = field(default_factory=list)
    pooled: bool = False

    def to_json(self):
        return json.dumps(asdict(self), indent=2, sort_keys=True) + "\n"

    def format_table(self, feature="score"):
        """Plain-text table: per-attack EERs, then Known / Unknown / All averages (in %)."""
        def fmt(v):
            return "n/a" if v is None else f"{v:.2f}"

        lines = [f"{'attack':<10}{'EER(%)':>10}"]
        lines += [f"{a:<10}{fmt(e):>10}" for a, e in self.per_attack_eer.items()]
        for name in self.missing:
            lines.append(f"{name:<10}{'no trials':>10}")
        width = max(len(feature), 12)
        lines += ["", f"{'feature':<{width}}{'Known':>10}{'Unknown':>10}{'All':>10}",
                  f"{feature:<{width}}{fmt(self.known_avg):>10}{fmt(self.unknown_avg):>10}{fmt(self.all_avg):>10}"]
        return "\n".join(lines) + "\n"


def _mean(values):
    return float(np.mean(values)) if values else None


def aggregate_report(entries, known, unknown, pooled=False):
    """Per-attack EERs (in %) against the full human set, plus group averages.

    Group averages are unweighted means of per-attack EERs. With ``pooled``
    each group's EER is instead computed once over all of its spoof trials.
    Attacks named in ``known``/``unknown`` without any trials are listed in
    ``missing`` and left out of the averages.
    """
    known, unknown = list(known), list(unknown)
    overlap = set(known) & set(unknown)
    if overlap:
        raise EvaluationError(f"attacks listed as both known and unknown: {sorted(overlap)}")
    human = [e.score for e in entries if e.label == HUMAN]
    by_attack = {}
    for e in entries:
        if e.label != SPOOF:
            continue
        if e.attack_id not in known and e.attack_id not in unknown:
            raise EvaluationError(f"spoof trial {e.utt_id} has unlisted attack {e.attack_id!r}")
        by_attack.setdefault(e.attack_id, []).append(e.score)
    if not human:
        raise EvaluationError("no human trials in score set")

    order = [a for a in known + unknown if a in by_attack]
    per_attack = {a: 100.0 * compute_eer(human, by_attack[a]) for a in order}
    missing = [a for a in known + unknown if a not in by_attack]

    def group(attacks):
        present = [a for a in attacks if a in by_attack]
        if not present:
            return None
        if pooled:
            return 100.0 * compute_eer(human, [s for a in present for s in by_attack[a]])
        return _mean([per_attack[a] for a in present])

    return EvalReport(per_attack_eer=per_attack, known_avg=group(known), unknown_avg=group(unknown),
                      all_avg=group(known + unknown), known=known, unknown=unknown, missing=missing,
                      pooled=pooled)


def write_scores(path, entries):
    with open(path, "w") as fh:
        for e in entries:
            fh.write(f"{e.utt_id}\t{e.score!r}\t{e.label}\t{e.attack_id}\n")


def read_scores(path):
    """Parse a ``utt_id<TAB>score<TAB>label<TAB>attack_id`` file."""
    entries = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            parts = line.rstrip("\n").split("\t")
            if len(parts) != 4:
                raise FormatError(f"{path}:{lineno}: expected 4 tab-separated fields, got {len(parts)}")
            utt, score, label, attack = parts
            if label not in (HUMAN, SPOOF):
                raise FormatError(f"{path}:{lineno}: label must be 'human' or 'spoof', got {label!r}")
            try:
                value = float(score)
            except ValueError:
                raise FormatError(f"{path}:{lineno}: bad score {score!r}") from None
            if not math.isfinite(value):
                raise FormatError(f"{path}:{lineno}: non-finite score")
            entries.append(ScoreEntry(utt, value, label, attack))
    return entries
