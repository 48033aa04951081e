"""Overlap read-outs and recall/replay scoring.

Overlap of a spike vector with a pattern is the fraction of the pattern's
neurons that are active.  Recall scoring looks at the prediction population
inside each presentation window shifted by the circuit's fixed latency.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .environment import Codebook, SequenceSet
from .errors import ConfigError, StructuralError

__all__ = [
    "SUCCESS_OVERLAP",
    "NONSUCCESSOR_LIMIT",
    "SILENCE_FRACTION",
    "REPLAY_ACTIVE",
    "REPLAY_PEAK",
    "OverlapSeries",
    "HorizonProfile",
    "overlap",
    "overlap_matrix",
    "overlap_series",
    "scoring_window",
    "transition_scores",
    "terminal_silence",
    "horizon_profile",
    "replay_fidelity",
]

SUCCESS_OVERLAP = 0.9
NONSUCCESSOR_LIMIT = 0.2
SILENCE_FRACTION = 0.1
# a replay step counts only if some pattern is at least half active
REPLAY_ACTIVE = 0.5
REPLAY_PEAK = 0.8


def overlap(spikes, pattern) -> float:
    idx = list(pattern)
    if not idx:
        raise ConfigError("overlap with an empty pattern is undefined")
    s = np.asarray(spikes)
    if min(idx) < 0 or max(idx) >= s.shape[0]:
        raise StructuralError("pattern indices outside the spike vector")
    return float(np.count_nonzero(s[idx])) / len(idx)


def overlap_matrix(raster: np.ndarray, codebook: Codebook) -> np.ndarray:
    """(T, num_patterns) overlaps of every row of ``raster`` with every pattern."""
    raster = np.asarray(raster, dtype=bool)
    if raster.ndim != 2 or raster.shape[1] != codebook.n:
        raise StructuralError(f"raster shape {raster.shape} does not fit n={codebook.n}")
    counts = raster.astype(np.int64) @ codebook.matrix().T.astype(np.int64)
    return counts / codebook.k


@dataclass
class OverlapSeries:
    pattern_ids: list[int]
    series: dict[str, np.ndarray]

    def __getitem__(self, population: str) -> np.ndarray:
        return self.series[population]


@dataclass
class HorizonProfile:
    values: dict[int, float]

    def __getitem__(self, offset: int) -> float:
        return self.values[offset]


def overlap_series(report, codebook: Codebook) -> OverlapSeries:
    return OverlapSeries(
        codebook.ids,
        {name: overlap_matrix(r, codebook) for name, r in report.rasters.items()},
    )


def scoring_window(event, lag: int, total: int) -> slice:
    return slice(min(event.start + lag, total), min(event.stop + lag, total))


def _window_overlaps(raster, event, codebook, lag):
    win = raster[scoring_window(event, lag, raster.shape[0])]
    if win.shape[0] == 0:
        return np.zeros(len(codebook)), win
    return overlap_matrix(win, codebook).mean(axis=0), win


def _excess_overlap(win: np.ndarray, pattern, successor) -> float:
    """Mean fraction of a pattern's neurons outside ``successor`` that fire."""
    own = [i for i in pattern if i not in set(successor)]
    if not own or win.shape[0] == 0:
        return 0.0
    return float(win[:, own].mean())


def transition_scores(recall_report, seqs: SequenceSet, codebook: Codebook, lag: int):
    """Score every presentation of a non-terminal pattern.

    ``max_other`` is the largest plain overlap with any non-successor.
    ``max_other_excess`` ignores neurons a competitor shares with the true
    successor (those fire whenever the successor is correctly predicted); it
    is reported as a diagnostic only.
    """
    raster = recall_report.rasters["prediction"]
    col = {pid: i for i, pid in enumerate(codebook.ids)}
    out = []
    for ev in recall_report.events:
        seq = seqs.sequences[ev.sequence]
        if ev.position >= len(seq) - 1:
            continue
        succ = seq[ev.position + 1]
        means, win = _window_overlaps(raster, ev, codebook, lag)
        others = [pid for pid in codebook.ids if pid != succ]
        excess = [_excess_overlap(win, codebook.patterns[pid], codebook.patterns[succ])
                  for pid in others]
        raw = [means[col[pid]] for pid in others]
        succ_ov = float(means[col[succ]])
        max_other = max(raw, default=0.0)
        out.append({
            "sequence": ev.sequence,
            "position": ev.position,
            "pattern": ev.pattern_id,
            "successor": succ,
            "successor_overlap": succ_ov,
            "max_other": float(max_other),
            "max_other_excess": float(max(excess, default=0.0)),
            "passed": bool(succ_ov >= SUCCESS_OVERLAP and max_other <= NONSUCCESSOR_LIMIT),
        })
    return out


def terminal_silence(recall_report, seqs: SequenceSet, codebook: Codebook, lag: int,
                     fraction: float = SILENCE_FRACTION):
    raster = recall_report.rasters["prediction"]
    out = []
    for ev in recall_report.events:
        seq = seqs.sequences[ev.sequence]
        if ev.position != len(seq) - 1:
            continue
        win = raster[scoring_window(ev, lag, raster.shape[0])]
        limit = fraction * codebook.k * ev.duration
        count = int(np.count_nonzero(win))
        out.append({
            "sequence": ev.sequence,
            "pattern": ev.pattern_id,
            "spikes": count,
            "limit": float(limit),
            "passed": bool(count <= limit),
        })
    return out


def horizon_profile(recall_report, seqs: SequenceSet, codebook: Codebook,
                    lag: int) -> HorizonProfile:
    """Mean prediction overlap with the pattern ``offset`` steps ahead in its sequence."""
    raster = recall_report.rasters["prediction"]
    col = {pid: i for i, pid in enumerate(codebook.ids)}
    longest = max((len(s) for s in seqs), default=1)
    sums = {d: [] for d in range(1, longest)}
    for ev in recall_report.events:
        seq = seqs.sequences[ev.sequence]
        means, _ = _window_overlaps(raster, ev, codebook, lag)
        for d in range(1, len(seq) - ev.position):
            sums[d].append(means[col[seq[ev.position + d]]])
    return HorizonProfile({d: float(np.mean(v)) if v else 0.0 for d, v in sums.items()})


def _dedup(xs):
    out = []
    for x in xs:
        if not out or out[-1] != x:
            out.append(x)
    return out


def replay_fidelity(cons_report, seqs: SequenceSet, codebook: Codebook):
    """Check each replay event's sensory argmax trajectory against its sequence suffix.

    An event passes when the deduplicated trajectory is a prefix of
    ``[p_j, ..., p_L]``, reaches at least the successor of a non-terminal
    seed, and every successor it visits peaks at or above ``REPLAY_PEAK``.
    """
    ov_all = overlap_matrix(cons_report.rasters["sensory"], codebook)
    ids = codebook.ids
    events = []
    for ev in cons_report.events:
        ov = ov_all[ev.start:ev.start + ev.length]
        active = ov.max(axis=1) >= REPLAY_ACTIVE if len(ov) else np.zeros(0, bool)
        trajectory = _dedup([ids[i] for i in ov[active].argmax(axis=1)])
        si, j = seqs.position(ev.seed)
        suffix = list(seqs.sequences[si][j:])
        is_prefix = trajectory == suffix[:len(trajectory)] and len(trajectory) >= 1
        peaks = {pid: float(ov[:, ids.index(pid)].max()) if len(ov) else 0.0
                 for pid in trajectory[1:]}
        reached = len(suffix) == 1 or len(trajectory) >= 2
        passed = bool(is_prefix and reached and all(p >= REPLAY_PEAK for p in peaks.values()))
        events.append({
            "seed": ev.seed,
            "trajectory": trajectory,
            "expected": suffix,
            "complete": trajectory == suffix,
            "passed": passed,
        })
    n_pass = sum(e["passed"] for e in events)
    return {
        "passed": n_pass,
        "total": len(events),
        "fraction": n_pass / len(events) if events else 0.0,
        "complete": sum(e["complete"] for e in events),
        "events": events,
    }
