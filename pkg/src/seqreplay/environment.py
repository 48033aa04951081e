"""Pattern codebooks, sequences and stimulus schedules.

Text format used by ``write_codebook`` / ``write_sequences`` (tab separated)::

    # codebook n=128 k=16 seed=3
    pattern<TAB>0<TAB>4,17,23,...
    # sequences
    sequence<TAB>0<TAB>5,2,11,0,9
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ConfigError

__all__ = [
    "Codebook",
    "SequenceSet",
    "StimulusEvent",
    "StimulusSchedule",
    "build_codebook",
    "build_balanced_codebook",
    "build_sequences",
    "schedule_online",
    "sample_replay_seeds",
    "stimulus_matrix",
    "write_codebook",
    "read_codebook",
    "write_sequences",
    "read_sequences",
]


def _rng(seed):
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


@dataclass(frozen=True)
class Codebook:
    n: int
    k: int
    patterns: dict[int, tuple[int, ...]]
    seed: int | None = None

    def __post_init__(self):
        for pid, idx in self.patterns.items():
            if len(idx) != self.k or len(set(idx)) != self.k:
                raise ConfigError(f"pattern {pid} must have {self.k} distinct indices")
            if min(idx) < 0 or max(idx) >= self.n:
                raise ConfigError(f"pattern {pid} has indices outside [0, {self.n})")

    def __len__(self):
        return len(self.patterns)

    @property
    def ids(self) -> list[int]:
        return sorted(self.patterns)

    def indicator(self, pid: int) -> np.ndarray:
        v = np.zeros(self.n, dtype=bool)
        v[list(self.patterns[pid])] = True
        return v

    def matrix(self) -> np.ndarray:
        """Boolean (num_patterns, n) membership matrix, rows in id order."""
        return np.stack([self.indicator(pid) for pid in self.ids])


@dataclass(frozen=True)
class SequenceSet:
    sequences: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        object.__setattr__(self, "sequences", tuple(tuple(s) for s in self.sequences))
        for s in self.sequences:
            if len(set(s)) != len(s):
                raise ConfigError(f"pattern repeated within sequence {s}")

    def __len__(self):
        return len(self.sequences)

    def __iter__(self):
        return iter(self.sequences)

    @property
    def observed(self) -> list[int]:
        return sorted({p for s in self.sequences for p in s})

    def position(self, pid: int) -> tuple[int, int]:
        """(sequence index, position) of the first occurrence of ``pid``."""
        for si, s in enumerate(self.sequences):
            if pid in s:
                return si, s.index(pid)
        raise KeyError(pid)


class StimulusEvent(NamedTuple):
    start: int
    duration: int
    pattern_id: int
    amplitude: float
    sequence: int = -1
    position: int = -1

    @property
    def stop(self) -> int:
        return self.start + self.duration


@dataclass(frozen=True)
class StimulusSchedule:
    events: tuple[StimulusEvent, ...]
    total_steps: int
    gap: int = 0
    seq_gap: int = 0

    def __post_init__(self):
        object.__setattr__(self, "events", tuple(self.events))
        last = 0
        for ev in self.events:
            if ev.duration < 1:
                raise ConfigError("stimulus durations must be >= 1")
            if ev.start < last:
                raise ConfigError("stimulus events overlap or are out of order")
            last = ev.stop
        if last > self.total_steps:
            raise ConfigError("events extend past the end of the schedule")

    def __len__(self):
        return len(self.events)


def build_codebook(seed, n: int, k: int, num_patterns: int) -> Codebook:
    if k > n:
        raise ConfigError(f"k: pattern size {k} exceeds population size {n}")
    if k < 1:
        raise ConfigError("k: pattern size must be >= 1")
    if num_patterns < 1:
        raise ConfigError("num_patterns must be >= 1")
    rng = _rng(seed)
    patterns = {
        pid: tuple(int(i) for i in np.sort(rng.choice(n, size=k, replace=False)))
        for pid in range(num_patterns)
    }
    return Codebook(n, k, patterns, seed if isinstance(seed, int) else None)


def build_balanced_codebook(seed, n: int, k: int, num_patterns: int,
                            max_shared: int | None = None, tries: int = 200,
                            restarts: int = 100) -> Codebook:
    """Codebook with even neuron usage and bounded pairwise overlap.

    Each pattern is drawn uniformly from the neurons whose usage is still
    below ``ceil(num_patterns * k / n)``, and redrawn while it shares more
    than ``max_shared`` neurons (default ``k // 5``) with an earlier pattern.
    Independent uniform draws put some neurons into four or five patterns and
    occasionally produce pairs sharing half their neurons; both show up as
    crosstalk in learned associations.
    """
    if k > n:
        raise ConfigError(f"k: pattern size {k} exceeds population size {n}")
    if k < 1:
        raise ConfigError("k: pattern size must be >= 1")
    if num_patterns < 1:
        raise ConfigError("num_patterns must be >= 1")
    if max_shared is None:
        max_shared = k // 5
    rng = _rng(seed)
    cap = math.ceil(num_patterns * k / n)
    for _ in range(restarts):
        usage = np.zeros(n, dtype=int)
        chosen: list[set[int]] = []
        for _pid in range(num_patterns):
            avail = np.flatnonzero(usage < cap)
            if avail.size < k:
                break
            for _ in range(tries):
                pick = rng.choice(avail, size=k, replace=False)
                s = set(pick.tolist())
                if all(len(s & q) <= max_shared for q in chosen):
                    break
            else:
                break
            chosen.append(s)
            usage[pick] += 1
        else:
            patterns = {pid: tuple(sorted(s)) for pid, s in enumerate(chosen)}
            return Codebook(n, k, patterns, seed if isinstance(seed, int) else None)
    raise ConfigError(
        f"could not place {num_patterns} patterns of size {k} in {n} neurons "
        f"with at most {max_shared} shared neurons per pair"
    )


def build_sequences(seed, codebook: Codebook, num_sequences: int, length: int,
                    policy: str = "disjoint") -> SequenceSet:
    """Draw ``num_sequences`` sequences of ``length`` distinct pattern ids.

    ``disjoint`` partitions a random permutation of the codebook so no id is
    shared between sequences; ``shared`` samples each sequence independently.
    """
    if length < 1 or num_sequences < 0:
        raise ConfigError("length must be >= 1 and num_sequences >= 0")
    rng = _rng(seed)
    ids = np.array(codebook.ids)
    if policy == "disjoint":
        if num_sequences * length > len(ids):
            raise ConfigError(
                f"need {num_sequences * length} patterns for {num_sequences} disjoint "
                f"sequences of length {length}, codebook has {len(ids)}"
            )
        perm = rng.permutation(ids)
        seqs = [tuple(int(p) for p in perm[i * length:(i + 1) * length])
                for i in range(num_sequences)]
    elif policy == "shared":
        if length > len(ids):
            raise ConfigError(f"sequence length {length} exceeds codebook size {len(ids)}")
        seqs = [tuple(int(p) for p in rng.choice(ids, size=length, replace=False))
                for _ in range(num_sequences)]
    else:
        raise ConfigError(f"unknown sequence policy {policy!r}")
    return SequenceSet(tuple(seqs))


def schedule_online(seqs: SequenceSet, D: int, G: int, G_seq: int, repeats: int,
                    amplitude: float = 2.0) -> StimulusSchedule:
    if D < 1 or G < 0 or G_seq < 0 or repeats < 1:
        raise ConfigError("need D >= 1, G >= 0, G_seq >= 0, repeats >= 1")
    events = []
    t = 0
    for _ in range(repeats):
        for si, seq in enumerate(seqs):
            for j, pid in enumerate(seq):
                events.append(StimulusEvent(t, D, pid, amplitude, si, j))
                t += D + (G if j < len(seq) - 1 else 0)
            t += G_seq
    return StimulusSchedule(tuple(events), t, G, G_seq)


def stimulus_matrix(schedule: StimulusSchedule, codebook: Codebook) -> np.ndarray:
    """Dense (total_steps, n) external current implied by a schedule."""
    out = np.zeros((schedule.total_steps, codebook.n))
    for ev in schedule.events:
        out[ev.start:ev.stop, list(codebook.patterns[ev.pattern_id])] = ev.amplitude
    return out


def sample_replay_seeds(seqs: SequenceSet, count: int, rng) -> list[int]:
    pool = seqs.observed
    if not pool:
        raise ConfigError("cannot sample replay seeds from an empty sequence set")
    if count < 0:
        raise ConfigError("replay count must be >= 0")
    draws = _rng(rng).integers(0, len(pool), size=count)
    return [pool[i] for i in draws]


def write_codebook(path, codebook: Codebook) -> None:
    lines = [f"# codebook n={codebook.n} k={codebook.k} seed={codebook.seed}"]
    for pid in codebook.ids:
        lines.append(f"pattern\t{pid}\t" + ",".join(map(str, codebook.patterns[pid])))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_codebook(path) -> Codebook:
    n = k = None
    seed = None
    patterns = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# codebook"):
            fields = dict(tok.split("=") for tok in line.split()[2:])
            n, k = int(fields["n"]), int(fields["k"])
            seed = None if fields["seed"] == "None" else int(fields["seed"])
        elif line.startswith("pattern\t"):
            _, pid, idx = line.split("\t")
            patterns[int(pid)] = tuple(int(i) for i in idx.split(","))
    if n is None:
        raise ConfigError(f"{path}: missing codebook header")
    return Codebook(n, k, patterns, seed)


def write_sequences(path, seqs: SequenceSet) -> None:
    lines = ["# sequences"]
    for si, s in enumerate(seqs):
        lines.append(f"sequence\t{si}\t" + ",".join(map(str, s)))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_sequences(path) -> SequenceSet:
    seqs = []
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("sequence\t"):
            _, _, ids = line.split("\t")
            seqs.append(tuple(int(i) for i in ids.split(",")) if ids else ())
    return SequenceSet(tuple(seqs))
