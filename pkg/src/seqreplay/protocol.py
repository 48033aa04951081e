"""Online learning -> consolidation -> recall, and the full experiment bundle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import metrics
from .circuit import (POPULATIONS, RECALL_LAG, CircuitState, PhaseMode, build_circuit,
                      circuit_step, set_phase_mode)
from .config import ExperimentConfig, config_hash
from .environment import (Codebook, SequenceSet, StimulusSchedule, build_balanced_codebook,
                          build_codebook, build_sequences, sample_replay_seeds,
                          schedule_online, stimulus_matrix)
from .errors import ConfigError, StructuralError

__all__ = [
    "ReplayEvent",
    "PhaseReport",
    "ExperimentResult",
    "run_online_phase",
    "run_consolidation_phase",
    "run_recall_phase",
    "run_experiment",
    "check_invariants",
]


class ReplayEvent(NamedTuple):
    start: int
    length: int
    seed: int


@dataclass
class PhaseReport:
    name: str
    start: int
    rasters: dict[str, np.ndarray]
    weights_before: dict[str, np.ndarray]
    weights_after: dict[str, np.ndarray]
    events: tuple = ()

    @property
    def duration(self) -> int:
        return next(iter(self.rasters.values())).shape[0]


def _snapshot(c: CircuitState) -> dict[str, np.ndarray]:
    return {"w_rec": c.w_rec.weights.copy(), "w_pred": c.w_pred.weights.copy()}


def _drive(c: CircuitState, stim: np.ndarray) -> dict[str, np.ndarray]:
    rasters = {name: np.zeros((stim.shape[0], c.n), dtype=bool) for name in POPULATIONS}
    for t in range(stim.shape[0]):
        _, spikes = circuit_step(c, stim[t])
        for name in POPULATIONS:
            rasters[name][t] = spikes[name]
    return rasters


def _check_codebook(c: CircuitState, codebook: Codebook):
    if codebook.n != c.n:
        raise StructuralError(f"codebook for n={codebook.n} used with a circuit of n={c.n}")


def run_online_phase(c: CircuitState, sched: StimulusSchedule, codebook: Codebook,
                     name: str = "online") -> tuple[CircuitState, PhaseReport]:
    _check_codebook(c, codebook)
    set_phase_mode(c, PhaseMode.ONLINE)
    start, before = c.t, _snapshot(c)
    rasters = _drive(c, stimulus_matrix(sched, codebook))
    return c, PhaseReport(name, start, rasters, before, _snapshot(c), sched.events)


def run_consolidation_phase(c: CircuitState, seeds, K: int, codebook: Codebook,
                            flash: int = 1, amplitude: float = 2.0
                            ) -> tuple[CircuitState, PhaseReport]:
    """Replay: each seed is flashed on the sensory population, then the network runs free.

    Every event starts from a quenched state and lasts ``K`` steps.
    """
    _check_codebook(c, codebook)
    if not 1 <= flash <= K:
        raise ConfigError(f"replay flash {flash} must lie in [1, K={K}]")
    set_phase_mode(c, PhaseMode.CONSOLIDATION)
    start, before = c.t, _snapshot(c)
    stim = np.zeros((K, c.n))
    chunks = {name: [] for name in POPULATIONS}
    events = []
    for e, pid in enumerate(seeds):
        c.quench()
        stim[:] = 0.0
        stim[:flash, list(codebook.patterns[pid])] = amplitude
        for name, r in _drive(c, stim).items():
            chunks[name].append(r)
        events.append(ReplayEvent(e * K, K, pid))
    rasters = {
        name: np.concatenate(ch) if ch else np.zeros((0, c.n), dtype=bool)
        for name, ch in chunks.items()
    }
    return c, PhaseReport("consolidation", start, rasters, before, _snapshot(c), tuple(events))


def run_recall_phase(c: CircuitState, sched: StimulusSchedule, codebook: Codebook,
                     plasticity_enabled: bool = True) -> tuple[CircuitState, PhaseReport]:
    previous = c.plasticity_enabled
    c.plasticity_enabled = plasticity_enabled
    try:
        return run_online_phase(c, sched, codebook, name="recall")
    finally:
        c.plasticity_enabled = previous


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    codebook: Codebook
    sequences: SequenceSet
    circuit: CircuitState
    reports: dict[str, PhaseReport]
    overlaps: dict[str, metrics.OverlapSeries]
    horizon: metrics.HorizonProfile
    transitions: list[dict]
    terminals: list[dict]
    replay: dict
    fixed_wiring: dict[str, bool]
    violations: list[str] = field(default_factory=list)

    @property
    def accuracy(self) -> tuple[int, int]:
        return sum(t["passed"] for t in self.transitions), len(self.transitions)

    def summary(self) -> dict:
        passed, total = self.accuracy
        return {
            "config_hash": config_hash(self.config),
            "seed": self.config.seed,
            "accuracy": {"passed": passed, "total": total},
            "transitions": self.transitions,
            "terminal_silence": self.terminals,
            "replay_fidelity": {k: v for k, v in self.replay.items() if k != "events"},
            "horizon_profile": {str(k): v for k, v in self.horizon.values.items()},
            "invariant_violations": list(self.violations),
        }


def check_invariants(reports: dict[str, PhaseReport], fixed_wiring: dict[str, bool],
                     fresh: bool = True) -> list[str]:
    """Return a description of every violated circuit invariant (empty when all hold)."""
    bad = []
    online = reports.get("online")
    if fresh and online is not None and online.rasters["prediction"].any():
        bad.append("prediction module active during pre-learning online phase")
    for name in ("online", "recall"):
        rep = reports.get(name)
        if rep is None:
            continue
        if rep.rasters["gate"].any():
            bad.append(f"gate population fired during {name} phase")
        if not np.array_equal(rep.weights_before["w_pred"], rep.weights_after["w_pred"]):
            bad.append(f"w_pred changed during {name} phase")
    cons = reports.get("consolidation")
    if cons is not None and not np.array_equal(cons.weights_before["w_rec"],
                                               cons.weights_after["w_rec"]):
        bad.append("w_rec changed during consolidation")
    for name, ok in fixed_wiring.items():
        if not ok:
            bad.append(f"fixed wiring {name} changed")
    return bad


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    env, proto = cfg.environment, cfg.protocol
    cb_seed, seq_seed, replay_seed = np.random.SeedSequence(cfg.seed).spawn(3)
    cb_rng = np.random.default_rng(cb_seed)
    if env.codebook == "balanced":
        codebook = build_balanced_codebook(cb_rng, cfg.n, cfg.k, cfg.num_patterns,
                                           env.max_shared)
    else:
        codebook = build_codebook(cb_rng, cfg.n, cfg.k, cfg.num_patterns)
    seqs = build_sequences(np.random.default_rng(seq_seed), codebook, env.num_sequences,
                           env.length, env.policy)

    c = build_circuit(cfg.n, cfg)
    fixed = {name: getattr(c, name).weights.copy()
             for name in ("w_sens_gate", "w_gate_pred", "w_sens_delay")}

    amp = cfg.stim_amp
    online_sched = schedule_online(seqs, env.duration, env.gap, env.seq_gap, env.repeats, amp)
    c, online = run_online_phase(c, online_sched, codebook)

    seeds = (sample_replay_seeds(seqs, proto.replay_count, np.random.default_rng(replay_seed))
             if proto.replay_count else [])
    c, cons = run_consolidation_phase(c, seeds, proto.replay_length, codebook,
                                      proto.replay_flash, amp)
    decay = cfg.circuit.post_consolidation_wrec_decay
    if decay != 1.0:
        c.w_rec = c.w_rec.replace(c.w_rec.weights * decay)

    recall_sched = schedule_online(seqs, env.duration, env.gap, env.seq_gap,
                                   proto.recall_repeats, amp)
    c, recall = run_recall_phase(c, recall_sched, codebook, proto.recall_plasticity)

    reports = {"online": online, "consolidation": cons, "recall": recall}
    fixed_ok = {name: bool(np.array_equal(w, getattr(c, name).weights))
                for name, w in fixed.items()}
    return ExperimentResult(
        config=cfg,
        codebook=codebook,
        sequences=seqs,
        circuit=c,
        reports=reports,
        overlaps={name: metrics.overlap_series(r, codebook) for name, r in reports.items()},
        horizon=metrics.horizon_profile(recall, seqs, codebook, RECALL_LAG),
        transitions=metrics.transition_scores(recall, seqs, codebook, RECALL_LAG),
        terminals=metrics.terminal_silence(recall, seqs, codebook, RECALL_LAG),
        replay=metrics.replay_fidelity(cons, seqs, codebook),
        fixed_wiring=fixed_ok,
        violations=check_invariants(reports, fixed_ok),
    )
