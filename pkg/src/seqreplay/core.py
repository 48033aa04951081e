"""Discrete-time spiking dynamics.

Neurons are leaky integrate-and-fire units updated once per integer
timestep.  Every synapse has an axonal delay of at least one step, so a
spike emitted at ``t`` reaches its target no earlier than ``t + delay``.
Spikes are plain boolean arrays; traces and voltages are float64 arrays.

Per-step order used throughout the package::

    propagate (buffered past spikes) -> integrate_and_fire
        -> plasticity (traces from t-1, spikes at t) -> decay_traces
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import NumericError, StructuralError

__all__ = [
    "TraceState",
    "VoltageState",
    "SynapseMatrix",
    "SpikeRing",
    "PopulationState",
    "decay_traces",
    "propagate",
    "integrate_and_fire",
    "step_population",
]


def _as_spikes(spikes) -> np.ndarray:
    s = np.asarray(spikes)
    if s.dtype != bool:
        if not np.all((s == 0) | (s == 1)):
            raise StructuralError("spike vectors must contain only 0 and 1")
        s = s.astype(bool)
    return s


@dataclass
class TraceState:
    """Eligibility traces of one population.

    ``decay`` is the per-step retention factor, ``exp(-1/tau)`` for a trace
    time constant ``tau`` measured in steps.
    """

    values: np.ndarray
    decay: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not 0.0 < self.decay < 1.0:
            raise StructuralError(f"trace decay must lie in (0, 1), got {self.decay}")

    @classmethod
    def zeros(cls, n: int, decay: float) -> "TraceState":
        return cls(np.zeros(n), decay)

    @property
    def bound(self) -> float:
        return 1.0 / (1.0 - self.decay)


@dataclass
class VoltageState:
    values: np.ndarray
    leak: float
    threshold: float

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if not 0.0 <= self.leak < 1.0:
            raise StructuralError(f"leak must lie in [0, 1), got {self.leak}")
        if not self.threshold > 0:
            raise StructuralError(f"threshold must be positive, got {self.threshold}")

    @classmethod
    def zeros(cls, n: int, leak: float, threshold: float) -> "VoltageState":
        return cls(np.zeros(n), leak, threshold)


@dataclass
class SynapseMatrix:
    """Directed weights, rows presynaptic and columns postsynaptic.

    Bounds are enforced by the plasticity operations (and ``clip_weights``),
    not on construction.
    """

    weights: np.ndarray
    w_min: float = -np.inf
    w_max: float = np.inf
    delay: int = 1

    def __post_init__(self):
        self.weights = np.array(self.weights, dtype=np.float64)
        if self.weights.ndim != 2:
            raise StructuralError("weights must be a 2-d matrix")
        if self.w_min > self.w_max:
            raise StructuralError(f"bounds reversed: [{self.w_min}, {self.w_max}]")
        if int(self.delay) != self.delay or self.delay < 1:
            raise StructuralError(f"synaptic delay must be an integer >= 1, got {self.delay}")
        self.delay = int(self.delay)

    @property
    def shape(self) -> tuple[int, int]:
        return self.weights.shape

    @classmethod
    def zeros(cls, n_pre: int, n_post: int, w_min=-np.inf, w_max=np.inf, delay=1):
        return cls(np.zeros((n_pre, n_post)), w_min, w_max, delay)

    @classmethod
    def one_to_one(cls, n: int, weight: float, delay: int = 1) -> "SynapseMatrix":
        return cls(np.eye(n) * weight, min(0.0, weight), max(0.0, weight), delay)

    def replace(self, weights: np.ndarray) -> "SynapseMatrix":
        return SynapseMatrix(weights, self.w_min, self.w_max, self.delay)

    def in_bounds(self) -> bool:
        return bool(np.all(self.weights >= self.w_min) and np.all(self.weights <= self.w_max))


class SpikeRing:
    """Fixed-depth buffer of the most recent spike vectors.

    ``delayed(1)`` is the vector pushed last (the previous step).
    """

    def __init__(self, n: int, depth: int):
        if depth < 1:
            raise StructuralError("ring depth must be >= 1")
        self.n = n
        self.depth = depth
        self._buf: deque[np.ndarray] = deque(
            (np.zeros(n, dtype=bool) for _ in range(depth)), maxlen=depth
        )

    def push(self, spikes: np.ndarray) -> None:
        s = _as_spikes(spikes)
        if s.shape != (self.n,):
            raise StructuralError(f"expected {self.n} spikes, got shape {s.shape}")
        self._buf.appendleft(s.copy())

    def delayed(self, delay: int) -> np.ndarray:
        if not 1 <= delay <= self.depth:
            raise StructuralError(f"delay {delay} outside ring depth {self.depth}")
        return self._buf[delay - 1]

    def clear(self) -> None:
        for s in self._buf:
            s[:] = False


@dataclass
class PopulationState:
    voltage: VoltageState
    traces: TraceState
    history: SpikeRing = field(repr=False)

    @classmethod
    def create(cls, n: int, *, leak: float, threshold: float, trace_decay: float,
               depth: int = 1) -> "PopulationState":
        return cls(
            VoltageState.zeros(n, leak, threshold),
            TraceState.zeros(n, trace_decay),
            SpikeRing(n, depth),
        )

    @property
    def size(self) -> int:
        return self.voltage.values.shape[0]

    def quench(self) -> None:
        self.voltage.values[:] = 0.0
        self.traces.values[:] = 0.0
        self.history.clear()


def decay_traces(traces: TraceState, spikes) -> TraceState:
    s = _as_spikes(spikes)
    if s.shape != traces.values.shape:
        raise StructuralError(
            f"trace/spike length mismatch: {traces.values.shape} vs {s.shape}"
        )
    return TraceState(traces.decay * traces.values + s, traces.decay)


def propagate(w: SynapseMatrix, spikes) -> np.ndarray:
    """Synaptic current ``current[j] = sum_i w[i, j] * spikes[i]``.

    Active rows are accumulated one at a time in ascending presynaptic
    order, so the result is reproducible bit-for-bit independently of the
    BLAS in use.
    """
    s = _as_spikes(spikes)
    n_pre, n_post = w.weights.shape
    if s.shape != (n_pre,):
        raise StructuralError(f"{s.shape[0]} spikes for {n_pre} presynaptic rows")
    current = np.zeros(n_post)
    for i in np.flatnonzero(s):
        current += w.weights[i]
    return current


def integrate_and_fire(v: VoltageState, current, external) -> tuple[VoltageState, np.ndarray]:
    current = np.asarray(current, dtype=np.float64)
    external = np.asarray(external, dtype=np.float64)
    if current.shape != v.values.shape or external.shape != v.values.shape:
        raise StructuralError("current/external length does not match the population")
    if not (np.all(np.isfinite(current)) and np.all(np.isfinite(external))):
        raise NumericError("non-finite input current")
    u = v.leak * v.values + current + external
    spikes = u >= v.threshold
    u[spikes] = 0.0
    return VoltageState(u, v.leak, v.threshold), spikes


def step_population(
    pop: PopulationState,
    delayed_inputs: Sequence[tuple[SynapseMatrix, SpikeRing]],
    external,
    plasticity: Callable[[TraceState, np.ndarray], None] | None = None,
) -> tuple[PopulationState, np.ndarray]:
    """Advance one population by a single step.

    ``delayed_inputs`` pairs each incoming synapse with the spike history of
    its source population; the synapse's delay selects which past vector is
    propagated.  ``plasticity`` is called with the traces as they stood at
    the end of the previous step and the new spikes.  The new spikes are
    appended to ``pop.history`` last, so recurrent inputs always see the past.
    """
    current = np.zeros(pop.size)
    for w, source in delayed_inputs:
        current += propagate(w, source.delayed(w.delay))
    voltage, spikes = integrate_and_fire(pop.voltage, current, external)
    if plasticity is not None:
        plasticity(pop.traces, spikes)
    pop.voltage = voltage
    pop.traces = decay_traces(pop.traces, spikes)
    pop.history.push(spikes)
    return pop, spikes
