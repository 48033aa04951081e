"""Local two-factor learning rules gated by a global binary modulator.

Both rules share the same antisymmetric pair term over one synapse,

    pre_trace[i] * post_spike[j] - pre_spike[i] * post_trace[j]

which potentiates pre-before-post pairings and depresses the reverse.  The
recurrent rule is scaled by ``r`` and the prediction rule by ``1 - r``, so
exactly one of the two matrices is plastic at any time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import SynapseMatrix, _as_spikes
from .errors import ConfigError, StructuralError

__all__ = [
    "ModulatorState",
    "PlasticityConfig",
    "pair_term",
    "stdp_update",
    "pred_update",
    "clip_weights",
]


@dataclass
class ModulatorState:
    r: int = 1

    def __post_init__(self):
        if self.r not in (0, 1):
            raise ConfigError(f"modulator r must be 0 or 1, got {self.r!r}")


@dataclass(frozen=True)
class PlasticityConfig:
    learning_rate: float
    trace_decay: float
    w_min: float = 0.0
    w_max: float = 1.0

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0.0 < self.trace_decay < 1.0:
            raise ConfigError(f"trace_decay must lie in (0, 1), got {self.trace_decay}")
        if self.w_min > self.w_max:
            raise ConfigError(f"w_min {self.w_min} exceeds w_max {self.w_max}")


def pair_term(pre_spikes, pre_traces, post_spikes, post_traces) -> np.ndarray:
    """Unscaled weight change for every (pre, post) synapse."""
    xs = _as_spikes(pre_spikes).astype(np.float64)
    ys = _as_spikes(post_spikes).astype(np.float64)
    xt = np.asarray(pre_traces, dtype=np.float64)
    yt = np.asarray(post_traces, dtype=np.float64)
    if xs.shape != xt.shape or ys.shape != yt.shape:
        raise StructuralError("spike and trace vectors differ in length")
    return np.outer(xt, ys) - np.outer(xs, yt)


def _apply(w: SynapseMatrix, gain: float, delta: np.ndarray, cfg: PlasticityConfig,
           keep_diagonal: bool) -> SynapseMatrix:
    if delta.shape != w.weights.shape:
        raise StructuralError(f"update of shape {delta.shape} for weights {w.weights.shape}")
    if gain == 0:
        return w
    new = np.clip(w.weights + gain * delta, cfg.w_min, cfg.w_max)
    if keep_diagonal:
        np.fill_diagonal(new, np.diagonal(w.weights))
    return SynapseMatrix(new, cfg.w_min, cfg.w_max, w.delay)


def _traces(t):
    return t.values if hasattr(t, "values") else t


def stdp_update(w: SynapseMatrix, pre_spikes, pre_traces, post_spikes, post_traces,
                r: ModulatorState, cfg: PlasticityConfig,
                same_population: bool = False) -> SynapseMatrix:
    """Online STDP step, active only while ``r == 1``.

    Traces must be the values from the end of the previous step and spikes
    those of the current step.  With ``same_population`` the diagonal is
    left untouched (self-synapses do not exist).

    Returns the input matrix itself when the modulator gates learning off.
    """
    delta = pair_term(pre_spikes, _traces(pre_traces), post_spikes, _traces(post_traces))
    return _apply(w, cfg.learning_rate * r.r, delta, cfg, same_population)


def pred_update(w_pred: SynapseMatrix, pre_spikes, pre_traces, post_spikes, post_traces,
                r: ModulatorState, cfg: PlasticityConfig) -> SynapseMatrix:
    """Consolidation step for the prediction weights, active only while ``r == 0``."""
    delta = pair_term(pre_spikes, _traces(pre_traces), post_spikes, _traces(post_traces))
    return _apply(w_pred, cfg.learning_rate * (1 - r.r), delta, cfg, False)


def clip_weights(w: SynapseMatrix) -> SynapseMatrix:
    return SynapseMatrix(np.clip(w.weights, w.w_min, w.w_max), w.w_min, w.w_max, w.delay)
