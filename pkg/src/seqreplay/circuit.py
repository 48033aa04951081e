"""Four-population sensory/prediction circuit with gated consolidation.

Populations, all of size ``n``:

* ``sensory``: receives stimuli, recurrently connected through plastic ``w_rec``.
* ``gate``: one-to-one relay sensory -> prediction, silenced by a strong
  inhibitory bias while online.
* ``delay``: one-to-one copy of sensory with axonal delay 2, so it fires in
  lock-step with the gate-driven prediction neurons.
* ``prediction``: driven by the gate (consolidation) and by the delay
  population through plastic ``w_pred`` (recall).

Every arc has a latency of at least one step.  During consolidation the
sensory population also gets a subthreshold excitability bias, which lets
learned recurrent weights carry activity from one pattern to the next.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .core import PopulationState, SynapseMatrix, integrate_and_fire, propagate, decay_traces
from .errors import StructuralError
from .plasticity import ModulatorState, PlasticityConfig, pred_update, stdp_update

__all__ = ["PhaseMode", "CircuitState", "POPULATIONS", "build_circuit", "set_phase_mode",
           "circuit_step", "RECALL_LAG"]

POPULATIONS = ("sensory", "gate", "prediction", "delay")

GATE_DELAY = 1
GATE_PRED_DELAY = 1
SENS_DELAY_DELAY = 2
PRED_DELAY = 1
# stimulus on sensory at t shows up on prediction, via delay and w_pred, at t + 3
RECALL_LAG = SENS_DELAY_DELAY + PRED_DELAY


class PhaseMode(enum.Enum):
    ONLINE = "online"
    CONSOLIDATION = "consolidation"


@dataclass
class CircuitState:
    sensory: PopulationState
    gate: PopulationState
    prediction: PopulationState
    delay: PopulationState
    w_rec: SynapseMatrix
    w_pred: SynapseMatrix
    w_sens_gate: SynapseMatrix
    w_gate_pred: SynapseMatrix
    w_sens_delay: SynapseMatrix
    rec_cfg: PlasticityConfig
    pred_cfg: PlasticityConfig
    gate_inhibition: float
    replay_bias: float
    modulator: ModulatorState = field(default_factory=ModulatorState)
    mode: PhaseMode = PhaseMode.ONLINE
    plasticity_enabled: bool = True
    t: int = 0

    @property
    def n(self) -> int:
        return self.sensory.size

    def population(self, name: str) -> PopulationState:
        return getattr(self, name)

    def quench(self) -> None:
        for name in POPULATIONS:
            self.population(name).quench()


def build_circuit(n: int, cfg: ExperimentConfig) -> CircuitState:
    if n < 2:
        raise StructuralError(f"population size must be >= 2, got {n}")
    theta, leak = cfg.threshold, cfg.snn.leak

    def pop(name, depth):
        return PopulationState.create(n, leak=leak, threshold=theta,
                                      trace_decay=cfg.trace_decay(name), depth=depth)

    rec_cfg = cfg.rec_plasticity()
    pred_cfg = cfg.pred_plasticity()
    c = CircuitState(
        sensory=pop("sensory", max(SENS_DELAY_DELAY, GATE_DELAY, 1)),
        gate=pop("gate", GATE_PRED_DELAY),
        prediction=pop("prediction", 1),
        delay=pop("delay", PRED_DELAY),
        w_rec=SynapseMatrix.zeros(n, n, rec_cfg.w_min, rec_cfg.w_max, delay=1),
        w_pred=SynapseMatrix.zeros(n, n, pred_cfg.w_min, pred_cfg.w_max, delay=PRED_DELAY),
        w_sens_gate=SynapseMatrix.one_to_one(n, cfg.w_drive, GATE_DELAY),
        w_gate_pred=SynapseMatrix.one_to_one(n, cfg.w_drive, GATE_PRED_DELAY),
        w_sens_delay=SynapseMatrix.one_to_one(n, cfg.w_drive, SENS_DELAY_DELAY),
        rec_cfg=rec_cfg,
        pred_cfg=pred_cfg,
        gate_inhibition=cfg.gate_inhibition,
        replay_bias=cfg.replay_bias,
    )
    set_phase_mode(c, PhaseMode.ONLINE)
    return c


def set_phase_mode(c: CircuitState, mode: PhaseMode) -> CircuitState:
    """Switch between online learning (r=1, gate inhibited) and consolidation.

    All voltages, traces and in-flight spikes are quenched on every switch.
    """
    c.mode = PhaseMode(mode)
    c.modulator = ModulatorState(1 if c.mode is PhaseMode.ONLINE else 0)
    c.quench()
    return c


def _biases(c: CircuitState) -> dict[str, float]:
    online = c.mode is PhaseMode.ONLINE
    return {
        "sensory": 0.0 if online else c.replay_bias,
        "gate": -c.gate_inhibition if online else 0.0,
        "prediction": 0.0,
        "delay": 0.0,
    }


def circuit_step(c: CircuitState, external_sensory) -> tuple[CircuitState, dict[str, np.ndarray]]:
    """Advance the whole circuit by one global timestep (mutates ``c``)."""
    n = c.n
    ext = np.asarray(external_sensory, dtype=np.float64)
    if ext.shape != (n,):
        raise StructuralError(f"external input of shape {ext.shape} for {n} sensory neurons")
    sens_h, gate_h, delay_h = c.sensory.history, c.gate.history, c.delay.history

    inputs = {
        "sensory": [(c.w_rec, sens_h)],
        "gate": [(c.w_sens_gate, sens_h)],
        "prediction": [(c.w_gate_pred, gate_h), (c.w_pred, delay_h)],
        "delay": [(c.w_sens_delay, sens_h)],
    }
    currents = {}
    for name in POPULATIONS:
        cur = np.zeros(n)
        for w, source in inputs[name]:
            cur += propagate(w, source.delayed(w.delay))
        currents[name] = cur

    biases = _biases(c)
    spikes = {}
    for name in POPULATIONS:
        pop = c.population(name)
        external = (ext if name == "sensory" else np.zeros(n)) + biases[name]
        pop.voltage, spikes[name] = integrate_and_fire(pop.voltage, currents[name], external)

    if c.plasticity_enabled:
        s = spikes["sensory"]
        c.w_rec = stdp_update(c.w_rec, s, c.sensory.traces, s, c.sensory.traces,
                              c.modulator, c.rec_cfg, same_population=True)
        c.w_pred = pred_update(c.w_pred, spikes["delay"], c.delay.traces,
                               spikes["prediction"], c.prediction.traces,
                               c.modulator, c.pred_cfg)

    for name in POPULATIONS:
        pop = c.population(name)
        pop.traces = decay_traces(pop.traces, spikes[name])
        pop.history.push(spikes[name])
    c.t += 1
    return c, spikes
