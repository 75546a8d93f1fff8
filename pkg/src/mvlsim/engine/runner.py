"""Run loop for both modes, with trace sampling and conservation audits."""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from ..core import Event, MvlError, Mode, SystemState
from .abstract import maximal_step
from .interventions import Intervention, apply_intervention, expire_electroporation
from .kinetic import KineticConfig, diffusion_step, reaction_step, swelling_and_burst


@dataclass
class AbstractConfig:
    max_steps: int = 100
    rng_seed: int = 0
    in_target_policy: str = "random-child"
    sample_every: int = 1

    def __post_init__(self):
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.in_target_policy != "random-child":
            raise ValueError("only the random-child policy is supported for `in` targets")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


class RunError(MvlError):
    def __init__(self, message: str, step: int):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class Row:
    compartment_id: str
    depth: int
    species: str
    amount: float
    concentration: float | None
    volume: float
    gas: float
    indicator: bool | None = None


@dataclass
class Sample:
    time: float
    step: int
    rows: list[Row]

    def total(self) -> float:
        return sum(r.amount for r in self.rows)


@dataclass
class Trace:
    mode: Mode
    species: list[str]
    samples: list[Sample] = field(default_factory=list)
    events: list[Event] = field(default_factory=list)
    halt_reason: str = ""
    steps: int = 0
    clamp_count: int = 0
    atoms: dict[str, dict[str, int]] = field(default_factory=dict)
    audit: list[tuple[float, dict[str, float]]] = field(default_factory=list)
    indicator: tuple[str, float] | None = None

    def audit_drift(self) -> dict[str, float]:
        """Largest relative deviation of each atom total from its initial value."""
        out = {}
        if not self.audit:
            return out
        first = self.audit[0][1]
        for tag, x0 in first.items():
            ref = abs(x0) or 1.0
            out[tag] = max(abs(totals[tag] - x0) for _, totals in self.audit) / ref
        return out

    def count(self, kind: str) -> int:
        return sum(1 for e in self.events if e.kind == kind)


def atom_totals(state: SystemState, atoms: Mapping[str, Mapping[str, int]]) -> dict[str, float]:
    totals = state.totals()
    return {tag: math.fsum(w * totals.get(s, 0) for s, w in weights.items()) for tag, weights in atoms.items()}


def snapshot(state: SystemState, step: int, gas_factor: float = 0.0, indicator=None) -> Sample:
    rows = []
    kinetic = state.mode is Mode.KINETIC
    for comp, _ in state.walk():
        volume = comp.effective_volume(gas_factor)
        flag = None
        if indicator is not None:
            name, threshold = indicator
            flag = comp.contents.get(name, 0) / volume >= threshold
        for name in state.species:
            amount = comp.contents.get(name, 0)
            rows.append(
                Row(
                    comp.id,
                    comp.depth,
                    name,
                    amount,
                    amount / volume if kinetic else None,
                    volume,
                    comp.gas_accumulated,
                    flag,
                )
            )
    return Sample(state.clock, step, rows)


def _activity(state: SystemState, config: KineticConfig) -> float:
    probe = copy.deepcopy(state)
    probe.events = []
    return reaction_step(probe, config.dt, config) + diffusion_step(probe, config.dt, config)


def _scale(state: SystemState) -> float:
    return sum(abs(q) for q in state.totals().values()) or 1.0


def run(
    state: SystemState,
    config: KineticConfig | AbstractConfig,
    schedule: Sequence[Intervention] = (),
    atoms: Mapping[str, Mapping[str, int]] | None = None,
) -> Trace:
    """Simulate ``state`` in place until halt, quiescence or ``max_steps``."""
    trace = Trace(state.mode, list(state.species), atoms={k: dict(v) for k, v in (atoms or {}).items()})
    pending = sorted(schedule, key=lambda iv: iv.time)
    n_events = len(state.events)
    if state.mode is Mode.ABSTRACT:
        if not isinstance(config, AbstractConfig):
            raise TypeError("abstract-mode systems need an AbstractConfig")
        _run_abstract(state, config, pending, trace)
    else:
        if not isinstance(config, KineticConfig):
            raise TypeError("kinetic-mode systems need a KineticConfig")
        _run_kinetic(state, config, pending, trace)
    trace.events = sorted(state.events[n_events:], key=Event.sort_key)
    trace.clamp_count = state.clamp_count
    return trace


def _apply_due(state: SystemState, pending: list[Intervention], step: int, eps: float) -> None:
    while pending and pending[0].time <= state.clock + eps:
        iv = pending.pop(0)
        try:
            apply_intervention(state, iv)
        except MvlError as exc:
            raise RunError(f"{iv.op} at t={iv.time:g}: {exc}", step) from exc
        except ValueError as exc:
            raise RunError(f"{iv.op} at t={iv.time:g}: {exc}", step) from exc


def _run_abstract(state, config: AbstractConfig, pending, trace: Trace) -> None:
    rng = np.random.default_rng(config.rng_seed)
    audit = bool(trace.atoms)
    trace.samples.append(snapshot(state, 0))
    if audit:
        trace.audit.append((state.clock, atom_totals(state, trace.atoms)))
    step = 0
    trace.halt_reason = "max_steps"
    while step < config.max_steps:
        _apply_due(state, pending, step, 0.0)
        maximal_step(state, rng)
        if state.halted:
            trace.halt_reason = "halt"
            break
        step += 1
        if audit:
            trace.audit.append((state.clock, atom_totals(state, trace.atoms)))
        if step % config.sample_every == 0:
            trace.samples.append(snapshot(state, step))
    trace.steps = step
    if trace.samples[-1].step != step:
        trace.samples.append(snapshot(state, step))


def _run_kinetic(state, config: KineticConfig, pending, trace: Trace) -> None:
    dt = config.dt
    eps = dt * 1e-6
    t0 = state.clock
    factor = config.gas_molar_volume_factor
    audit = bool(trace.atoms)
    trace.indicator = config.indicator

    def sample(step):
        trace.samples.append(snapshot(state, step, factor, config.indicator))

    _apply_due(state, pending, 0, eps)
    sample(0)
    if audit:
        trace.audit.append((state.clock, atom_totals(state, trace.atoms)))

    def boosting():
        return any(m.root.boost_until is not None for m in state.mvls)

    if not pending and not boosting() and _activity(state, config) <= config.quiescence_tol * _scale(state):
        trace.halt_reason = "quiescence"
        trace.steps = 0
        state.events.append(Event(state.clock, "halt", state.environment.id, {}, "quiescence"))
        return

    trace.halt_reason = "max_steps"
    step = 0
    while step < config.max_steps:
        try:
            _apply_due(state, pending, step, eps)
            expire_electroporation(state, eps)
            moved = reaction_step(state, dt, config)
            moved += diffusion_step(state, dt, config)
            state.clock = t0 + (step + 1) * dt
            bursts = swelling_and_burst(state, config)
        except MvlError as exc:
            if isinstance(exc, RunError):
                raise
            raise RunError(str(exc), step) from exc
        step += 1
        if audit:
            trace.audit.append((state.clock, atom_totals(state, trace.atoms)))
        if step % config.sample_every == 0:
            sample(step)
        if (
            not bursts
            and not pending
            and not boosting()
            and moved <= config.quiescence_tol * _scale(state)
        ):
            trace.halt_reason = "quiescence"
            state.events.append(Event(state.clock, "halt", state.environment.id, {}, "quiescence"))
            break
    trace.steps = step
    if trace.samples[-1].step != step:
        sample(step)
