"""Experimental interventions: DC lysis, electroporation, microinjection, channels."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from ..core import (
    ENVIRONMENT_ID,
    Event,
    InvariantError,
    Mode,
    ModeError,
    SystemState,
    UnknownIdError,
)
from .kinetic import _liberate

OPERATIONS = ("dc_pulse", "electroporate", "inject", "insert_channel")


@dataclass(frozen=True)
class Intervention:
    """A scheduled operation; ``args`` follow the scenario-language argument order."""

    time: float
    op: str
    args: tuple

    def __post_init__(self):
        if self.op not in OPERATIONS:
            raise ValueError(f"unknown intervention {self.op!r}")


def dc_pulse(state: SystemState, targets: Iterable[str]) -> list[Event]:
    """Lyse the outer membrane of each target MVL, freeing its inner liposomes intact."""
    targets = list(targets)
    by_id = {m.id: m for m in state.mvls}
    for t in targets:
        if t not in by_id and t not in state.retired:
            raise UnknownIdError(f"unknown MVL {t!r}")
    events = []
    for t in targets:
        mvl = next((m for m in state.mvls if m.id == t), None)
        if mvl is None:
            ev = Event(state.clock, "dc_lysis", t, {}, "already lysed; no-op")
        else:
            payload = mvl.root.contents.nonzero()
            i = state.mvls.index(mvl)
            freed = _liberate(state, mvl.root, state.environment)
            state.mvls[i : i + 1] = freed
            ev = Event(state.clock, "dc_lysis", t, payload, f"freed {len(freed)} liposomes")
        events.append(ev)
        state.events.append(ev)
    return events


def electroporate(state: SystemState, mvl_id: str, duration: float, boost: float) -> list[Event]:
    """Multiply the outer membrane's permeability by ``boost`` for ``duration`` seconds."""
    if state.mode is not Mode.KINETIC:
        raise ModeError("electroporation needs a kinetic-mode system")
    if not duration > 0:
        raise ValueError("electroporation duration must be > 0")
    if not boost >= 1:
        raise ValueError("electroporation boost must be >= 1")
    mvl = next((m for m in state.mvls if m.id == mvl_id), None)
    if mvl is None:
        raise UnknownIdError(f"unknown MVL {mvl_id!r}")
    root = mvl.root
    root.perm_boost = boost
    root.boost_until = state.clock + duration
    ev = Event(state.clock, "electroporation_open", root.id, {}, f"boost={boost:g} until t={root.boost_until:g}")
    state.events.append(ev)
    return [ev]


def expire_electroporation(state: SystemState, eps: float = 1e-9) -> list[Event]:
    events = []
    for mvl in state.mvls:
        root = mvl.root
        if root.boost_until is not None and state.clock >= root.boost_until - eps:
            root.perm_boost = 1.0
            root.boost_until = None
            ev = Event(state.clock, "electroporation_close", root.id)
            events.append(ev)
            state.events.append(ev)
    return events


def microinject(state: SystemState, compartment_id: str, species: str, amount) -> list[Event]:
    if species not in state.species:
        raise UnknownIdError(f"unknown species {species!r}")
    if amount < 0:
        raise ValueError("injected amount must be >= 0")
    if state.mode is Mode.ABSTRACT and amount != int(amount):
        raise ModeError("abstract mode only accepts whole object counts")
    comp, _ = state.find(compartment_id)
    if amount:
        comp.contents.add(species, int(amount) if state.mode is Mode.ABSTRACT else float(amount))
    ev = Event(state.clock, "injection", comp.id, {species: amount})
    state.events.append(ev)
    return [ev]


def insert_channel(state: SystemState, compartment_id: str, species: str, permeability: float) -> None:
    """Add a channel pathway for ``species`` to one membrane (adds to its permeability)."""
    if species not in state.species:
        raise UnknownIdError(f"unknown species {species!r}")
    if permeability < 0:
        raise ValueError("channel permeability must be >= 0")
    if compartment_id == ENVIRONMENT_ID:
        raise InvariantError("the environment has no membrane")
    comp, _ = state.find(compartment_id)
    comp.channels[species] = comp.channels.get(species, 0.0) + permeability


def apply_intervention(state: SystemState, iv: Intervention) -> list[Event]:
    if iv.op == "dc_pulse":
        return dc_pulse(state, iv.args)
    if iv.op == "electroporate":
        target, duration, boost = iv.args
        return electroporate(state, target, duration, boost)
    if iv.op == "inject":
        comp, species, amount = iv.args
        return microinject(state, comp, species, amount)
    comp, species, p = iv.args
    insert_channel(state, comp, species, p)
    return []
