"""Continuous-time steps: reactions, membrane diffusion, gas swelling and burst.

Amounts are attomol, volumes fL, so concentration (mM) = amount / volume.
Every step mutates the state in place and reports the total amount moved,
which the runner uses for its quiescence test.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

from ..core import (
    Compartment,
    Event,
    MassAction,
    MichaelisMenten,
    Mode,
    ModeError,
    Mvl,
    PermClass,
    Rule,
    SystemState,
    Target,
    morphology_for_depth,
)

log = logging.getLogger(__name__)

SOLVERS = ("forward-euler", "analytic-pairwise")


@dataclass
class KineticConfig:
    dt: float = 0.01  # s
    max_steps: int = 100_000
    burst_volume_ratio: float = 1.06
    gas_molar_volume_factor: float = 0.025  # fL per amol of gas produced
    diffusion_solver: str = "analytic-pairwise"
    quiescence_tol: float = 1e-12
    sample_every: int = 100
    indicator: tuple[str, float] | None = None  # (species, threshold mM)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.burst_volume_ratio > 1:
            raise ValueError("burst_volume_ratio must be > 1")
        if self.gas_molar_volume_factor < 0:
            raise ValueError("gas_molar_volume_factor must be >= 0")
        if self.diffusion_solver not in SOLVERS:
            raise ValueError(f"unknown diffusion solver {self.diffusion_solver!r}; expected one of {SOLVERS}")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        if self.sample_every < 1:
            raise ValueError("sample_every must be >= 1")


def _require_kinetic(state: SystemState) -> None:
    if state.mode is not Mode.KINETIC:
        raise ModeError("operation needs a kinetic-mode system")


def rate(rule: Rule, comp: Compartment, volume: float) -> float:
    """Reaction rate in mM/s at the compartment's current concentrations."""
    c = comp.contents
    k = rule.kinetics
    for s, n in rule.catalysts.items():
        if c.get(s, 0) <= 0:
            return 0.0
    if isinstance(k, MichaelisMenten):
        (substrate,) = rule.reactants
        s_conc = c.get(substrate, 0) / volume
        e_conc = c.get(k.enzyme, 0) / volume
        if s_conc <= 0 or e_conc <= 0:
            return 0.0
        return k.kcat * e_conc * s_conc / (k.km + s_conc)
    if isinstance(k, MassAction):
        v = k.k
        for s, n in rule.reactants.items():
            v *= (c.get(s, 0) / volume) ** n
        for s, n in rule.catalysts.items():
            v *= (c.get(s, 0) / volume) ** n
        return v
    return 0.0


def reaction_step(state: SystemState, dt: float, config: KineticConfig | None = None) -> float:
    """Advance all kinetic rules by ``dt`` in every intact compartment and the environment."""
    _require_kinetic(state)
    config = config or KineticConfig(dt=dt)
    factor = config.gas_molar_volume_factor
    moved = 0.0
    pairs = list(state.walk())
    for comp, parent in pairs:
        volume = comp.effective_volume(factor)
        extents = []
        for rule in state.rules:
            v = rate(rule, comp, volume)
            if v > 0:
                extents.append([rule, v * volume * dt])
        if not extents:
            continue
        demand: dict[str, float] = {}
        for rule, ext in extents:
            for s, n in rule.reactants.items():
                demand[s] = demand.get(s, 0.0) + n * ext
        limits = {s: comp.contents.get(s, 0) / d for s, d in demand.items() if d > comp.contents.get(s, 0)}
        if limits:
            state.clamp_count += 1
            log.warning("t=%g %s: reaction extents scaled to keep amounts nonnegative", state.clock, comp.id)
            for item in extents:
                scale = min((limits.get(s, 1.0) for s in item[0].reactants), default=1.0)
                item[1] *= scale
        children = [c for c in state.children_of(comp) if c.membrane_intact]
        for rule, ext in extents:
            for s, n in rule.reactants.items():
                comp.contents[s] = max(comp.contents.get(s, 0) - n * ext, 0.0)
                moved += n * ext
            for p in rule.products:
                amount = p.stoich * ext
                moved += amount
                if p.target is Target.OUT and parent is not None:
                    dests = [parent]
                elif p.target is Target.IN and children:
                    dests = children
                else:
                    dests = [comp]
                share = amount / len(dests)
                is_gas = state.species[p.species].perm_class is PermClass.GAS
                for dest in dests:
                    dest.contents.add(p.species, share)
                    if is_gas:
                        dest.gas_accumulated += share
    return moved


def _membranes(state: SystemState):
    """(compartment, outside) for every intact membrane, preorder."""
    return [(c, p) for c, p in state.walk(include_environment=False)]


def _diffusing_species(state: SystemState, comp: Compartment):
    for name in state.species:
        p = state.permeability_of(comp, name)
        if p > 0:
            yield name, p


def diffusion_step(state: SystemState, dt: float, config: KineticConfig | None = None) -> float:
    """Fickian exchange across every intact membrane: J = P * A * (c_out - c_in)."""
    _require_kinetic(state)
    config = config or KineticConfig(dt=dt)
    if config.diffusion_solver == "forward-euler":
        return _diffuse_euler(state, dt, config.gas_molar_volume_factor)
    return _diffuse_pairwise(state, dt, config.gas_molar_volume_factor)


def _diffuse_euler(state: SystemState, dt: float, factor: float) -> float:
    transfers = []  # (src, dst, species, amount)
    for comp, outside in _membranes(state):
        v_in = comp.effective_volume(factor)
        v_out = outside.effective_volume(factor)
        area = comp.area
        for name, p in _diffusing_species(state, comp):
            c_out = outside.contents.get(name, 0) / v_out
            c_in = comp.contents.get(name, 0) / v_in
            amount = p * area * (c_out - c_in) * dt
            if amount > 0:
                transfers.append((outside, comp, name, amount))
            elif amount < 0:
                transfers.append((comp, outside, name, -amount))
    outgoing: dict[tuple[int, str], float] = {}
    for src, _, name, amount in transfers:
        key = (id(src), name)
        outgoing[key] = outgoing.get(key, 0.0) + amount
    scale: dict[tuple[int, str], float] = {}
    for src, _, name, _ in transfers:
        key = (id(src), name)
        have = src.contents.get(name, 0)
        if outgoing[key] > have and key not in scale:
            scale[key] = have / outgoing[key]
            state.clamp_count += 1
            log.warning("t=%g %s: diffusion outflow of %s clamped to available amount", state.clock, src.id, name)
    moved = 0.0
    for src, dst, name, amount in transfers:
        amount *= scale.get((id(src), name), 1.0)
        src.contents[name] = max(src.contents.get(name, 0) - amount, 0.0)
        dst.contents.add(name, amount)
        moved += amount
    return moved


def _diffuse_pairwise(state: SystemState, dt: float, factor: float) -> float:
    """Exact two-box relaxation applied membrane by membrane (operator splitting)."""
    moved = 0.0
    for comp, outside in _membranes(state):
        v_in = comp.effective_volume(factor)
        v_out = outside.effective_volume(factor)
        area = comp.area
        for name, p in _diffusing_species(state, comp):
            n_in = comp.contents.get(name, 0)
            n_out = outside.contents.get(name, 0)
            gap = n_out / v_out - n_in / v_in
            if gap == 0:
                continue
            k = p * area * (1.0 / v_in + 1.0 / v_out)
            gap_new = gap * math.exp(-k * dt)
            total = n_in + n_out
            new_in = (total - v_out * gap_new) * v_in / (v_in + v_out)
            new_in = min(max(new_in, 0.0), total)
            moved += abs(new_in - n_in)
            comp.contents[name] = new_in
            outside.contents[name] = total - new_in
    return moved


def _liberate(state: SystemState, comp: Compartment, parent: Compartment) -> list[Mvl]:
    """Detach ``comp`` from the tree, moving its contents and gas to ``parent``.

    Children move up one level; when ``parent`` is the environment they
    become new MVLs, returned in order.
    """
    for s, q in comp.contents.items():
        if q:
            parent.contents.add(s, q)
    parent.gas_accumulated += comp.gas_accumulated
    comp.membrane_intact = False
    state.retired.add(comp.id)
    for child in comp.children:
        child.shift_depth(-1)
    if parent is state.environment:
        return [Mvl(morphology_for_depth(child.max_depth()), child) for child in comp.children]
    i = parent.children.index(comp)
    parent.children[i : i + 1] = comp.children
    return []


def swelling_and_burst(state: SystemState, config: KineticConfig | None = None) -> list[Event]:
    """Burst every compartment whose gas-swollen volume exceeds the critical ratio."""
    _require_kinetic(state)
    config = config or KineticConfig()
    factor = config.gas_molar_volume_factor
    candidates = sorted(
        (pair for pair in state.walk(include_environment=False)),
        key=lambda cp: (-cp[0].depth, cp[0].id),
    )
    events = []
    for comp, parent in candidates:
        if comp.gas_accumulated <= 0:
            continue
        if comp.effective_volume(factor) / comp.volume <= config.burst_volume_ratio:
            continue
        payload = comp.contents.nonzero()
        detail = f"gas={comp.gas_accumulated:.6g} amol; released into {parent.id}"
        if parent is state.environment:
            mvl = next(m for m in state.mvls if m.root is comp)
            i = state.mvls.index(mvl)
            state.mvls[i : i + 1] = _liberate(state, comp, parent)
        else:
            mvl = state.mvl_of(comp)
            _liberate(state, comp, parent)
            mvl.refresh_morphology()
        ev = Event(state.clock, "burst", comp.id, payload, detail)
        events.append(ev)
        state.events.append(ev)
    return events
