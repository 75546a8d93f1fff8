"""Maximally parallel multiset rewriting (abstract P-system semantics)."""

from __future__ import annotations

from collections import Counter
from typing import Mapping

import numpy as np

from ..core import Compartment, Event, Mixture, Mode, ModeError, Rule, SystemState, Target


def applicable(rule: Rule, compartment: Compartment, available: Mapping | None = None) -> bool:
    """Whether one more application of ``rule`` fits in ``available`` (default: the contents)."""
    if not compartment.membrane_intact:
        return False
    pool = compartment.contents if available is None else available
    if rule.has_in_target and not any(c.membrane_intact for c in compartment.children):
        return False
    return all(pool.get(s, 0) >= n for s, n in rule.needs.items())


def _max_times(rule: Rule, pool: Mapping) -> int:
    return min(pool.get(s, 0) // n for s, n in rule.needs.items())


def select_applications(
    rules: list[Rule], compartment: Compartment, rng: np.random.Generator
) -> tuple[Counter, Mixture]:
    """Uniform-random greedy maximal multiset of rule applications.

    Returns (rule name -> times, residual contents after reserving reactants
    and catalysts).  Among applicable rules only those of the highest
    priority are candidates.
    """
    pool = Mixture(compartment.contents)
    chosen: Counter = Counter()
    # an empty `needs` would be applicable forever; such rules are rejected upstream
    candidates = [r for r in rules if r.needs and applicable(r, compartment, pool)]
    while candidates:
        top = max(r.kinetics.priority for r in candidates)
        tier = [r for r in candidates if r.kinetics.priority == top]
        if len(tier) == 1:
            rule = tier[0]
            times = _max_times(rule, pool)
        else:
            rule = tier[int(rng.integers(len(tier)))]
            times = 1
        for s, n in rule.needs.items():
            pool[s] -= n * times
        chosen[rule.name] += times
        candidates = [r for r in candidates if applicable(r, compartment, pool)]
    return chosen, pool


def maximal_step(state: SystemState, rng: np.random.Generator) -> Counter:
    """One maximally parallel step, in place.

    Returns the multiset of applications keyed by (rule name, compartment id).
    Sets ``state.halted`` when nothing applied anywhere.  The environment is
    passive and does not evolve.
    """
    if state.mode is not Mode.ABSTRACT:
        raise ModeError("maximal_step needs an abstract-mode system")
    applications: Counter = Counter()
    if state.halted:
        return applications
    rules = {r.name: r for r in state.rules}
    plan = []
    for comp, parent in state.walk(include_environment=False):
        chosen, _ = select_applications(state.rules, comp, rng)
        if chosen:
            plan.append((comp, parent, chosen))
    if not plan:
        state.halted = True
        state.events.append(Event(state.clock, "halt", state.environment.id, {}, "no applicable rule"))
        return applications
    for comp, _, chosen in plan:
        for name, times in chosen.items():
            for s, n in rules[name].reactants.items():
                comp.contents[s] -= n * times
    for comp, parent, chosen in plan:
        intact = [c for c in comp.children if c.membrane_intact]
        for name, times in chosen.items():
            applications[(name, comp.id)] += times
            for p in rules[name].products:
                if p.target is Target.HERE:
                    comp.contents.add(p.species, p.stoich * times)
                elif p.target is Target.OUT:
                    parent.contents.add(p.species, p.stoich * times)
                else:
                    for _ in range(times):
                        child = intact[int(rng.integers(len(intact)))]
                        child.contents.add(p.species, p.stoich)
    state.clock += 1
    return applications


def total_objects(state: SystemState) -> int:
    return sum(q for comp, _ in state.walk() for q in comp.contents.values())
