"""Lower a checked syntax tree into a runnable system state."""

from __future__ import annotations

from dataclasses import dataclass, field

from ..core import (
    DEFAULT_ENVIRONMENT_VOLUME,
    Abstract,
    Compartment,
    InvariantError,
    MassAction,
    MichaelisMenten,
    Mixture,
    Mode,
    Morphology,
    Mvl,
    PermClass,
    Product,
    Rule,
    Species,
    SystemState,
    default_permeability_table,
    make_environment,
    morphology_for_depth,
)
from ..distributions import TruncatedDist
from ..engine.interventions import Intervention
from ..engine.kinetic import KineticConfig
from ..engine.runner import AbstractConfig
from ..population import GeneratorParams, embed_swelling_solution, sample_population
from .ast import CompartmentDecl, DistDecl, Entry, GeneratorDecl, ScenarioAst
from .lexer import Diagnostic, ScenarioError
from .parser import parse


@dataclass
class Scenario:
    name: str
    state: SystemState
    schedule: list[Intervention]
    config: KineticConfig | AbstractConfig
    atoms: dict[str, dict[str, int]] = field(default_factory=dict)
    warnings: list[Diagnostic] = field(default_factory=list)


def _dist(d: DistDecl, integer: bool = False) -> TruncatedDist:
    return TruncatedDist(d.mean, d.sd, d.low, d.high, d.family, integer=integer)


def generator_params(g: GeneratorDecl) -> GeneratorParams:
    """Build population parameters; raises ValueError on bad values."""
    return GeneratorParams(
        type_prevalence=tuple(g.prevalence),
        outer_diameter=_dist(g.diameter),
        t3_diameter=_dist(g.t3_diameter),
        internal_count=_dist(g.internal_count, integer=True),
        t3_internal_count_range=tuple(g.t3_internal_count),
        child_diameter_fraction=tuple(g.child_fraction),
        t3_child_diameter_fraction=tuple(g.t3_child_fraction),
        seed=g.seed,
    )


class _Lowerer:
    def __init__(self, ast: ScenarioAst, text_lines: list[str]):
        self.ast = ast
        self.lines = text_lines
        self.kinetic = ast.mode == "kinetic"
        self.errors: list[Diagnostic] = []
        self.warnings: list[Diagnostic] = []

    def diag(self, pos, message, severity="error"):
        line, col = pos
        excerpt = self.lines[line - 1][:200] if 1 <= line <= len(self.lines) else ""
        d = Diagnostic(severity, line, col, message, excerpt)
        (self.errors if severity == "error" else self.warnings).append(d)

    def amounts(self, entries: list[Entry], volume: float) -> Mixture:
        mix = Mixture()
        for e in entries:
            mix[e.species] = e.value * volume if e.unit == "mM" else e.value
        return mix

    def tree(self, decl: CompartmentDecl, depth: int) -> Compartment:
        comp = Compartment(decl.name, depth, float(decl.diameter))
        comp.contents = self.amounts(decl.contents, comp.volume)
        if depth > 1:
            for e in decl.contents:
                if self.species[e.species].perm_class is PermClass.PARTICLE and e.value > 0:
                    self.diag(
                        e.pos,
                        f"particle species `{e.species}` placed in inner compartment `{decl.name}`; "
                        "particles cannot cross membranes",
                        "warning",
                    )
        comp.children = [self.tree(c, depth + 1) for c in decl.children]
        return comp

    def positions(self, decl: CompartmentDecl, out: dict) -> None:
        out[decl.name] = decl.pos
        for c in decl.children:
            self.positions(c, out)

    def lower(self) -> Scenario:
        ast = self.ast
        mode = Mode(ast.mode)
        self.species = {
            s.name: Species(s.name, PermClass(s.perm_class), s.perm) for s in ast.species
        }
        perm = default_permeability_table()
        for pe in ast.permeability:
            perm[PermClass(pe.perm_class)] = float(pe.value)

        env_decl = ast.environment
        volume = DEFAULT_ENVIRONMENT_VOLUME
        if env_decl is not None and env_decl.volume is not None:
            volume = float(env_decl.volume)
        env = make_environment(volume)
        if env_decl is not None:
            env.contents = self.amounts(env_decl.entries, volume)

        mvls: list[Mvl] = []
        if ast.generator is not None:
            g = ast.generator
            try:
                mvls = sample_population(generator_params(g), g.n, seed=g.seed)
            except (ValueError, InvariantError) as exc:
                self.diag(g.pos, f"population generation failed: {exc}")
        else:
            positions: dict = {}
            for decl in ast.compartments:
                self.positions(decl, positions)
                root = self.tree(decl, 1)
                depth = root.max_depth()
                morph = Morphology(decl.morphology) if decl.morphology else morphology_for_depth(min(depth, 3))
                mvl = Mvl(morph, root)
                try:
                    mvl.validate()
                except InvariantError as exc:
                    pos = positions.get(exc.compartment_id, decl.pos)
                    self.diag(pos, str(exc))
                mvls.append(mvl)

        if ast.swelling is not None and mvls:
            assignments = {e.species: float(e.value) for e in ast.swelling}
            mvls = [embed_swelling_solution(m, assignments, self.species, mode) for m in mvls]

        rules = [self.rule(r) for r in ast.rules]
        state = SystemState(
            self.species, env, mvls, rules, mode=mode, rng_seed=ast.run.seed, permeability=perm
        )
        try:
            state.validate()
        except InvariantError as exc:
            self.diag(ast.pos, str(exc))

        ids = {c.id for c, _ in state.walk()}
        roots = {m.id for m in mvls}
        schedule = []
        for iv in ast.schedule:
            args = list(iv.args)
            if iv.op in ("dc_pulse", "electroporate") and args[0] not in roots:
                self.diag(iv.pos, f"unknown MVL `{args[0]}`")
            elif iv.op in ("inject", "insert_channel") and args[0] not in ids:
                self.diag(iv.pos, f"unknown compartment `{args[0]}`")
            if iv.op == "inject":
                args = args[:3]
            schedule.append(Intervention(float(iv.time), iv.op, tuple(args)))

        r = ast.run
        if self.kinetic:
            config = KineticConfig(
                dt=float(r.dt),
                max_steps=r.steps,
                burst_volume_ratio=float(r.burst_ratio),
                gas_molar_volume_factor=float(r.gas_factor),
                diffusion_solver=r.solver,
                quiescence_tol=float(r.quiescence_tol),
                sample_every=r.sample_every,
                indicator=(r.indicator[0], float(r.indicator[1])) if r.indicator else None,
            )
        else:
            config = AbstractConfig(max_steps=r.steps, rng_seed=r.seed, sample_every=r.sample_every)
        if self.errors:
            raise ScenarioError(self.errors)
        atoms = {a.tag: dict(a.weights) for a in ast.atoms}
        return Scenario(ast.name, state, schedule, config, atoms, self.warnings)

    def rule(self, r) -> Rule:
        def multiset(terms):
            out: dict[str, int] = {}
            for t in terms:
                out[t.species] = out.get(t.species, 0) + t.stoich
            return out

        k = r.kinetics
        if k is None:
            kin = Abstract()
        elif k.kind == "priority":
            kin = Abstract(int(k.params["value"]))
        elif k.kind == "mm":
            kin = MichaelisMenten(float(k.params["kcat"]), float(k.params["km"]), k.params["enzyme"])
        else:
            kin = MassAction(float(k.params["k"]))
        products = tuple(Product(t.species, t.stoich, t.target) for t in r.products)
        return Rule(r.name, multiset(r.reactants), products, multiset(r.catalysts), kin)


def lower(ast: ScenarioAst, text: str = "") -> Scenario:
    """Build a Scenario; core invariant violations become ScenarioError diagnostics."""
    return _Lowerer(ast, text.split("\n")).lower()


def load_scenario(text: str | bytes) -> Scenario:
    """Parse, check and lower scenario source text."""
    if isinstance(text, (bytes, bytearray)):
        ast = parse(text)
        text = bytes(text).decode("utf-8")
    else:
        ast = parse(text)
    return lower(ast, text.lstrip("﻿"))


__all__ = ["Scenario", "generator_params", "load_scenario", "lower"]
