"""Syntax tree for `.psys` scenario files.

Nodes compare structurally; source positions are carried for diagnostics
but excluded from equality so that reformatted text parses to an equal tree.
"""

from __future__ import annotations

from dataclasses import dataclass, field

Pos = tuple[int, int]


def _pos():
    return field(default=(0, 0), compare=False, repr=False)


@dataclass
class SpeciesDecl:
    name: str
    perm_class: str
    perm: float | None = None
    pos: Pos = _pos()


@dataclass
class AtomDecl:
    tag: str
    weights: list[tuple[str, int]]
    pos: Pos = _pos()


@dataclass
class Entry:
    """``species: value [unit]`` inside a braced mixture."""

    species: str
    value: float
    unit: str | None = None
    pos: Pos = _pos()


@dataclass
class PermEntry:
    perm_class: str
    value: float
    pos: Pos = _pos()


@dataclass
class EnvironmentDecl:
    volume: float | None = None  # fL
    entries: list[Entry] = field(default_factory=list)
    pos: Pos = _pos()


@dataclass
class CompartmentDecl:
    name: str
    diameter: float
    morphology: str | None = None
    contents: list[Entry] = field(default_factory=list)
    children: list[CompartmentDecl] = field(default_factory=list)
    pos: Pos = _pos()


@dataclass
class DistDecl:
    family: str
    mean: float
    sd: float
    low: float
    high: float


@dataclass
class GeneratorDecl:
    n: int = 1
    seed: int = 0
    prevalence: tuple[float, ...] = (0.72, 0.12, 0.08, 0.08)
    diameter: DistDecl = field(default_factory=lambda: DistDecl("lognormal", 64.60, 40.19, 17.39, 173.50))
    t3_diameter: DistDecl = field(default_factory=lambda: DistDecl("lognormal", 127.81, 70.96, 69.97, 246.18))
    internal_count: DistDecl = field(default_factory=lambda: DistDecl("normal", 5.10, 3.15, 1, 14))
    t3_internal_count: tuple[int, int] = (15, 50)
    child_fraction: tuple[float, float] = (0.10, 0.45)
    t3_child_fraction: tuple[float, float] = (0.05, 0.25)
    pos: Pos = _pos()


@dataclass
class Term:
    species: str
    stoich: int = 1
    target: str = "here"
    pos: Pos = _pos()


@dataclass
class KineticsDecl:
    kind: str  # "mm" | "mass_action" | "priority"
    params: dict[str, object] = field(default_factory=dict)
    pos: Pos = _pos()


@dataclass
class RuleDecl:
    name: str
    reactants: list[Term]
    products: list[Term]
    catalysts: list[Term] = field(default_factory=list)
    kinetics: KineticsDecl | None = None
    pos: Pos = _pos()


@dataclass
class InterventionDecl:
    time: float
    op: str
    args: list[object]
    pos: Pos = _pos()


@dataclass
class RunDecl:
    dt: float = 0.01
    steps: int | None = None
    seed: int = 0
    sample_every: int | None = None
    solver: str = "analytic-pairwise"
    burst_ratio: float = 1.06
    gas_factor: float = 0.025
    quiescence_tol: float = 1e-12
    indicator: tuple[str, float] | None = None
    pos: Pos = _pos()


@dataclass
class ScenarioAst:
    name: str
    mode: str
    species: list[SpeciesDecl] = field(default_factory=list)
    atoms: list[AtomDecl] = field(default_factory=list)
    permeability: list[PermEntry] = field(default_factory=list)
    environment: EnvironmentDecl | None = None
    compartments: list[CompartmentDecl] = field(default_factory=list)
    generator: GeneratorDecl | None = None
    swelling: list[Entry] | None = None
    rules: list[RuleDecl] = field(default_factory=list)
    schedule: list[InterventionDecl] = field(default_factory=list)
    run: RunDecl = field(default_factory=RunDecl)
    pos: Pos = _pos()
