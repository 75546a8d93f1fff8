"""Domain types for membrane systems built from multivesicular liposomes.

Units used throughout kinetic mode: lengths in um, volumes in fL (1 um^3),
amounts in attomol, so that a concentration in mM equals amol/fL.
Abstract mode stores integer object counts in the same containers.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Iterator, Mapping

MAX_DEPTH = 3
ENVIRONMENT_ID = "env"
DEFAULT_ENVIRONMENT_VOLUME = 1.0e6  # fL


class MvlError(Exception):
    """Base class for simulator errors."""


class InvariantError(MvlError, ValueError):
    def __init__(self, message: str, compartment_id: str | None = None):
        super().__init__(message)
        self.compartment_id = compartment_id


class ModeError(MvlError):
    pass


class UnknownIdError(MvlError, LookupError):
    pass


class LysedError(MvlError):
    pass


class Mode(str, Enum):
    ABSTRACT = "abstract"
    KINETIC = "kinetic"


class PermClass(str, Enum):
    GAS = "gas"
    SMALL_POLAR = "small_polar"
    LIPOPHILIC = "lipophilic"
    IONIC = "ionic"
    MACROMOLECULE = "macromolecule"
    PARTICLE = "particle"


class Morphology(str, Enum):
    T1A = "T1a"
    T1B = "T1b"
    T2 = "T2"
    T3 = "T3"
    PLAIN = "plain"  # single liposome, e.g. an inner vesicle freed by lysis


class Target(str, Enum):
    HERE = "here"
    OUT = "out"
    IN = "in"


@lru_cache(maxsize=1)
def _permeability_defaults() -> dict[str, float]:
    text = resources.files("mvlsim").joinpath("data/permeability.json").read_text()
    raw = json.loads(text)
    return {k: float(v) for k, v in raw.items() if not k.startswith("_")}


def default_permeability_table() -> dict[PermClass, float]:
    """Fresh copy of the packaged class -> permeability (um/s) table."""
    raw = _permeability_defaults()
    return {cls: raw[cls.value] for cls in PermClass}


def default_permeability(perm_class: PermClass | str) -> float:
    return _permeability_defaults()[PermClass(perm_class).value]


def sphere_volume(diameter: float) -> float:
    if not diameter > 0:
        raise ValueError(f"diameter must be positive, got {diameter!r}")
    return math.pi / 6.0 * diameter**3


def sphere_diameter(volume: float) -> float:
    if not volume > 0:
        raise ValueError(f"volume must be positive, got {volume!r}")
    return (6.0 * volume / math.pi) ** (1.0 / 3.0)


@dataclass(frozen=True)
class Species:
    name: str
    perm_class: PermClass
    permeability_override: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "perm_class", PermClass(self.perm_class))
        if self.permeability_override is not None and self.permeability_override < 0:
            raise ValueError(f"species {self.name}: permeability must be >= 0")


class Mixture(dict):
    """Species -> quantity map where absent keys read as zero."""

    def __missing__(self, key):
        return 0

    def add(self, species: str, amount) -> None:
        self[species] = self.get(species, 0) + amount

    def covers(self, need: Mapping[str, int | float], times: int = 1) -> bool:
        return all(self.get(s, 0) >= n * times for s, n in need.items())

    def total(self):
        return sum(self.values())

    def nonzero(self) -> dict:
        return {s: q for s, q in self.items() if q}


@dataclass
class Compartment:
    id: str
    depth: int
    diameter: float
    volume: float | None = None
    gas_accumulated: float = 0.0
    membrane_intact: bool = True
    contents: Mixture = field(default_factory=Mixture)
    children: list[Compartment] = field(default_factory=list)
    # membrane state set by interventions
    channels: dict[str, float] = field(default_factory=dict)
    perm_boost: float = 1.0
    boost_until: float | None = None

    def __post_init__(self):
        if self.volume is None:
            self.volume = sphere_volume(self.diameter)
        if not isinstance(self.contents, Mixture):
            self.contents = Mixture(self.contents)

    @property
    def area(self) -> float:
        return math.pi * self.diameter**2

    def effective_volume(self, gas_factor: float) -> float:
        return self.volume + gas_factor * self.gas_accumulated

    def walk(self) -> Iterator[Compartment]:
        yield self
        for child in self.children:
            yield from child.walk()

    def max_depth(self) -> int:
        return max(c.depth for c in self.walk())

    def shift_depth(self, delta: int) -> None:
        for c in self.walk():
            c.depth += delta

    def validate(self) -> None:
        if self.gas_accumulated < 0:
            raise InvariantError(f"{self.id}: negative gas_accumulated", self.id)
        for s, q in self.contents.items():
            if q < 0:
                raise InvariantError(f"{self.id}: negative amount of {s}", self.id)
        if self.depth > MAX_DEPTH:
            raise InvariantError(
                f"{self.id}: depth {self.depth} exceeds the recursion bound of {MAX_DEPTH}",
                self.id,
            )
        inner = 0.0
        for child in self.children:
            if child.depth != self.depth + 1:
                raise InvariantError(
                    f"{child.id}: depth {child.depth} under parent depth {self.depth}", child.id
                )
            inner += child.volume
        if inner > self.volume * (1 + 1e-12):
            raise InvariantError(
                f"{self.id}: children volumes {inner:.6g} fL exceed parent volume "
                f"{self.volume:.6g} fL",
                self.id,
            )
        for child in self.children:
            child.validate()


def morphology_for_depth(depth: int) -> Morphology:
    return {1: Morphology.PLAIN, 2: Morphology.T1A, 3: Morphology.T1B}[depth]


@dataclass
class Mvl:
    morphology: Morphology
    root: Compartment
    environment_id: str = ENVIRONMENT_ID

    def __post_init__(self):
        self.morphology = Morphology(self.morphology)

    @property
    def id(self) -> str:
        return self.root.id

    @property
    def internal_count(self) -> int:
        return len(self.root.children)

    def refresh_morphology(self) -> None:
        """Relabel after structural change; stalked/amorphous labels survive at depth 2."""
        depth = self.root.max_depth()
        if self.morphology in (Morphology.T2, Morphology.T3) and depth == 2:
            return
        self.morphology = morphology_for_depth(depth)

    def validate(self) -> None:
        if self.root.depth != 1:
            raise InvariantError(f"{self.id}: MVL root must have depth 1", self.id)
        self.root.validate()
        depth = self.root.max_depth()
        expected = {
            Morphology.PLAIN: 1,
            Morphology.T1A: 2,
            Morphology.T1B: 3,
            Morphology.T2: 2,
            Morphology.T3: 2,
        }[self.morphology]
        if depth != expected:
            raise InvariantError(
                f"{self.id}: morphology {self.morphology.value} requires depth {expected}, "
                f"tree has depth {depth}",
                self.id,
            )


@dataclass(frozen=True)
class Product:
    species: str
    stoich: int = 1
    target: Target = Target.HERE

    def __post_init__(self):
        object.__setattr__(self, "target", Target(self.target))
        if not (isinstance(self.stoich, int) and self.stoich > 0):
            raise ValueError(f"product {self.species}: stoichiometry must be a positive integer")


@dataclass(frozen=True)
class Abstract:
    priority: int = 0


@dataclass(frozen=True)
class MassAction:
    k: float


@dataclass(frozen=True)
class MichaelisMenten:
    kcat: float  # 1/s
    km: float  # mM
    enzyme: str


Kinetics = Abstract | MassAction | MichaelisMenten


@dataclass(frozen=True)
class Rule:
    name: str
    reactants: Mapping[str, int]
    products: tuple[Product, ...] = ()
    catalysts: Mapping[str, int] = field(default_factory=dict)
    kinetics: Kinetics = Abstract()

    def __post_init__(self):
        object.__setattr__(self, "reactants", dict(self.reactants))
        object.__setattr__(self, "catalysts", dict(self.catalysts))
        object.__setattr__(self, "products", tuple(self.products))
        for s, n in (*self.reactants.items(), *self.catalysts.items()):
            if not (isinstance(n, int) and n > 0):
                raise ValueError(f"rule {self.name}: stoichiometry of {s} must be a positive integer")
        if isinstance(self.kinetics, MichaelisMenten) and len(self.reactants) != 1:
            raise ValueError(f"rule {self.name}: Michaelis-Menten needs exactly one substrate")

    @property
    def needs(self) -> dict[str, int]:
        """Reactants plus catalysts as one multiset."""
        need = dict(self.reactants)
        for s, n in self.catalysts.items():
            need[s] = need.get(s, 0) + n
        return need

    @property
    def has_in_target(self) -> bool:
        return any(p.target is Target.IN for p in self.products)

    def species(self) -> set[str]:
        names = set(self.reactants) | set(self.catalysts) | {p.species for p in self.products}
        if isinstance(self.kinetics, MichaelisMenten):
            names.add(self.kinetics.enzyme)
        return names


@dataclass
class Event:
    time: float
    kind: str  # burst, dc_lysis, electroporation_open/close, halt, injection
    compartment_id: str
    payload: dict = field(default_factory=dict)
    detail: str = ""

    def sort_key(self):
        return (self.time, self.compartment_id)

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "kind": self.kind,
            "compartment_id": self.compartment_id,
            "payload": dict(self.payload),
            "detail": self.detail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> Event:
        return cls(d["time"], d["kind"], d["compartment_id"], dict(d.get("payload", {})), d.get("detail", ""))


def make_environment(volume: float = DEFAULT_ENVIRONMENT_VOLUME, contents=None) -> Compartment:
    return Compartment(
        ENVIRONMENT_ID, 0, sphere_diameter(volume), volume=volume, contents=Mixture(contents or {})
    )


@dataclass
class SystemState:
    species: dict[str, Species]
    environment: Compartment
    mvls: list[Mvl]
    rules: list[Rule]
    mode: Mode = Mode.KINETIC
    clock: float = 0.0
    rng_seed: int = 0
    permeability: dict[PermClass, float] = field(default_factory=default_permeability_table)
    events: list[Event] = field(default_factory=list)
    retired: set[str] = field(default_factory=set)  # ids of burst or lysed compartments
    halted: bool = False
    clamp_count: int = 0

    def __post_init__(self):
        self.mode = Mode(self.mode)

    def children_of(self, comp: Compartment) -> list[Compartment]:
        if comp is self.environment:
            return [m.root for m in self.mvls]
        return comp.children

    def walk(self, include_environment: bool = True) -> Iterator[tuple[Compartment, Compartment | None]]:
        """(compartment, parent) pairs, preorder; roots have the environment as parent."""
        if include_environment:
            yield self.environment, None
        stack: list[tuple[Compartment, Compartment]] = []
        for mvl in reversed(self.mvls):
            stack.append((mvl.root, self.environment))
        while stack:
            comp, parent = stack.pop()
            yield comp, parent
            for child in reversed(comp.children):
                stack.append((child, comp))

    def find(self, compartment_id: str) -> tuple[Compartment, Compartment | None]:
        for comp, parent in self.walk():
            if comp.id == compartment_id:
                return comp, parent
        if compartment_id in self.retired:
            raise LysedError(f"compartment {compartment_id} has been lysed")
        raise UnknownIdError(f"unknown compartment {compartment_id!r}")

    def mvl_of(self, comp: Compartment) -> Mvl | None:
        for mvl in self.mvls:
            for c in mvl.root.walk():
                if c is comp:
                    return mvl
        return None

    def max_depth(self) -> int:
        return max((m.root.max_depth() for m in self.mvls), default=0)

    def totals(self) -> dict[str, float]:
        out = {s: 0 for s in self.species}
        for comp, _ in self.walk():
            for s, q in comp.contents.items():
                out[s] = out.get(s, 0) + q
        return out

    def permeability_of(self, comp: Compartment, species: str) -> float:
        sp = self.species[species]
        if sp.permeability_override is not None:
            p = sp.permeability_override
        else:
            p = self.permeability[sp.perm_class]
        p += comp.channels.get(species, 0.0)
        if sp.perm_class is not PermClass.PARTICLE:
            p *= comp.perm_boost
        return p

    def validate(self) -> None:
        for s in self.species:
            if not s:
                raise InvariantError("empty species name")
        for rule in self.rules:
            missing = rule.species() - set(self.species)
            if missing:
                raise InvariantError(f"rule {rule.name} references unknown species {sorted(missing)}")
        seen: set[str] = set()
        for comp, _ in self.walk():
            if comp.id in seen:
                raise InvariantError(f"duplicate compartment id {comp.id}", comp.id)
            seen.add(comp.id)
            for s, q in comp.contents.items():
                if s not in self.species:
                    raise InvariantError(f"{comp.id}: unknown species {s}", comp.id)
                if q < 0:
                    raise InvariantError(f"{comp.id}: negative amount of {s}", comp.id)
                if self.mode is Mode.ABSTRACT and q != int(q):
                    raise InvariantError(f"{comp.id}: fractional count of {s} in abstract mode", comp.id)
        for mvl in self.mvls:
            mvl.validate()


# JSON round-tripping -------------------------------------------------------


def compartment_to_dict(c: Compartment) -> dict:
    return {
        "id": c.id,
        "depth": c.depth,
        "diameter": c.diameter,
        "volume": c.volume,
        "gas_accumulated": c.gas_accumulated,
        "membrane_intact": c.membrane_intact,
        "contents": dict(sorted(c.contents.items())),
        "channels": dict(sorted(c.channels.items())),
        "perm_boost": c.perm_boost,
        "boost_until": c.boost_until,
        "children": [compartment_to_dict(ch) for ch in c.children],
    }


def compartment_from_dict(d: dict) -> Compartment:
    return Compartment(
        id=d["id"],
        depth=d["depth"],
        diameter=d["diameter"],
        volume=d.get("volume"),
        gas_accumulated=d.get("gas_accumulated", 0.0),
        membrane_intact=d.get("membrane_intact", True),
        contents=Mixture(d.get("contents", {})),
        children=[compartment_from_dict(ch) for ch in d.get("children", [])],
        channels=dict(d.get("channels", {})),
        perm_boost=d.get("perm_boost", 1.0),
        boost_until=d.get("boost_until"),
    )


def mvl_to_dict(m: Mvl) -> dict:
    return {
        "id": m.id,
        "morphology": m.morphology.value,
        "environment_id": m.environment_id,
        "root": compartment_to_dict(m.root),
    }


def mvl_from_dict(d: dict) -> Mvl:
    return Mvl(Morphology(d["morphology"]), compartment_from_dict(d["root"]), d.get("environment_id", ENVIRONMENT_ID))


def _kinetics_to_dict(k: Kinetics) -> dict:
    if isinstance(k, Abstract):
        return {"type": "abstract", "priority": k.priority}
    if isinstance(k, MassAction):
        return {"type": "mass_action", "k": k.k}
    return {"type": "michaelis_menten", "kcat": k.kcat, "km": k.km, "enzyme": k.enzyme}


def _kinetics_from_dict(d: dict) -> Kinetics:
    kind = d["type"]
    if kind == "abstract":
        return Abstract(d.get("priority", 0))
    if kind == "mass_action":
        return MassAction(d["k"])
    if kind == "michaelis_menten":
        return MichaelisMenten(d["kcat"], d["km"], d["enzyme"])
    raise ValueError(f"unknown kinetics type {kind!r}")


def rule_to_dict(r: Rule) -> dict:
    return {
        "name": r.name,
        "reactants": dict(r.reactants),
        "catalysts": dict(r.catalysts),
        "products": [
            {"species": p.species, "stoichiometry": p.stoich, "target": p.target.value} for p in r.products
        ],
        "kinetics": _kinetics_to_dict(r.kinetics),
    }


def rule_from_dict(d: dict) -> Rule:
    return Rule(
        d["name"],
        d["reactants"],
        tuple(Product(p["species"], p["stoichiometry"], Target(p["target"])) for p in d.get("products", [])),
        d.get("catalysts", {}),
        _kinetics_from_dict(d["kinetics"]),
    )


def state_to_dict(state: SystemState) -> dict:
    return {
        "mode": state.mode.value,
        "clock": state.clock,
        "rng_seed": state.rng_seed,
        "species": [
            {"name": s.name, "perm_class": s.perm_class.value, "permeability_override": s.permeability_override}
            for s in state.species.values()
        ],
        "permeability": {cls.value: p for cls, p in state.permeability.items()},
        "environment": compartment_to_dict(state.environment),
        "mvls": [mvl_to_dict(m) for m in state.mvls],
        "rules": [rule_to_dict(r) for r in state.rules],
        "events": [e.to_dict() for e in state.events],
        "retired": sorted(state.retired),
        "halted": state.halted,
    }


def state_from_dict(d: dict) -> SystemState:
    species = {
        s["name"]: Species(s["name"], PermClass(s["perm_class"]), s.get("permeability_override"))
        for s in d["species"]
    }
    permeability = default_permeability_table()
    permeability.update({PermClass(k): float(v) for k, v in d.get("permeability", {}).items()})
    return SystemState(
        species=species,
        environment=compartment_from_dict(d["environment"]),
        mvls=[mvl_from_dict(m) for m in d.get("mvls", [])],
        rules=[rule_from_dict(r) for r in d.get("rules", [])],
        mode=Mode(d["mode"]),
        clock=d.get("clock", 0.0),
        rng_seed=d.get("rng_seed", 0),
        permeability=permeability,
        events=[Event.from_dict(e) for e in d.get("events", [])],
        retired=set(d.get("retired", [])),
        halted=d.get("halted", False),
    )
