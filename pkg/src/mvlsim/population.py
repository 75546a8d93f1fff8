"""Seeded generation of MVL populations and their summary statistics."""

from __future__ import annotations

import copy
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Mapping

import numpy as np

from .core import (
    Compartment,
    Mode,
    ModeError,
    Morphology,
    Mvl,
    MvlError,
    PermClass,
    Species,
    UnknownIdError,
    mvl_from_dict,
    mvl_to_dict,
)
from .distributions import TruncatedDist

GENERATED_MORPHOLOGIES = (Morphology.T1A, Morphology.T1B, Morphology.T2, Morphology.T3)


class GenerationError(MvlError):
    def __init__(self, message: str, index: int | None = None):
        super().__init__(message if index is None else f"item {index}: {message}")
        self.index = index


@dataclass(frozen=True)
class GeneratorParams:
    type_prevalence: tuple[float, float, float, float] = (0.72, 0.12, 0.08, 0.08)
    outer_diameter: TruncatedDist = TruncatedDist(64.60, 40.19, 17.39, 173.50, "lognormal")
    t3_diameter: TruncatedDist = TruncatedDist(127.81, 70.96, 69.97, 246.18, "lognormal")
    internal_count: TruncatedDist = TruncatedDist(5.10, 3.15, 1, 14, "normal", integer=True)
    # unvalidated: T3 interiors were too crowded to count
    t3_internal_count_range: tuple[int, int] = (15, 50)
    # invented: inner diameters were never measured
    child_diameter_fraction: tuple[float, float] = (0.10, 0.45)
    t3_child_diameter_fraction: tuple[float, float] = (0.05, 0.25)
    packing_headroom: float = 0.9
    max_attempts: int = 100
    seed: int = 0

    def __post_init__(self):
        p = tuple(float(x) for x in self.type_prevalence)
        object.__setattr__(self, "type_prevalence", p)
        if len(p) != 4 or any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError(f"type_prevalence must be 4 nonnegative weights summing to 1, got {p}")
        for name in ("t3_internal_count_range", "child_diameter_fraction", "t3_child_diameter_fraction"):
            lo, hi = getattr(self, name)
            if not lo <= hi:
                raise ValueError(f"{name}: low {lo} > high {hi}")
        lo, hi = self.child_diameter_fraction
        lo3, hi3 = self.t3_child_diameter_fraction
        if not (0 < lo and hi < 1 and 0 < lo3 and hi3 < 1):
            raise ValueError("child diameter fractions must lie in (0, 1)")
        if self.t3_internal_count_range[0] < 1:
            raise ValueError("T3 internal count must be >= 1")
        if self.internal_count.low < 1:
            raise ValueError("internal count lower bound must be >= 1")
        if not 0 < self.packing_headroom <= 1:
            raise ValueError("packing_headroom must be in (0, 1]")
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")

    def to_dict(self) -> dict:
        def dist(d: TruncatedDist):
            return {"mean": d.mean, "sd": d.sd, "low": d.low, "high": d.high, "family": d.family}

        return {
            "type_prevalence": list(self.type_prevalence),
            "outer_diameter": dist(self.outer_diameter),
            "t3_diameter": dist(self.t3_diameter),
            "internal_count": dist(self.internal_count),
            "t3_internal_count_range": list(self.t3_internal_count_range),
            "child_diameter_fraction": list(self.child_diameter_fraction),
            "t3_child_diameter_fraction": list(self.t3_child_diameter_fraction),
            "packing_headroom": self.packing_headroom,
            "max_attempts": self.max_attempts,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> GeneratorParams:
        base = cls()
        kw = {}
        for key in ("outer_diameter", "t3_diameter", "internal_count"):
            if key in d:
                old = getattr(base, key)
                kw[key] = TruncatedDist(**{**old.__dict__, **d[key]})
        for key in ("type_prevalence", "t3_internal_count_range", "child_diameter_fraction", "t3_child_diameter_fraction"):
            if key in d:
                kw[key] = tuple(d[key])
        for key in ("packing_headroom", "max_attempts", "seed"):
            if key in d:
                kw[key] = d[key]
        unknown = set(d) - set(base.to_dict())
        if unknown:
            raise ValueError(f"unknown generator parameters: {sorted(unknown)}")
        return replace(base, **kw)


def derived_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for population item ``index``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(index,)))


def _draw_morphology(params: GeneratorParams, rng) -> Morphology:
    u = rng.random()
    acc = 0.0
    for morph, p in zip(GENERATED_MORPHOLOGIES, params.type_prevalence):
        acc += p
        if u < acc:
            return morph
    # u landed in the rounding gap above the cumulative sum
    return [m for m, p in zip(GENERATED_MORPHOLOGIES, params.type_prevalence) if p > 0][-1]


def _place_children(parent: Compartment, count: int, fraction, params: GeneratorParams, rng, strict: bool) -> None:
    budget = params.packing_headroom * parent.volume
    used = 0.0
    lo, hi = fraction
    for i in range(count):
        for _ in range(params.max_attempts):
            d = rng.uniform(lo, hi) * parent.diameter
            v = math.pi / 6.0 * d**3
            if used + v <= budget:
                break
        else:
            if strict or not parent.children:
                raise GenerationError(
                    f"packing failed in {parent.id}: child {i + 1} of {count} does not fit "
                    f"after {params.max_attempts} attempts (sum of child volumes must stay "
                    f"<= {params.packing_headroom} x parent volume)"
                )
            return
        used += v
        parent.children.append(Compartment(f"{parent.id}.{i + 1}", parent.depth + 1, d, volume=v))


def sample_mvl(params: GeneratorParams, rng: np.random.Generator, mvl_id: str = "m0") -> Mvl:
    morph = _draw_morphology(params, rng)
    if morph is Morphology.T3:
        diameter = params.t3_diameter.sample(rng)
        lo, hi = params.t3_internal_count_range
        count = int(rng.integers(lo, hi + 1))
        fraction = params.t3_child_diameter_fraction
    else:
        diameter = params.outer_diameter.sample(rng)
        count = params.internal_count.sample(rng)
        fraction = params.child_diameter_fraction
    root = Compartment(mvl_id, 1, diameter)
    _place_children(root, count, fraction, params, rng, strict=True)
    if morph is Morphology.T1B:
        host = root.children[int(rng.integers(len(root.children)))]
        inner = params.internal_count.sample(rng)
        _place_children(host, inner, params.child_diameter_fraction, params, rng, strict=False)
    return Mvl(morph, root)


def _sample_range(args) -> list[Mvl]:
    params, seed, start, stop = args
    out = []
    for i in range(start, stop):
        try:
            out.append(sample_mvl(params, derived_rng(seed, i), f"m{i}"))
        except GenerationError as exc:
            raise GenerationError(str(exc), i) from exc
    return out


def sample_population(params: GeneratorParams, n: int, seed: int | None = None, jobs: int = 1) -> list[Mvl]:
    """``n`` MVLs; item ``i`` depends only on ``(params, seed, i)``."""
    if n < 1:
        raise ValueError("population size must be >= 1")
    seed = params.seed if seed is None else seed
    if jobs <= 1 or n < 2 * jobs:
        return _sample_range((params, seed, 0, n))
    chunk = math.ceil(n / jobs)
    tasks = [(params, seed, s, min(s + chunk, n)) for s in range(0, n, chunk)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = list(pool.map(_sample_range, tasks))
    return [m for part in parts for m in part]


def _describe(values: list[float]) -> dict:
    if not values:
        return {"n": 0, "mean": None, "sd": None, "min": None, "max": None}
    return {
        "n": len(values),
        "mean": statistics.fmean(values),
        "sd": statistics.stdev(values) if len(values) > 1 else 0.0,
        "min": min(values),
        "max": max(values),
    }


def population_stats(population: Iterable[Mvl]) -> dict:
    population = list(population)
    if not population:
        raise ValueError("population is empty")
    n = len(population)
    by_morph: dict[str, list[Mvl]] = {}
    for m in population:
        by_morph.setdefault(m.morphology.value, []).append(m)
    non_t3 = [m for m in population if m.morphology is not Morphology.T3]
    t3 = by_morph.get(Morphology.T3.value, [])
    depth_hist: dict[str, int] = {}
    for m in population:
        key = str(m.root.max_depth())
        depth_hist[key] = depth_hist.get(key, 0) + 1
    order = [m.value for m in Morphology]
    return {
        "n": n,
        "morphology": {
            k: {
                "count": len(v),
                "frequency": len(v) / n,
                "diameter": _describe([m.root.diameter for m in v]),
                "internal_count": _describe([m.internal_count for m in v]),
            }
            for k, v in sorted(by_morph.items(), key=lambda kv: order.index(kv[0]))
        },
        "diameter": {
            "non_t3": _describe([m.root.diameter for m in non_t3]),
            "t3": _describe([m.root.diameter for m in t3]),
        },
        "internal_count": {
            "non_t3": _describe([m.internal_count for m in non_t3]),
            "t3": _describe([m.internal_count for m in t3]),
        },
        "depth_histogram": dict(sorted(depth_hist.items())),
    }


def format_stats_table(stats: dict) -> str:
    """Aligned text table of mean, standard deviation and range per group."""

    def fmt(x, digits=2):
        return "-" if x is None else f"{x:.{digits}f}"

    def rng_(d, digits=2):
        if d["n"] == 0:
            return "-"
        return f"{fmt(d['min'], digits)}--{fmt(d['max'], digits)}"

    cols = [
        ("MVL Size, T1a, 1b, 2", stats["diameter"]["non_t3"], 2),
        ("MVL Size, T3", stats["diameter"]["t3"], 2),
        ("No. of Internal Liposomes", stats["internal_count"]["non_t3"], 2),
    ]
    rows = [
        ["", *[c[0] for c in cols]],
        ["Mean", *[fmt(c[1]["mean"], c[2]) for c in cols]],
        ["St. Dev.", *[fmt(c[1]["sd"], c[2]) for c in cols]],
        ["Range", *[rng_(c[1], c[2]) for c in cols]],
        ["n", *[str(c[1]["n"]) for c in cols]],
    ]
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    lines = [" | ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
    lines.insert(1, "-+-".join("-" * w for w in widths))
    lines.append("")
    lines.append("Morphology    count   frequency")
    for name, d in stats["morphology"].items():
        lines.append(f"{name:<12} {d['count']:>6}   {d['frequency']:.4f}")
    lines.append("")
    lines.append("Depth histogram: " + ", ".join(f"{k}: {v}" for k, v in stats["depth_histogram"].items()))
    return "\n".join(lines) + "\n"


def embed_swelling_solution(
    mvl: Mvl,
    assignments: Mapping[str, float],
    species: Mapping[str, Species],
    mode: Mode = Mode.KINETIC,
) -> Mvl:
    """Copy of ``mvl`` with every compartment holding the given mM concentrations.

    Particle-class species only reach the outermost compartment.
    """
    if Mode(mode) is not Mode.KINETIC:
        raise ModeError("swelling-solution embedding needs kinetic mode (concentrations)")
    for name, conc in assignments.items():
        if name not in species:
            raise UnknownIdError(f"unknown species {name!r}")
        if conc < 0:
            raise ValueError(f"negative concentration for {name}")
    out = copy.deepcopy(mvl)
    for name, conc in assignments.items():
        outer_only = species[name].perm_class is PermClass.PARTICLE
        for comp in out.root.walk():
            if outer_only and comp is not out.root:
                continue
            comp.contents[name] = conc * comp.volume
    return out


def population_to_json_obj(population: list[Mvl]) -> list[dict]:
    return [mvl_to_dict(m) for m in population]


def population_from_json_obj(data) -> list[Mvl]:
    if isinstance(data, dict):
        data = data.get("population")
    if not isinstance(data, list):
        raise ValueError("expected a JSON array of MVLs or an object with a 'population' array")
    return [mvl_from_dict(d) for d in data]
