"""Canonical text form of a scenario syntax tree.

Output is deterministic: fixed statement order, one item per line, defaults
omitted, floats written with ``repr`` so they read back bit-for-bit.
"""

from __future__ import annotations

from .ast import CompartmentDecl, DistDecl, Entry, GeneratorDecl, RunDecl, ScenarioAst, Term
from .parser import DEFAULT_SAMPLE_EVERY, DEFAULT_STEPS

INDENT = "    "


def _n(x) -> str:
    if isinstance(x, bool):
        raise TypeError("booleans are not scenario numbers")
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


def _entry(e: Entry) -> str:
    unit = f" {e.unit}" if e.unit else ""
    return f"{e.species}: {_n(e.value)}{unit}"


def _block(head: str, items: list[str], indent: str = "") -> list[str]:
    if not items:
        return [f"{indent}{head} {{}}"]
    inner = indent + INDENT
    return [f"{indent}{head} {{", *(inner + item for item in items), f"{indent}}}"]


def _compartment(c: CompartmentDecl, indent: str) -> list[str]:
    head = f"compartment {c.name} diameter {_n(c.diameter)} um"
    if c.morphology:
        head += f" morphology {c.morphology}"
    if not c.contents and not c.children:
        return [indent + head]
    inner = indent + INDENT
    lines = [f"{indent}{head} {{"]
    if c.contents:
        lines += _block("contents", [_entry(e) for e in c.contents], inner)
    for child in c.children:
        lines += _compartment(child, inner)
    lines.append(f"{indent}}}")
    return lines


def _dist(d: DistDecl, unit: str | None) -> str:
    tail = f" {unit}" if unit else ""
    return f"{d.family} {_n(d.mean)} {_n(d.sd)} {_n(d.low)} {_n(d.high)}{tail}"


def _generator(g: GeneratorDecl) -> list[str]:
    default = GeneratorDecl()
    items = [f"n = {g.n}", f"seed = {g.seed}"]
    if tuple(g.prevalence) != default.prevalence:
        items.append("prevalence = " + " ".join(_n(x) for x in g.prevalence))
    if g.diameter != default.diameter:
        items.append("diameter = " + _dist(g.diameter, "um"))
    if g.t3_diameter != default.t3_diameter:
        items.append("t3_diameter = " + _dist(g.t3_diameter, "um"))
    if g.internal_count != default.internal_count:
        items.append("internal_count = " + _dist(g.internal_count, None))
    for key in ("t3_internal_count", "child_fraction", "t3_child_fraction"):
        value = tuple(getattr(g, key))
        if value != tuple(getattr(default, key)):
            items.append(f"{key} = " + " ".join(_n(x) for x in value))
    return _block("generator", items)


def _terms(terms: list[Term]) -> str:
    out = []
    for t in terms:
        s = t.species if t.stoich == 1 else f"{t.stoich} {t.species}"
        if t.target != "here":
            s += f"@{t.target}"
        out.append(s)
    return " + ".join(out)


def _rule(r) -> str:
    line = f"rule {r.name}: {_terms(r.reactants)} -> {_terms(r.products)}".replace(":  ->", ": ->")
    line = line.rstrip()
    if r.catalysts:
        line += f" catalyst {_terms(r.catalysts)}"
    k = r.kinetics
    if k is None:
        return line
    if k.kind == "priority":
        return line + f" priority {k.params['value']}"
    if k.kind == "mm":
        p = k.params
        return line + f" kinetics mm(kcat={_n(p['kcat'])}, km={_n(p['km'])} mM, enzyme={p['enzyme']})"
    return line + f" kinetics mass_action(k={_n(k.params['k'])})"


def _intervention(iv) -> str:
    head = f"at {_n(iv.time)} s do {iv.op}"
    a = iv.args
    if iv.op == "dc_pulse":
        return f"{head} {a[0]}"
    if iv.op == "electroporate":
        return f"{head} {a[0]} {_n(a[1])} s {_n(a[2])}"
    if iv.op == "inject":
        unit = f" {a[3]}" if a[3] else ""
        return f"{head} {a[0]} {a[1]} {_n(a[2])}{unit}"
    return f"{head} {a[0]} {a[1]} {_n(a[2])} um/s"


def _run(r: RunDecl, mode: str) -> list[str]:
    d = RunDecl()
    items = []
    if r.dt != d.dt:
        items.append(f"dt = {_n(r.dt)} s")
    if r.steps is not None and r.steps != DEFAULT_STEPS[mode]:
        items.append(f"steps = {r.steps}")
    if r.seed != d.seed:
        items.append(f"seed = {r.seed}")
    if r.sample_every is not None and r.sample_every != DEFAULT_SAMPLE_EVERY[mode]:
        items.append(f"sample_every = {r.sample_every}")
    if r.solver != d.solver:
        items.append(f"solver = {r.solver}")
    if r.burst_ratio != d.burst_ratio:
        items.append(f"burst_ratio = {_n(r.burst_ratio)}")
    if r.gas_factor != d.gas_factor:
        items.append(f"gas_factor = {_n(r.gas_factor)} fL/amol")
    if r.quiescence_tol != d.quiescence_tol:
        items.append(f"quiescence_tol = {_n(r.quiescence_tol)}")
    if r.indicator is not None:
        items.append(f"indicator = {r.indicator[0]} {_n(r.indicator[1])} mM")
    return _block("run", items) if items else []


def serialize(ast: ScenarioAst) -> str:
    """Canonical source text; ``parse(serialize(a)) == a`` for any checked tree."""
    out = [f"system {ast.name} mode {ast.mode}", ""]
    for s in ast.species:
        line = f"species {s.name} class {s.perm_class}"
        if s.perm is not None:
            line += f" perm {_n(s.perm)} um/s"
        out.append(line)
    for a in ast.atoms:
        out.append(f"atom {a.tag} {{ " + ", ".join(f"{sp}: {w}" for sp, w in a.weights) + " }")
    if ast.permeability:
        out += _block("permeability", [f"{p.perm_class}: {_n(p.value)} um/s" for p in ast.permeability])
    if ast.environment is not None:
        head = "environment"
        if ast.environment.volume is not None:
            head += f" volume {_n(ast.environment.volume)} fL"
        out += _block(head, [_entry(e) for e in ast.environment.entries])
    for c in ast.compartments:
        out += _compartment(c, "")
    if ast.generator is not None:
        out += _generator(ast.generator)
    if ast.swelling is not None:
        out += _block("swelling", [_entry(e) for e in ast.swelling])
    for r in ast.rules:
        out.append(_rule(r))
    for iv in ast.schedule:
        out.append(_intervention(iv))
    out += _run(ast.run, ast.mode)
    return "\n".join(out).rstrip() + "\n"
