"""Recursive-descent parser and resolver for `.psys` scenario files."""

from __future__ import annotations

import math

from ..core import MAX_DEPTH, ENVIRONMENT_ID, Morphology, PermClass
from ..engine.kinetic import SOLVERS
from .ast import (
    AtomDecl,
    CompartmentDecl,
    DistDecl,
    Entry,
    EnvironmentDecl,
    GeneratorDecl,
    InterventionDecl,
    KineticsDecl,
    PermEntry,
    RuleDecl,
    RunDecl,
    ScenarioAst,
    SpeciesDecl,
    Term,
)
from .lexer import Diagnostic, ScenarioError, Token, tokenize

STATEMENTS = (
    "system",
    "species",
    "atom",
    "permeability",
    "environment",
    "compartment",
    "generator",
    "swelling",
    "rule",
    "at",
    "run",
)
RULE_CLAUSES = ("catalyst", "kinetics", "priority")
RESERVED = frozenset(STATEMENTS + RULE_CLAUSES + ("contents", "env"))
TARGETS = ("here", "out", "in")
MORPHOLOGIES = tuple(m.value for m in Morphology)
PERM_CLASSES = tuple(c.value for c in PermClass)
FAMILIES = ("normal", "lognormal")
MAX_NESTING = 16

DEFAULT_STEPS = {"abstract": 100, "kinetic": 100_000}
DEFAULT_SAMPLE_EVERY = {"abstract": 1, "kinetic": 100}


class _Abort(Exception):
    pass


def _is_int_literal(text: str) -> bool:
    t = text.lstrip("+-")
    return t.isdigit()


def _number(text: str):
    return int(text) if _is_int_literal(text) else float(text)


class _Parser:
    def __init__(self, text: str):
        self.lines = text.split("\n")
        self.diags: list[Diagnostic] = []
        self.toks = tokenize(text, self.diags, self.lines)
        self.i = 0

    # token helpers ---------------------------------------------------------

    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def advance(self) -> Token:
        tok = self.peek()
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def excerpt(self, line: int) -> str:
        if 1 <= line <= len(self.lines):
            return self.lines[line - 1][:200]
        return ""

    def diag(self, pos, message: str, severity: str = "error") -> None:
        line, col = pos
        self.diags.append(Diagnostic(severity, line, col, message, self.excerpt(line)))

    def fail(self, tok: Token, message: str):
        self.diag((tok.line, tok.col), message)
        raise _Abort

    def describe(self, tok: Token) -> str:
        if tok.kind == "EOF":
            return "end of input"
        if tok.kind == "NEWLINE":
            return "end of line"
        return f"`{tok.text}`"

    def is_sym(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == "SYM" and tok.text == text

    def is_word(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok.kind == "NAME" and tok.text == text

    def sym(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "SYM" or tok.text != text:
            self.fail(tok, f"expected `{text}`, found {self.describe(tok)}")
        return self.advance()

    def word(self, text: str) -> Token:
        tok = self.peek()
        if tok.kind != "NAME" or tok.text != text:
            self.fail(tok, f"expected `{text}`, found {self.describe(tok)}")
        return self.advance()

    def name(self, what: str) -> Token:
        tok = self.peek()
        if tok.kind != "NAME":
            self.fail(tok, f"expected {what}, found {self.describe(tok)}")
        return self.advance()

    def number(self, what: str) -> tuple[int | float, Token]:
        tok = self.peek()
        if tok.kind != "NUMBER":
            self.fail(tok, f"expected {what}, found {self.describe(tok)}")
        self.advance()
        value = _number(tok.text)
        if not math.isfinite(value):
            self.fail(tok, f"number `{tok.text}` is out of range")
        return value, tok

    def integer(self, what: str) -> tuple[int, Token]:
        tok = self.peek()
        if tok.kind != "NUMBER" or not _is_int_literal(tok.text):
            self.fail(tok, f"expected {what} (an integer), found {self.describe(tok)}")
        self.advance()
        return int(tok.text), tok

    def unit(self, *allowed: str) -> str:
        """Mandatory unit token such as `um`, `mM`, `um/s`."""
        tok = self.peek()
        if tok.kind != "NAME":
            self.fail(tok, f"missing unit (expected {' or '.join(allowed)}), found {self.describe(tok)}")
        self.advance()
        text = tok.text
        if self.is_sym("/"):
            self.advance()
            text += "/" + self.name("unit").text
        if text not in allowed:
            self.fail(tok, f"wrong unit `{text}` (expected {' or '.join(allowed)})")
        return text

    def optional_unit(self) -> str | None:
        tok = self.peek()
        if tok.kind != "NAME" or tok.text in RESERVED:
            return None
        self.advance()
        text = tok.text
        if self.is_sym("/"):
            self.advance()
            text += "/" + self.name("unit").text
        return text

    def skip_newlines(self) -> None:
        while self.peek().kind == "NEWLINE" or self.is_sym(";"):
            self.advance()

    def end_statement(self) -> None:
        tok = self.peek()
        if tok.kind == "EOF":
            return
        if tok.kind == "NEWLINE" or self.is_sym(";"):
            self.advance()
            return
        self.fail(tok, f"unexpected {self.describe(tok)} after statement")

    def separator(self) -> None:
        """Between block items: `,` or newline(s), or the closing brace."""
        if self.is_sym(","):
            self.advance()
            self.skip_newlines()
            return
        if self.peek().kind == "NEWLINE" or self.is_sym(";"):
            self.skip_newlines()
            if self.is_sym(","):
                self.advance()
                self.skip_newlines()
            return
        if not self.is_sym("}"):
            tok = self.peek()
            self.fail(tok, f"expected `,`, newline or `}}`, found {self.describe(tok)}")

    # grammar -----------------------------------------------------------------

    def parse(self) -> ScenarioAst:
        self.skip_newlines()
        tok = self.peek()
        if not self.is_word("system"):
            self.fail(tok, "a scenario must start with `system NAME mode abstract|kinetic`")
        ast = self.system()
        self.end_statement()
        seen_run = False
        while True:
            self.skip_newlines()
            tok = self.peek()
            if tok.kind == "EOF":
                break
            if tok.kind != "NAME" or tok.text not in STATEMENTS:
                self.fail(tok, f"expected a statement ({', '.join(STATEMENTS[1:])}), found {self.describe(tok)}")
            kw = tok.text
            if kw == "system":
                self.fail(tok, "duplicate `system` header")
            elif kw == "species":
                ast.species.append(self.species())
            elif kw == "atom":
                ast.atoms.append(self.atom())
            elif kw == "permeability":
                ast.permeability.extend(self.permeability())
            elif kw == "environment":
                if ast.environment is not None:
                    self.fail(tok, "duplicate `environment` block")
                ast.environment = self.environment()
            elif kw == "compartment":
                ast.compartments.append(self.compartment(1))
            elif kw == "generator":
                if ast.generator is not None:
                    self.fail(tok, "duplicate `generator` block")
                ast.generator = self.generator()
            elif kw == "swelling":
                if ast.swelling is not None:
                    self.fail(tok, "duplicate `swelling` block")
                self.advance()
                ast.swelling = self.entries()
            elif kw == "rule":
                ast.rules.append(self.rule())
            elif kw == "at":
                ast.schedule.append(self.intervention())
            elif kw == "run":
                if seen_run:
                    self.fail(tok, "duplicate `run` block")
                seen_run = True
                ast.run = self.run_block()
            self.end_statement()
        return ast

    def system(self) -> ScenarioAst:
        kw = self.word("system")
        name = self.name("scenario name").text
        self.word("mode")
        tok = self.name("`abstract` or `kinetic`")
        if tok.text not in ("abstract", "kinetic"):
            self.fail(tok, f"unknown mode `{tok.text}` (expected abstract or kinetic)")
        return ScenarioAst(name, tok.text, pos=(kw.line, kw.col))

    def species(self) -> SpeciesDecl:
        kw = self.advance()
        name = self.name("species name")
        self.word("class")
        cls = self.name("permeability class")
        perm = None
        if self.is_word("perm"):
            self.advance()
            perm, _ = self.number("permeability value")
            self.unit("um/s")
        return SpeciesDecl(name.text, cls.text, perm, pos=(name.line, name.col))

    def atom(self) -> AtomDecl:
        self.advance()
        tag = self.name("atom tag")
        self.sym("{")
        self.skip_newlines()
        weights = []
        while not self.is_sym("}"):
            sp = self.name("species name")
            self.sym(":")
            w, _ = self.integer("atom count")
            weights.append((sp.text, w))
            self.separator()
        self.sym("}")
        return AtomDecl(tag.text, weights, pos=(tag.line, tag.col))

    def permeability(self) -> list[PermEntry]:
        self.advance()
        self.sym("{")
        self.skip_newlines()
        out = []
        while not self.is_sym("}"):
            cls = self.name("permeability class")
            self.sym(":")
            value, _ = self.number("permeability value")
            self.unit("um/s")
            out.append(PermEntry(cls.text, value, pos=(cls.line, cls.col)))
            self.separator()
        self.sym("}")
        return out

    def entries(self) -> list[Entry]:
        self.sym("{")
        self.skip_newlines()
        out = []
        while not self.is_sym("}"):
            sp = self.name("species name")
            self.sym(":")
            value, _ = self.number("amount")
            unit = self.optional_unit()
            out.append(Entry(sp.text, value, unit, pos=(sp.line, sp.col)))
            self.separator()
        self.sym("}")
        return out

    def environment(self) -> EnvironmentDecl:
        kw = self.advance()
        volume = None
        if self.is_word("volume"):
            self.advance()
            volume, _ = self.number("environment volume")
            self.unit("fL")
        entries = self.entries() if self.is_sym("{") else []
        return EnvironmentDecl(volume, entries, pos=(kw.line, kw.col))

    def compartment(self, depth: int) -> CompartmentDecl:
        kw = self.advance()
        if depth > MAX_NESTING:
            self.fail(kw, f"compartment nesting depth {depth} far exceeds the recursion bound of {MAX_DEPTH}")
        if depth == MAX_DEPTH + 1:
            self.diag(
                (kw.line, kw.col),
                f"compartment nesting depth {depth} exceeds the maximum recursion depth of {MAX_DEPTH}",
            )
        name = self.name("compartment name")
        self.word("diameter")
        diameter, _ = self.number("diameter")
        self.unit("um")
        decl = CompartmentDecl(name.text, diameter, pos=(name.line, name.col))
        if self.is_word("morphology"):
            self.advance()
            decl.morphology = self.name("morphology").text
        if self.is_sym("{"):
            self.advance()
            self.skip_newlines()
            while not self.is_sym("}"):
                tok = self.peek()
                if self.is_word("contents"):
                    self.advance()
                    decl.contents.extend(self.entries())
                elif self.is_word("compartment"):
                    decl.children.append(self.compartment(depth + 1))
                else:
                    self.fail(tok, f"expected `contents` or `compartment`, found {self.describe(tok)}")
                if not self.is_sym("}"):
                    if self.peek().kind != "NEWLINE" and not self.is_sym(";"):
                        t = self.peek()
                        self.fail(t, f"unexpected {self.describe(t)} in compartment body")
                self.skip_newlines()
            self.sym("}")
        return decl

    def _values(self) -> list[Token]:
        vals = []
        while self.peek().kind in ("NUMBER", "NAME"):
            vals.append(self.advance())
        return vals

    def generator(self) -> GeneratorDecl:
        kw = self.advance()
        decl = GeneratorDecl(pos=(kw.line, kw.col))
        self.sym("{")
        self.skip_newlines()
        seen = set()
        while not self.is_sym("}"):
            key = self.name("generator field")
            if key.text in seen:
                self.fail(key, f"duplicate generator field `{key.text}`")
            seen.add(key.text)
            self.sym("=")
            vals = self._values()
            self._generator_field(decl, key, vals)
            self.separator()
        self.sym("}")
        return decl

    def _nums(self, key: Token, vals: list[Token], count: int, integer: bool = False) -> list:
        if len(vals) != count or any(v.kind != "NUMBER" for v in vals):
            self.fail(key, f"`{key.text}` takes {count} number{'s' if count > 1 else ''}")
        if integer and not all(_is_int_literal(v.text) for v in vals):
            self.fail(key, f"`{key.text}` takes integers")
        out = [_number(v.text) for v in vals]
        if not all(math.isfinite(x) for x in out):
            self.fail(key, f"`{key.text}`: number out of range")
        return out

    def _dist(self, key: Token, vals: list[Token], unit: str | None) -> DistDecl:
        family = "normal"
        if vals and vals[0].kind == "NAME":
            family = vals[0].text
            if family not in FAMILIES:
                self.fail(vals[0], f"unknown distribution family `{family}` (expected normal or lognormal)")
            vals = vals[1:]
        if unit is not None:
            if not vals or vals[-1].text != unit:
                self.fail(key, f"`{key.text}` needs the unit `{unit}` after its four numbers")
            vals = vals[:-1]
        mean, sd, low, high = self._nums(key, vals, 4)
        return DistDecl(family, mean, sd, low, high)

    def _generator_field(self, decl: GeneratorDecl, key: Token, vals: list[Token]) -> None:
        k = key.text
        if k == "n":
            (decl.n,) = self._nums(key, vals, 1, integer=True)
        elif k == "seed":
            (decl.seed,) = self._nums(key, vals, 1, integer=True)
        elif k == "prevalence":
            decl.prevalence = tuple(self._nums(key, vals, 4))
        elif k == "diameter":
            decl.diameter = self._dist(key, vals, "um")
        elif k == "t3_diameter":
            decl.t3_diameter = self._dist(key, vals, "um")
        elif k == "internal_count":
            decl.internal_count = self._dist(key, vals, None)
        elif k == "t3_internal_count":
            decl.t3_internal_count = tuple(self._nums(key, vals, 2, integer=True))
        elif k == "child_fraction":
            decl.child_fraction = tuple(self._nums(key, vals, 2))
        elif k == "t3_child_fraction":
            decl.t3_child_fraction = tuple(self._nums(key, vals, 2))
        else:
            self.fail(key, f"unknown generator field `{k}`")

    def terms(self, allow_target: bool) -> list[Term]:
        out = []
        while True:
            tok = self.peek()
            stoich, explicit = 1, False
            if tok.kind == "NUMBER":
                stoich, _ = self.integer("stoichiometry")
                explicit = True
                tok = self.peek()
            if tok.kind != "NAME" or tok.text in RULE_CLAUSES:
                if explicit or (out and self.is_sym("+", -1)):
                    self.fail(tok, f"expected species name, found {self.describe(tok)}")
                return out
            self.advance()
            term = Term(tok.text, stoich, pos=(tok.line, tok.col))
            if self.is_sym("@"):
                at = self.advance()
                if not allow_target:
                    self.fail(at, "only products can carry a target")
                term.target = self.name("target (here, out or in)").text
            out.append(term)
            if self.is_sym("+"):
                self.advance()

    def rule(self) -> RuleDecl:
        self.advance()
        name = self.name("rule name")
        self.sym(":")
        reactants = self.terms(False)
        self.sym("->")
        products = self.terms(True)
        decl = RuleDecl(name.text, reactants, products, pos=(name.line, name.col))
        if self.is_word("catalyst"):
            self.advance()
            decl.catalysts = self.terms(False)
            if not decl.catalysts:
                self.fail(self.peek(), "`catalyst` needs at least one species")
        if self.is_word("kinetics"):
            self.advance()
            decl.kinetics = self.kinetics()
        elif self.is_word("priority"):
            kw = self.advance()
            value, _ = self.integer("priority")
            decl.kinetics = KineticsDecl("priority", {"value": value}, pos=(kw.line, kw.col))
        return decl

    def kinetics(self) -> KineticsDecl:
        kind = self.name("`mm` or `mass_action`")
        if kind.text not in ("mm", "mass_action"):
            self.fail(kind, f"unknown kinetics `{kind.text}` (expected mm or mass_action)")
        self.sym("(")
        params: dict[str, object] = {}
        expected = ("kcat", "km", "enzyme") if kind.text == "mm" else ("k",)
        while not self.is_sym(")"):
            key = self.name("parameter name")
            if key.text not in expected:
                self.fail(key, f"unknown {kind.text} parameter `{key.text}` (expected {', '.join(expected)})")
            if key.text in params:
                self.fail(key, f"duplicate parameter `{key.text}`")
            self.sym("=")
            if key.text == "enzyme":
                params["enzyme"] = self.name("enzyme species").text
            else:
                params[key.text], _ = self.number(f"value for {key.text}")
                if key.text == "km":
                    self.unit("mM")
            if not self.is_sym(")"):
                self.sym(",")
        close = self.sym(")")
        missing = [k for k in expected if k not in params]
        if missing:
            self.fail(close, f"{kind.text} kinetics missing {', '.join(missing)}")
        return KineticsDecl(kind.text, params, pos=(kind.line, kind.col))

    def intervention(self) -> InterventionDecl:
        kw = self.advance()
        time, _ = self.number("time")
        self.unit("s")
        self.word("do")
        op = self.name("intervention")
        args: list[object] = []
        if op.text == "dc_pulse":
            args = [self.name("MVL name").text]
        elif op.text == "electroporate":
            args.append(self.name("MVL name").text)
            duration, _ = self.number("duration")
            self.unit("s")
            boost, _ = self.number("boost factor")
            args += [duration, boost]
        elif op.text == "inject":
            args.append(self.name("compartment name").text)
            args.append(self.name("species name").text)
            amount, _ = self.number("amount")
            args.append(amount)
            unit = self.optional_unit()
            args.append(unit)
        elif op.text == "insert_channel":
            args.append(self.name("compartment name").text)
            args.append(self.name("species name").text)
            p, _ = self.number("permeability")
            self.unit("um/s")
            args.append(p)
        else:
            self.fail(op, f"unknown intervention `{op.text}` (expected dc_pulse, electroporate, inject, insert_channel)")
        return InterventionDecl(time, op.text, args, pos=(kw.line, kw.col))

    def run_block(self) -> RunDecl:
        kw = self.advance()
        decl = RunDecl(pos=(kw.line, kw.col))
        self.sym("{")
        self.skip_newlines()
        seen = set()
        while not self.is_sym("}"):
            key = self.name("run setting")
            if key.text in seen:
                self.fail(key, f"duplicate run setting `{key.text}`")
            seen.add(key.text)
            self.sym("=")
            k = key.text
            if k == "dt":
                decl.dt, _ = self.number("dt")
                self.unit("s")
            elif k in ("steps", "seed", "sample_every"):
                value, _ = self.integer(k)
                setattr(decl, k, value)
            elif k == "solver":
                decl.solver = self.name("solver").text
            elif k == "burst_ratio":
                decl.burst_ratio, _ = self.number("burst ratio")
            elif k == "gas_factor":
                decl.gas_factor, _ = self.number("gas factor")
                self.unit("fL/amol")
            elif k == "quiescence_tol":
                decl.quiescence_tol, _ = self.number("tolerance")
            elif k == "indicator":
                sp = self.name("indicator species").text
                threshold, _ = self.number("indicator threshold")
                self.unit("mM")
                decl.indicator = (sp, threshold)
            else:
                self.fail(key, f"unknown run setting `{k}`")
            self.separator()
        self.sym("}")
        return decl


class _Checker:
    """Name resolution and semantic validation; collects every problem."""

    def __init__(self, parser: _Parser, ast: ScenarioAst):
        self.p = parser
        self.ast = ast
        self.kinetic = ast.mode == "kinetic"

    def err(self, pos, message):
        self.p.diag(pos, message)

    def check(self) -> None:
        ast = self.ast
        self.declared: set[str] = set()
        for sp in ast.species:
            if sp.name in RESERVED:
                self.err(sp.pos, f"`{sp.name}` is a reserved word and cannot name a species")
            if sp.name in self.declared:
                self.err(sp.pos, f"species `{sp.name}` declared twice")
            self.declared.add(sp.name)
            if sp.perm_class not in PERM_CLASSES:
                self.err(sp.pos, f"species `{sp.name}`: unknown class `{sp.perm_class}` (expected {', '.join(PERM_CLASSES)})")
            if sp.perm is not None and sp.perm < 0:
                self.err(sp.pos, f"species `{sp.name}`: permeability must be >= 0")
        tags = set()
        for atom in ast.atoms:
            if atom.tag in tags:
                self.err(atom.pos, f"atom tag `{atom.tag}` declared twice")
            tags.add(atom.tag)
            for sp, w in atom.weights:
                self.species_ref(sp, atom.pos)
                if w <= 0:
                    self.err(atom.pos, f"atom `{atom.tag}`: count for `{sp}` must be positive")
        for pe in ast.permeability:
            if pe.perm_class not in PERM_CLASSES:
                self.err(pe.pos, f"unknown permeability class `{pe.perm_class}`")
            if pe.value < 0:
                self.err(pe.pos, f"permeability for `{pe.perm_class}` must be >= 0")
        if ast.environment is not None:
            env = ast.environment
            if env.volume is not None and not env.volume > 0:
                self.err(env.pos, "environment volume must be > 0")
            self.mixture(env.entries)
        self.compartment_names: dict[str, CompartmentDecl] = {}
        for c in ast.compartments:
            self.compartment(c, 1)
        if ast.compartments and ast.generator is not None:
            self.err(ast.generator.pos, "use either explicit `compartment` trees or a `generator` block, not both")
        if not ast.compartments and ast.generator is None:
            self.err(ast.pos, "no membranes: declare a `compartment` tree or a `generator` block")
        if ast.generator is not None:
            self.generator(ast.generator)
        if ast.swelling is not None:
            if not self.kinetic:
                self.err(ast.pos, "`swelling` embedding needs kinetic mode (concentrations)")
            for e in ast.swelling:
                self.species_ref(e.species, e.pos)
                if e.unit != "mM":
                    self.err(e.pos, f"swelling concentration for `{e.species}` needs the unit mM")
                if e.value < 0:
                    self.err(e.pos, f"negative concentration for `{e.species}`")
        names = set()
        for r in ast.rules:
            if r.name in names:
                self.err(r.pos, f"rule `{r.name}` declared twice")
            names.add(r.name)
            self.rule(r)
        last = None
        for iv in ast.schedule:
            self.intervention(iv)
            if last is not None and iv.time < last:
                self.err(iv.pos, f"intervention at t={iv.time} s comes after one at t={last} s; times must be nondecreasing")
            last = iv.time if last is None else max(last, iv.time)
        self.run(ast.run)

    def species_ref(self, name: str, pos) -> None:
        if name not in self.declared:
            self.err(pos, f"undeclared species `{name}`")

    def amount_unit(self, entry: Entry, what: str) -> None:
        if self.kinetic:
            if entry.unit not in ("mM", "amol"):
                self.err(entry.pos, f"{what} for `{entry.species}` needs a unit (mM or amol)")
        else:
            if entry.unit is not None:
                self.err(entry.pos, f"abstract mode counts objects; drop the unit `{entry.unit}`")
            elif not isinstance(entry.value, int):
                self.err(entry.pos, f"abstract mode needs a whole object count for `{entry.species}`")
        if entry.value < 0:
            self.err(entry.pos, f"negative {what} for `{entry.species}`")

    def mixture(self, entries: list[Entry]) -> None:
        seen = set()
        for e in entries:
            self.species_ref(e.species, e.pos)
            if e.species in seen:
                self.err(e.pos, f"`{e.species}` listed twice")
            seen.add(e.species)
            self.amount_unit(e, "amount")

    def compartment(self, c: CompartmentDecl, depth: int) -> None:
        if c.name in RESERVED or c.name == ENVIRONMENT_ID:
            self.err(c.pos, f"`{c.name}` is reserved and cannot name a compartment")
        if c.name in self.compartment_names:
            self.err(c.pos, f"compartment `{c.name}` declared twice")
        self.compartment_names[c.name] = c
        c._depth = depth  # used by the schedule checks below
        if not c.diameter > 0:
            self.err(c.pos, f"compartment `{c.name}`: diameter must be > 0")
        if c.morphology is not None and c.morphology not in MORPHOLOGIES:
            self.err(c.pos, f"compartment `{c.name}`: unknown morphology `{c.morphology}` (expected {', '.join(MORPHOLOGIES)})")
        if c.morphology is not None and depth > 1:
            self.err(c.pos, "morphology labels apply to outermost compartments only")
        self.mixture(c.contents)
        for child in c.children:
            self.compartment(child, depth + 1)

    def generator(self, g: GeneratorDecl) -> None:
        from .lower import generator_params

        try:
            generator_params(g)
        except ValueError as exc:
            self.err(g.pos, f"invalid generator parameters: {exc}")
        if g.n < 1:
            self.err(g.pos, "generator `n` must be >= 1")
        if g.seed < 0:
            self.err(g.pos, "generator `seed` must be >= 0")

    def rule(self, r: RuleDecl) -> None:
        for t in (*r.reactants, *r.products, *r.catalysts):
            self.species_ref(t.species, t.pos)
            if t.stoich < 1:
                self.err(t.pos, f"stoichiometry of `{t.species}` must be a positive integer")
        for t in r.products:
            if t.target not in TARGETS:
                self.err(t.pos, f"unknown target `{t.target}` (expected here, out or in)")
        k = r.kinetics
        if self.kinetic:
            if k is None or k.kind == "priority":
                self.err(r.pos, f"rule `{r.name}`: kinetic mode needs `kinetics mm(...)` or `kinetics mass_action(...)`")
                return
            if k.kind == "mm":
                if len({t.species for t in r.reactants}) != 1:
                    self.err(r.pos, f"rule `{r.name}`: Michaelis-Menten kinetics needs exactly one substrate species")
                self.species_ref(k.params["enzyme"], k.pos)
                if k.params["kcat"] < 0:
                    self.err(k.pos, f"rule `{r.name}`: kcat must be >= 0")
                if not k.params["km"] > 0:
                    self.err(k.pos, f"rule `{r.name}`: km must be > 0")
            elif k.params["k"] < 0:
                self.err(k.pos, f"rule `{r.name}`: rate constant must be >= 0")
        else:
            if k is not None and k.kind != "priority":
                self.err(k.pos, f"rule `{r.name}`: abstract mode takes `priority N`, not rate laws")
            if not r.reactants and not r.catalysts:
                self.err(r.pos, f"rule `{r.name}`: abstract rules need at least one reactant")

    def _mvl_target(self, name: str, pos) -> None:
        if self.ast.generator is not None:
            return  # generated ids are resolved when lowering
        c = self.compartment_names.get(name)
        if c is None:
            self.err(pos, f"unknown MVL `{name}`")
        elif getattr(c, "_depth", 1) != 1:
            self.err(pos, f"`{name}` is an inner compartment; this operation targets outermost MVLs")

    def _compartment_target(self, name: str, pos, allow_env: bool) -> None:
        if name == ENVIRONMENT_ID:
            if not allow_env:
                self.err(pos, "the environment has no membrane")
            return
        if self.ast.generator is not None:
            return
        if name not in self.compartment_names:
            self.err(pos, f"unknown compartment `{name}`")

    def intervention(self, iv: InterventionDecl) -> None:
        if iv.time < 0:
            self.err(iv.pos, "intervention time must be >= 0")
        if iv.op == "dc_pulse":
            self._mvl_target(iv.args[0], iv.pos)
        elif iv.op == "electroporate":
            target, duration, boost = iv.args
            self._mvl_target(target, iv.pos)
            if not self.kinetic:
                self.err(iv.pos, "electroporation needs kinetic mode")
            if not duration > 0:
                self.err(iv.pos, "electroporation duration must be > 0")
            if not boost >= 1:
                self.err(iv.pos, "electroporation boost must be >= 1")
        elif iv.op == "inject":
            comp, species, amount, unit = iv.args
            self._compartment_target(comp, iv.pos, allow_env=True)
            self.species_ref(species, iv.pos)
            if amount < 0:
                self.err(iv.pos, "injected amount must be >= 0")
            if self.kinetic and unit != "amol":
                self.err(iv.pos, "kinetic injections need the unit amol")
            if not self.kinetic and (unit is not None or not isinstance(amount, int)):
                self.err(iv.pos, "abstract injections take a whole object count without unit")
        elif iv.op == "insert_channel":
            comp, species, p = iv.args
            self._compartment_target(comp, iv.pos, allow_env=False)
            self.species_ref(species, iv.pos)
            if p < 0:
                self.err(iv.pos, "channel permeability must be >= 0")

    def run(self, r: RunDecl) -> None:
        if not r.dt > 0:
            self.err(r.pos, "dt must be > 0")
        if r.steps is not None and r.steps < 0:
            self.err(r.pos, "steps must be >= 0")
        if r.sample_every is not None and r.sample_every < 1:
            self.err(r.pos, "sample_every must be >= 1")
        if r.seed < 0:
            self.err(r.pos, "seed must be >= 0")
        if r.solver not in SOLVERS:
            self.err(r.pos, f"unknown solver `{r.solver}` (expected {', '.join(SOLVERS)})")
        if not r.burst_ratio > 1:
            self.err(r.pos, "burst_ratio must be > 1")
        if r.gas_factor < 0:
            self.err(r.pos, "gas_factor must be >= 0")
        if not r.quiescence_tol >= 0:
            self.err(r.pos, "quiescence_tol must be >= 0")
        if r.indicator is not None:
            self.species_ref(r.indicator[0], r.pos)
        if r.steps is None:
            r.steps = DEFAULT_STEPS[self.ast.mode]
        if r.sample_every is None:
            r.sample_every = DEFAULT_SAMPLE_EVERY[self.ast.mode]


def _decode(text) -> str:
    if isinstance(text, (bytes, bytearray)):
        try:
            text = bytes(text).decode("utf-8")
        except UnicodeDecodeError as exc:
            before = bytes(text[: exc.start]).decode("utf-8", errors="replace")
            line = before.count("\n") + 1
            col = len(before) - (before.rfind("\n") + 1) + 1
            raise ScenarioError([Diagnostic("error", line, col, "input is not valid UTF-8")]) from None
    if text.startswith("﻿"):
        text = text[1:]
    return text


def parse(text: str | bytes) -> ScenarioAst:
    """Parse and resolve a scenario; raises ScenarioError carrying diagnostics."""
    text = _decode(text)
    p = _Parser(text)
    if p.diags:
        raise ScenarioError(p.diags)
    try:
        ast = p.parse()
    except _Abort:
        raise ScenarioError(p.diags) from None
    _Checker(p, ast).check()
    errors = [d for d in p.diags if d.severity == "error"]
    if errors:
        raise ScenarioError(errors)
    for c in _all_compartments(ast.compartments):
        c.__dict__.pop("_depth", None)
    return ast


def _all_compartments(decls):
    for c in decls:
        yield c
        yield from _all_compartments(c.children)
