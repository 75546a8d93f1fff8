import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from conftest import scenario_text
from mvlsim.core import Mode, Morphology, mvl_to_dict
from mvlsim.population import derived_rng, sample_mvl
from mvlsim.speclang import ScenarioError, load_scenario, parse, serialize
from mvlsim.speclang.ast import (
    CompartmentDecl,
    Entry,
    KineticsDecl,
    RuleDecl,
    ScenarioAst,
    SpeciesDecl,
    Term,
)
from mvlsim.speclang.lower import generator_params

MINIMAL = """\
system tiny mode kinetic
species urea class small_polar
compartment c diameter 10 um
run { dt = 0.01 s }
"""


def errors_of(text):
    with pytest.raises(ScenarioError) as err:
        load_scenario(text)
    return err.value.diagnostics


def test_minimal_defaults_filled():
    ast = parse(MINIMAL)
    assert ast.name == "tiny" and ast.mode == "kinetic"
    assert ast.run.steps == 100_000 and ast.run.sample_every == 100
    assert ast.run.solver == "analytic-pairwise"
    assert ast.compartments[0].diameter == 10


def test_abstract_defaults():
    ast = parse("system f mode abstract\nspecies a class particle\ncompartment c diameter 10 um\n")
    assert ast.run.steps == 100 and ast.run.sample_every == 1


def test_undeclared_species_named():
    text = MINIMAL + "rule r: urea -> urea kinetics mm(kcat=1, km=1 mM, enzyme=urase)\n"
    diags = errors_of(text)
    assert any("`urase`" in d.message and d.line == 5 for d in diags)


def test_depth_four_rejected():
    text = """\
system deep mode abstract
species a class particle
compartment l1 diameter 80 um {
    compartment l2 diameter 30 um {
        compartment l3 diameter 10 um {
            compartment l4 diameter 2 um
        }
    }
}
"""
    diags = errors_of(text)
    assert any("depth 4" in d.message and "3" in d.message for d in diags)
    assert diags[0].line == 6


@pytest.mark.parametrize(
    "text, fragment",
    [
        (MINIMAL.replace("10 um", "10"), "missing unit"),
        (MINIMAL.replace("0.01 s", "0.01 ms"), "wrong unit"),
        (MINIMAL + "environment { urea: 5 }\n", "needs a unit"),
        (MINIMAL + "generator { n = 2 }\n", "not both"),
        (MINIMAL + "at 5 s do dc_pulse c\nat 1 s do dc_pulse c\n", "nondecreasing"),
        (MINIMAL + "at 1 s do dc_pulse zz\n", "`zz`"),
        (MINIMAL + "rule r: urea + urea2 -> urea kinetics mass_action(k=1)\n", "`urea2`"),
        (MINIMAL + "species e class macromolecule\nspecies x class gas\n"
         "rule r: urea + x -> e kinetics mm(kcat=1, km=1 mM, enzyme=e)\n", "exactly one substrate"),
        (MINIMAL + "rule r: urea -> urea priority 2\n", "kinetic mode needs"),
        (MINIMAL.replace("small_polar", "liquid"), "unknown class"),
        (MINIMAL + "swelling { urea: 3 amol }\n", "unit mM"),
        ("species a class gas\n", "must start with"),
        (MINIMAL + "compartment c diameter 5 um\n", "declared twice"),
    ],
)
def test_semantic_errors(text, fragment):
    diags = errors_of(text)
    assert any(fragment in d.message for d in diags), [d.message for d in diags]


def test_abstract_rules_need_reactants():
    text = "system f mode abstract\nspecies a class particle\ncompartment c diameter 10 um\nrule r: -> a\n"
    assert any("at least one reactant" in d.message for d in errors_of(text))


def test_diagnostic_format_has_caret():
    d = errors_of(MINIMAL.replace("10 um", "10 $"))[0]
    out = d.format("x.psys")
    assert out.startswith(f"x.psys:{d.line}:{d.column}: error:")
    assert out.rstrip().endswith("^")


def test_invalid_utf8():
    diags = errors_of(b"system a mode abstract\n\xff\xfe")
    assert diags[0].line == 2 and diags[0].column == 1


@pytest.mark.parametrize("name", ["urease.psys", "fibonacci.psys", "lysis.psys"])
def test_round_trip_shipped(name):
    ast = parse(scenario_text(name))
    once = serialize(ast)
    assert parse(once) == ast
    assert serialize(parse(once)) == once


def test_defaults_omitted():
    out = serialize(parse(MINIMAL))
    assert "run" not in out and "dt" not in out
    assert out.splitlines()[0] == "system tiny mode kinetic"


def test_generator_defaults_omitted():
    ast = parse("system g mode kinetic\nspecies u class gas\ngenerator { n = 3, seed = 2 }\n")
    assert "generator {\n    n = 3\n    seed = 2\n}" in serialize(ast)


class TestLower:
    def test_explicit_tree_amounts(self):
        text = """\
system two mode kinetic
species urea class small_polar
environment volume 5000 fL { urea: 2 mM }
compartment outer diameter 20 um {
    contents { urea: 1.5 mM }
    compartment inner diameter 5 um {
        contents { urea: 30 amol }
    }
}
"""
        sc = load_scenario(text)
        outer = sc.state.mvls[0].root
        assert sc.state.mvls[0].morphology is Morphology.T1A
        assert outer.contents["urea"] == pytest.approx(1.5 * outer.volume)
        assert outer.children[0].contents["urea"] == 30
        assert sc.state.environment.volume == 5000
        assert sc.state.environment.contents["urea"] == pytest.approx(10000)

    def test_generator_matches_sample_mvl(self):
        text = "system g mode kinetic\nspecies u class gas\ngenerator { n = 1, seed = 7 }\n"
        ast = parse(text)
        sc = load_scenario(text)
        direct = sample_mvl(generator_params(ast.generator), derived_rng(7, 0), "m0")
        assert mvl_to_dict(sc.state.mvls[0]) == mvl_to_dict(direct)

    def test_particle_inner_warning(self):
        text = """\
system p mode kinetic
species bead class particle
compartment outer diameter 20 um {
    compartment inner diameter 5 um { contents { bead: 3 amol } }
}
"""
        sc = load_scenario(text)
        assert sc.warnings and "particle" in sc.warnings[0].message
        assert sc.warnings[0].line == 4
        assert sc.state.mvls[0].root.children[0].contents["bead"] == 3

    def test_packing_violation_positioned(self):
        text = """\
system p mode abstract
species a class particle
compartment outer diameter 10 um {
    compartment x diameter 9 um
    compartment y diameter 9 um
}
"""
        diags = errors_of(text)
        assert diags[0].line == 3 and "exceed" in diags[0].message

    def test_swelling_and_atoms(self):
        sc = load_scenario(scenario_text("urease.psys"))
        assert sc.atoms == {"N": {"urea": 2, "nh3": 1}, "C": {"urea": 1, "co2": 1}}
        for comp in sc.state.mvls[0].root.walk():
            assert comp.contents["sucrose"] / comp.volume == pytest.approx(300)
        assert sc.state.mode is Mode.KINETIC

    def test_morphology_label(self):
        text = "system t mode abstract\nspecies a class particle\n" \
               "compartment m diameter 100 um morphology T3 {\n    compartment k diameter 5 um\n}\n"
        assert load_scenario(text).state.mvls[0].morphology is Morphology.T3


@settings(max_examples=300, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.binary(max_size=300))
def test_parse_total_on_bytes(data):
    try:
        parse(data)
    except ScenarioError as err:
        assert err.diagnostics


@settings(max_examples=300, deadline=None)
@given(st.lists(st.sampled_from(list("abc {}():,=@+/;->#\n0123456789.e um mM s") + [
    "system ", "species ", "compartment ", "rule ", "run ", "mode ", "kinetic", "abstract"]), max_size=60))
def test_parse_total_on_token_soup(pieces):
    text = "".join(pieces)
    lines = text.split("\n")
    try:
        parse(text)
    except ScenarioError as err:
        for d in err.diagnostics:
            assert 1 <= d.line <= len(lines)
            assert 1 <= d.column <= len(lines[d.line - 1]) + 1


NAMES = st.sampled_from(["a", "b", "c", "urea", "x_1", "s.2"])


@st.composite
def asts(draw):
    mode = draw(st.sampled_from(["abstract", "kinetic"]))
    species = draw(st.lists(NAMES, min_size=1, max_size=4, unique=True))
    kinetic = mode == "kinetic"

    def amount():
        if kinetic:
            return draw(st.floats(0, 1e3, allow_nan=False)), draw(st.sampled_from(["mM", "amol"]))
        return draw(st.integers(0, 50)), None

    def entries():
        chosen = draw(st.lists(st.sampled_from(species), unique=True, max_size=3))
        out = []
        for s in chosen:
            v, u = amount()
            out.append(Entry(s, v, u))
        return out

    inner = [CompartmentDecl(f"k{i}", 2.0 + i, contents=entries()) for i in range(draw(st.integers(0, 2)))]
    comps = [CompartmentDecl("root", draw(st.floats(50, 200)), contents=entries(), children=inner)]
    rules = []
    for i in range(draw(st.integers(0, 3))):
        reactants = [Term(draw(st.sampled_from(species)), draw(st.integers(1, 3)))]
        products = [
            Term(s, draw(st.integers(1, 2)), draw(st.sampled_from(["here", "out", "in"])))
            for s in draw(st.lists(st.sampled_from(species), max_size=2))
        ]
        if kinetic:
            kin = KineticsDecl("mass_action", {"k": draw(st.floats(0, 10))})
        else:
            kin = draw(st.sampled_from([None, KineticsDecl("priority", {"value": 2})]))
        rules.append(RuleDecl(f"r{i}", reactants, products, kinetics=kin))
    ast = ScenarioAst("gen", mode, [SpeciesDecl(s, "gas") for s in species], compartments=comps, rules=rules)
    ast.run.steps = 100 if not kinetic else 100_000
    ast.run.sample_every = 1 if not kinetic else 100
    ast.run.seed = draw(st.integers(0, 10))
    return ast


@settings(max_examples=150, deadline=None)
@given(asts())
def test_round_trip_property(ast):
    text = serialize(ast)
    again = parse(text)
    assert again == ast
    assert serialize(again) == text
