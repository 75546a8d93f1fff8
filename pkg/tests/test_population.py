import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mvlsim.core import MAX_DEPTH, Mode, ModeError, Morphology, PermClass, Species
from mvlsim.distributions import TruncatedDist
from mvlsim.population import (
    GenerationError,
    GeneratorParams,
    derived_rng,
    embed_swelling_solution,
    format_stats_table,
    population_from_json_obj,
    population_stats,
    population_to_json_obj,
    sample_mvl,
    sample_population,
)
from mvlsim.core import mvl_to_dict

DEGENERATE_T1A = GeneratorParams(
    type_prevalence=(1, 0, 0, 0),
    outer_diameter=TruncatedDist(65, 0, 65, 65),
    internal_count=TruncatedDist(1, 0, 1, 1, integer=True),
)


def test_degenerate_t1a():
    m = sample_mvl(DEGENERATE_T1A, np.random.default_rng(0))
    assert m.morphology is Morphology.T1A
    assert m.root.diameter == 65
    assert m.root.max_depth() == 2
    assert m.internal_count == 1
    m.validate()


def test_same_seed_same_tree():
    p = GeneratorParams()
    a = sample_mvl(p, derived_rng(7, 0))
    b = sample_mvl(p, derived_rng(7, 0))
    assert mvl_to_dict(a) == mvl_to_dict(b)


def test_population_of_one_is_stream_zero():
    p = GeneratorParams()
    pop = sample_population(p, 1, seed=11)
    assert mvl_to_dict(pop[0]) == mvl_to_dict(sample_mvl(p, derived_rng(11, 0), "m0"))


def test_jobs_match_sequential():
    p = GeneratorParams()
    seq = sample_population(p, 40, seed=5)
    par = sample_population(p, 40, seed=5, jobs=2)
    assert [mvl_to_dict(m) for m in seq] == [mvl_to_dict(m) for m in par]


def test_n_zero_rejected():
    with pytest.raises(ValueError):
        sample_population(GeneratorParams(), 0)


def test_packing_failure_is_error():
    p = GeneratorParams(
        type_prevalence=(1, 0, 0, 0),
        outer_diameter=TruncatedDist(20, 0, 20, 20),
        internal_count=TruncatedDist(14, 0, 14, 14, integer=True),
        child_diameter_fraction=(0.6, 0.6),
        max_attempts=5,
    )
    with pytest.raises(GenerationError, match="packing"):
        sample_mvl(p, np.random.default_rng(0))


def test_prevalence_must_sum_to_one():
    with pytest.raises(ValueError):
        GeneratorParams(type_prevalence=(0.5, 0.5, 0.5, 0))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**63 - 1), i=st.integers(0, 10**6))
def test_generated_mvls_are_valid(seed, i):
    m = sample_mvl(GeneratorParams(), derived_rng(seed, i))
    m.validate()
    assert m.root.max_depth() <= MAX_DEPTH
    if m.morphology is not Morphology.T3:
        assert 17.39 <= m.root.diameter <= 173.50
        assert 1 <= m.internal_count <= 14
    else:
        assert 69.97 <= m.root.diameter <= 246.18


def test_params_json_round_trip():
    p = GeneratorParams(seed=9)
    assert GeneratorParams.from_dict(json.loads(json.dumps(p.to_dict()))) == p


class TestStats:
    def test_single_mvl(self):
        m = sample_mvl(DEGENERATE_T1A, np.random.default_rng(0))
        s = population_stats([m])
        d = s["diameter"]["non_t3"]
        assert (d["mean"], d["sd"], d["min"], d["max"]) == (65, 0, 65, 65)
        c = s["internal_count"]["non_t3"]
        assert (c["mean"], c["sd"], c["min"], c["max"]) == (1, 0, 1, 1)
        assert "Mean" in format_stats_table(s)

    def test_min_max_bracket(self):
        pop = sample_population(GeneratorParams(), 200, seed=2)
        s = population_stats(pop)
        ds = [m.root.diameter for m in pop if m.morphology is not Morphology.T3]
        assert s["diameter"]["non_t3"]["min"] == min(ds)
        assert s["diameter"]["non_t3"]["max"] == max(ds)
        assert sum(v["count"] for v in s["morphology"].values()) == 200

    def test_empty(self):
        with pytest.raises(ValueError):
            population_stats([])

    def test_json_round_trip(self):
        pop = sample_population(GeneratorParams(), 20, seed=4)
        back = population_from_json_obj({"population": population_to_json_obj(pop)})
        assert population_to_json_obj(back) == population_to_json_obj(pop)


SPECIES = {
    "sucrose": Species("sucrose", PermClass.SMALL_POLAR),
    "magnetite": Species("magnetite", PermClass.PARTICLE),
}


def _t1b():
    p = GeneratorParams(type_prevalence=(0, 1, 0, 0))
    return sample_mvl(p, np.random.default_rng(1))


class TestSwelling:
    def test_uniform_concentration(self):
        m = embed_swelling_solution(_t1b(), {"sucrose": 300}, SPECIES)
        assert m.root.max_depth() == 3
        for c in m.root.walk():
            assert c.contents["sucrose"] / c.volume == pytest.approx(300)

    def test_particles_outer_only(self):
        m = embed_swelling_solution(_t1b(), {"magnetite": 10}, SPECIES)
        assert m.root.contents["magnetite"] > 0
        assert all(c.contents["magnetite"] == 0 for c in m.root.walk() if c is not m.root)

    def test_empty_assignment(self):
        m = _t1b()
        assert mvl_to_dict(embed_swelling_solution(m, {}, SPECIES)) == mvl_to_dict(m)

    def test_abstract_rejected(self):
        with pytest.raises(ModeError):
            embed_swelling_solution(_t1b(), {"sucrose": 1}, SPECIES, Mode.ABSTRACT)

    def test_input_not_mutated(self):
        m = _t1b()
        embed_swelling_solution(m, {"sucrose": 300}, SPECIES)
        assert m.root.contents["sucrose"] == 0
