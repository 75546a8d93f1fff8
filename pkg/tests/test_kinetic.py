import math

import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_species, two_box
from mvlsim.core import (
    Compartment,
    MassAction,
    MichaelisMenten,
    Mixture,
    Mode,
    ModeError,
    Morphology,
    Mvl,
    Product,
    Rule,
    SystemState,
    make_environment,
)
from mvlsim.engine import KineticConfig, diffusion_step, rate, reaction_step, swelling_and_burst

UREASE = Rule(
    "hydrolysis",
    {"urea": 1},
    (Product("nh3", 2), Product("co2", 1)),
    kinetics=MichaelisMenten(1e4, 3.0, "urease"),
)


def _single(species, contents, rules=(), v=100.0):
    box = Compartment("box", 1, 5.0, volume=v, contents=Mixture(contents))
    return SystemState(species, make_environment(1e6), [Mvl(Morphology.PLAIN, box)], list(rules), mode=Mode.KINETIC)


class TestRate:
    def test_half_saturation(self):
        comp = Compartment("c", 1, 5.0, volume=1.0, contents=Mixture({"urea": 3.0, "urease": 0.5}))
        assert rate(UREASE, comp, 1.0) == pytest.approx(0.5 * 1e4 * 0.5)

    def test_no_enzyme(self, species_kinetic):
        s = _single(species_kinetic, {"urea": 1e4})
        reaction_step(s, 0.01)
        assert s.mvls[0].root.contents.nonzero() == {"urea": 1e4}

    def test_single_step_by_hand(self, species_kinetic):
        # v = kcat [E] [S] / (Km + [S]) = 1e4 * 1e-3 * 100 / 103 mM/s
        s = _single(species_kinetic, {"urea": 100 * 100.0, "urease": 1e-3 * 100.0}, [UREASE])
        reaction_step(s, 1e-4, KineticConfig(dt=1e-4, gas_molar_volume_factor=0.0))
        urea = s.mvls[0].root.contents["urea"] / 100.0
        assert urea == pytest.approx(100 - 1e4 * 1e-3 * 100 / 103 * 1e-4, rel=1e-12)
        assert urea == pytest.approx(99.99903, abs=1e-5)

    def test_gas_products_tallied(self, species_kinetic):
        s = _single(species_kinetic, {"urea": 1000.0, "urease": 1.0}, [UREASE])
        reaction_step(s, 0.01)
        root = s.mvls[0].root
        assert root.gas_accumulated == pytest.approx(root.contents["nh3"] + root.contents["co2"])

    def test_atoms_conserved(self, species_kinetic):
        s = _single(species_kinetic, {"urea": 1000.0, "urease": 1.0}, [UREASE])
        for _ in range(50):
            reaction_step(s, 0.01)
        c = s.mvls[0].root.contents
        assert 2 * c["urea"] + c["nh3"] == pytest.approx(2000.0, rel=1e-12)
        assert c["urea"] + c["co2"] == pytest.approx(1000.0, rel=1e-12)

    def test_clamp_keeps_nonnegative(self, species_kinetic):
        fast = Rule("fast", {"urea": 2}, (Product("ion"),), kinetics=MassAction(1e6))
        s = _single(species_kinetic, {"urea": 50.0}, [fast])
        reaction_step(s, 1.0)
        assert s.mvls[0].root.contents["urea"] >= 0
        assert s.clamp_count >= 1

    def test_abstract_rejected(self, species_kinetic):
        s = _single(species_kinetic, {})
        s.mode = Mode.ABSTRACT
        with pytest.raises(ModeError):
            reaction_step(s, 0.01)


class TestDiffusion:
    def test_zero_gradient(self, species_kinetic):
        s = two_box(species_kinetic, c_out=1.0, c_in=1.0)
        assert diffusion_step(s, 0.1) == 0.0

    def test_impermeant_unchanged(self, species_kinetic):
        s = two_box(species_kinetic, c_out=5.0, c_in=0.0, name="sucrose")
        diffusion_step(s, 10.0)
        assert s.mvls[0].root.contents["sucrose"] == 0

    @pytest.mark.parametrize("solver", ["forward-euler", "analytic-pairwise"])
    def test_two_box_relaxation(self, species_kinetic, solver):
        s = two_box(species_kinetic)
        root = s.mvls[0].root
        k = 0.04 * root.area * (1 / 100 + 1 / 100)
        dt = 1e-3 / k
        cfg = KineticConfig(dt=dt, diffusion_solver=solver)
        for _ in range(3000):
            diffusion_step(s, dt, cfg)
        exact = 1.0 * (1 - math.exp(-3.0))
        assert root.contents["urea"] / 100 == pytest.approx(exact, rel=1e-3)
        assert root.contents["urea"] + s.environment.contents["urea"] == pytest.approx(200.0, rel=1e-12)

    @settings(max_examples=40, deadline=None)
    @given(
        c_out=st.floats(0, 100),
        c_in=st.floats(0, 100),
        dt=st.floats(1e-3, 50),
        solver=st.sampled_from(["forward-euler", "analytic-pairwise"]),
    )
    def test_gradient_nonincreasing(self, c_out, c_in, dt, solver):
        s = two_box(make_species(), c_out=c_out, c_in=c_in)
        cfg = KineticConfig(dt=dt, diffusion_solver=solver)
        root = s.mvls[0].root
        k = 0.04 * root.area * (2 / 100)
        # forward Euler only contracts the gap while k * dt <= 2
        check = solver == "analytic-pairwise" or k * dt <= 2
        gap = abs(s.environment.contents["urea"] - root.contents["urea"]) / 100
        for _ in range(5):
            diffusion_step(s, dt, cfg)
            new_gap = abs(s.environment.contents["urea"] - root.contents["urea"]) / 100
            if check:
                assert new_gap <= gap * (1 + 1e-12) + 1e-12
            assert root.contents["urea"] >= 0 and s.environment.contents["urea"] >= 0
            gap = new_gap


class TestBurst:
    def test_no_gas_no_event(self, species_kinetic):
        s = _single(species_kinetic, {"urea": 1.0})
        assert swelling_and_burst(s) == []

    def test_ratio_example(self, species_kinetic):
        s = _single(species_kinetic, {"co2": 300.0})
        root = s.mvls[0].root
        root.gas_accumulated = 300.0
        assert root.effective_volume(0.025) / root.volume == pytest.approx(1.075)
        events = swelling_and_burst(s, KineticConfig())
        assert [e.kind for e in events] == ["burst"]
        assert s.mvls == [] and s.environment.contents["co2"] == 300.0
        assert "box" in s.retired

    def test_below_threshold(self, species_kinetic):
        s = _single(species_kinetic, {})
        s.mvls[0].root.gas_accumulated = 200.0  # ratio 1.05
        assert swelling_and_burst(s, KineticConfig()) == []

    def test_inner_burst_reparents(self, species_kinetic):
        root = Compartment("m", 1, 60.0, contents=Mixture({"urea": 5.0}))
        mid = Compartment("m.1", 2, 20.0, contents=Mixture({"urea": 7.0, "co2": 2e4}), gas_accumulated=2e4)
        leaf = Compartment("m.1.1", 3, 5.0, contents=Mixture({"urea": 2.0}))
        mid.children.append(leaf)
        root.children.append(mid)
        s = SystemState(species_kinetic, make_environment(), [Mvl(Morphology.T1B, root)], [], mode=Mode.KINETIC)
        before = s.totals()
        events = swelling_and_burst(s, KineticConfig())
        assert [e.compartment_id for e in events] == ["m.1"]
        assert root.children == [leaf] and leaf.depth == 2
        assert s.mvls[0].morphology is Morphology.T1A
        s.validate()
        after = s.totals()
        assert all(after[k] == pytest.approx(v) for k, v in before.items())
