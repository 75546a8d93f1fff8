import csv
import io
import json

import pytest

from conftest import scenario_text, two_box
from mvlsim.core import Compartment, Mixture, Mode, Morphology, Mvl, SystemState, make_environment
from mvlsim.engine import AbstractConfig, Intervention, KineticConfig, RunError, run
from mvlsim.engine.trace_io import CSV_COLUMNS, write_csv, write_json
from mvlsim.speclang import load_scenario


def test_empty_system_is_quiescent(species_kinetic):
    s = two_box(species_kinetic, c_out=1.0, c_in=1.0)
    trace = run(s, KineticConfig())
    assert trace.halt_reason == "quiescence"
    assert len(trace.samples) == 1 and trace.steps == 0


def test_fibonacci_per_step_totals():
    sc = load_scenario(scenario_text("fibonacci.psys"))
    trace = run(sc.state, sc.config, sc.schedule)
    assert [s.total() for s in trace.samples] == [1, 1, 2, 3, 5, 8, 13, 21, 34, 55, 89]
    assert trace.halt_reason == "max_steps"


def test_abstract_halt():
    sc = load_scenario(scenario_text("fibonacci.psys"))
    sc.state.rules = []
    trace = run(sc.state, AbstractConfig(max_steps=5))
    assert trace.halt_reason == "halt" and trace.steps == 0


def test_config_mode_mismatch(species_kinetic):
    with pytest.raises(TypeError):
        run(two_box(species_kinetic), AbstractConfig())


def test_urease_run_bursts_and_conserves():
    sc = load_scenario(scenario_text("urease.psys"))
    trace = run(sc.state, sc.config, sc.schedule, sc.atoms)
    assert trace.count("burst") >= 1
    assert trace.halt_reason == "quiescence"
    drift = trace.audit_drift()
    assert drift["N"] < 1e-6 and drift["C"] < 1e-6
    times = [e.time for e in trace.events]
    assert times == sorted(times)


def test_electroporation_schedule(species_kinetic):
    s = two_box(species_kinetic)
    trace = run(
        s,
        KineticConfig(dt=0.1, max_steps=100),
        [Intervention(1.0, "electroporate", ("box", 2.0, 10.0))],
    )
    kinds = [(e.kind, round(e.time, 6)) for e in trace.events]
    assert ("electroporation_open", 1.0) in kinds
    assert ("electroporation_close", 3.0) in kinds


def test_runtime_error_reports_step(species_kinetic):
    s = two_box(species_kinetic)
    with pytest.raises(RunError) as err:
        run(s, KineticConfig(dt=0.1, max_steps=50), [Intervention(0.5, "inject", ("nope", "urea", 1.0))])
    assert err.value.step == 5


def test_clock_nondecreasing(species_kinetic):
    s = two_box(species_kinetic)
    trace = run(s, KineticConfig(dt=0.5, max_steps=40, sample_every=3))
    times = [smp.time for smp in trace.samples]
    assert times == sorted(times)
    assert trace.samples[-1].step == trace.steps


class TestTraceIO:
    def _trace(self):
        sc = load_scenario(scenario_text("lysis.psys"))
        sc.config.max_steps = 1200
        return run(sc.state, sc.config, sc.schedule)

    def test_csv(self):
        trace = self._trace()
        buf = io.StringIO()
        write_csv(trace, buf, {"seed": 0})
        lines = buf.getvalue().splitlines()
        assert json.loads(lines[0][2:]) == {"seed": 0}
        rows = list(csv.DictReader(lines[1:]))
        assert list(rows[0]) == CSV_COLUMNS
        events = {r["event"] for r in rows if r["event"]}
        assert {"electroporation_open", "dc_lysis"} <= events

    def test_json(self):
        trace = self._trace()
        buf = io.StringIO()
        write_json(trace, buf, {"seed": 0})
        doc = json.loads(buf.getvalue())
        assert doc["meta"] == {"seed": 0}
        assert doc["trace"]["halt_reason"] == trace.halt_reason


def test_small_polar_calibration():
    # without enzyme, every inner compartment reaches 10% of the 100 mM bath within 600 s
    text = scenario_text("urease.psys").replace("    urease: 0.001 mM\n", "")
    sc = load_scenario(text)
    sc.config.max_steps = 60_000
    sc.config.quiescence_tol = 0.0
    sc.config.sample_every = 1000
    trace = run(sc.state, sc.config)
    assert trace.samples[-1].time == pytest.approx(600.0)
    inner = {r.compartment_id: r.concentration for r in trace.samples[-1].rows if r.species == "urea" and r.depth > 1}
    assert set(inner) == {"a", "a1", "b", "c"}
    assert min(inner.values()) >= 10.0
