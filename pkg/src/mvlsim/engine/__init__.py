from .abstract import applicable, maximal_step, select_applications, total_objects
from .interventions import (
    Intervention,
    apply_intervention,
    dc_pulse,
    electroporate,
    insert_channel,
    microinject,
)
from .kinetic import KineticConfig, diffusion_step, rate, reaction_step, swelling_and_burst
from .runner import AbstractConfig, RunError, Trace, atom_totals, run

__all__ = [
    "AbstractConfig",
    "Intervention",
    "KineticConfig",
    "RunError",
    "Trace",
    "applicable",
    "apply_intervention",
    "atom_totals",
    "dc_pulse",
    "diffusion_step",
    "electroporate",
    "insert_channel",
    "maximal_step",
    "microinject",
    "rate",
    "reaction_step",
    "run",
    "select_applications",
    "swelling_and_burst",
    "total_objects",
]
