"""CSV and JSON writers for run traces."""

from __future__ import annotations

import csv
import json
from typing import TextIO

from .runner import Trace

CSV_COLUMNS = [
    "time_s",
    "compartment_id",
    "depth",
    "species",
    "amount",
    "concentration_mM",
    "volume_fL",
    "gas_amol",
    "event",
]


def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return repr(x)
    return str(x)


def write_csv(trace: Trace, fh: TextIO, meta: dict | None = None) -> None:
    """One row per (sample, compartment, species), then one row per event entry.

    ``meta`` goes on a leading ``#`` comment line as compact JSON.
    """
    if meta is not None:
        fh.write("# " + json.dumps(meta, sort_keys=True) + "\n")
    columns = CSV_COLUMNS + (["indicator"] if trace.indicator else [])
    writer = csv.writer(fh, lineterminator="\n")
    writer.writerow(columns)
    for sample in trace.samples:
        for r in sample.rows:
            row = [
                _num(sample.time),
                r.compartment_id,
                r.depth,
                r.species,
                _num(r.amount),
                _num(r.concentration),
                _num(r.volume),
                _num(r.gas),
                "",
            ]
            if trace.indicator:
                row.append("" if r.indicator is None else int(r.indicator))
            writer.writerow(row)
    for ev in trace.events:
        entries = sorted(ev.payload.items()) or [("", None)]
        for species, amount in entries:
            row = [_num(ev.time), ev.compartment_id, "", species, _num(amount), "", "", "", ev.kind]
            if trace.indicator:
                row.append("")
            writer.writerow(row)


def trace_to_dict(trace: Trace) -> dict:
    return {
        "mode": trace.mode.value,
        "halt_reason": trace.halt_reason,
        "steps": trace.steps,
        "species": trace.species,
        "clamp_count": trace.clamp_count,
        "samples": [
            {
                "time_s": s.time,
                "step": s.step,
                "rows": [
                    {
                        "compartment_id": r.compartment_id,
                        "depth": r.depth,
                        "species": r.species,
                        "amount": r.amount,
                        "concentration_mM": r.concentration,
                        "volume_fL": r.volume,
                        "gas_amol": r.gas,
                        **({"indicator": r.indicator} if trace.indicator else {}),
                    }
                    for r in s.rows
                ],
            }
            for s in trace.samples
        ],
        "events": [e.to_dict() for e in trace.events],
        "conservation": {
            "atoms": trace.atoms,
            "max_relative_drift": trace.audit_drift(),
        },
    }


def write_json(trace: Trace, fh: TextIO, meta: dict | None = None) -> None:
    doc = {"meta": meta or {}, "trace": trace_to_dict(trace)}
    fh.write(json.dumps(doc, indent=1) + "\n")
