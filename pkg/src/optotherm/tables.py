"""CSV tables with '#' metadata headers and JSON summaries."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError

FLOAT_FORMAT = "{:.17g}"


def params_hash(params) -> str:
    blob = json.dumps(params.to_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    if value is None:
        return ""
    value = float(value)
    if math.isnan(value):
        return "nan"
    return FLOAT_FORMAT.format(value)


@dataclass
class OutputTable:
    columns: list
    rows: list
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        width = len(self.columns)
        for i, row in enumerate(self.rows):
            if len(row) != width:
                raise ValueError(f"row {i} has {len(row)} entries, expected {width}")

    @classmethod
    def from_columns(cls, data: dict, metadata=None) -> "OutputTable":
        names = list(data)
        cols = [list(data[k]) for k in names]
        n = len(cols[0]) if cols else 0
        if any(len(c) != n for c in cols):
            raise ValueError("columns differ in length")
        return cls(names, [list(r) for r in zip(*cols)], dict(metadata or {}))

    def column(self, name):
        i = self.columns.index(name)
        return np.array([float(r[i]) if r[i] not in ("",) else math.nan for r in self.rows])

    def write(self, path) -> Path:
        path = Path(path)
        lines = [f"# optotherm {__version__}"]
        for key, value in self.metadata.items():
            if not isinstance(value, str):
                value = json.dumps(value, sort_keys=True)
            lines.append(f"# {key}: {value}")
        lines.append(",".join(self.columns))
        lines.extend(",".join(_fmt(v) for v in row) for row in self.rows)
        path.write_text("\n".join(lines) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "OutputTable":
        metadata = {}
        columns = None
        rows = []
        for line in Path(path).read_text().splitlines():
            if line.startswith("#"):
                body = line[1:].strip()
                if ": " in body:
                    key, value = body.split(": ", 1)
                    try:
                        metadata[key] = json.loads(value)
                    except json.JSONDecodeError:
                        metadata[key] = value
                continue
            if columns is None:
                columns = line.split(",")
            elif line:
                rows.append([_parse(x) for x in line.split(",")])
        if columns is None:
            raise ConfigError(f"{path}: no column header")
        return cls(columns, rows, metadata)


def _parse(text):
    try:
        return float(text)
    except ValueError:
        return text


def record_table(record, wall_time=True, si=None) -> OutputTable:
    """Time series of a RunRecord; the header carries everything needed to rerun it."""
    data = dict(record.samples)
    if si is not None:
        data["t_s"] = si.time_to_si(record.samples["t"])
        for name in ("work", "heat", "u", "e_mech"):
            data[f"{name}_J"] = si.energy_to_si(record.samples[name])
    meta = {
        "label": record.protocol.label,
        "params_hash": params_hash(record.params),
        "params": record.params.to_dict(),
        "protocol": record.protocol.to_dict(),
    }
    if si is not None:
        meta["gamma_si"] = si.gamma_si
    if wall_time:
        meta["wall_time"] = f"{record.diagnostics.get('wall_time', 0.0):.3f}"
    return OutputTable.from_columns(data, meta)


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=_json_default) + "\n")
    return path


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")


def record_summary(record) -> dict:
    return {
        "label": record.protocol.label,
        "params": record.params.to_dict(),
        "params_hash": params_hash(record.params),
        "final_state": record.final_state.to_dict(),
        "final_ledger": record.final_ledger.to_dict(),
        "diagnostics": record.diagnostics,
    }


def replay_table(path):
    """Re-execute the run stored in a time-series table's header."""
    from .protocols import Protocol, run_protocol
    from .units import SystemParams

    table = OutputTable.read(path)
    try:
        params = SystemParams.from_dict(table.metadata["params"])
        protocol = Protocol.from_dict(table.metadata["protocol"])
    except KeyError as exc:
        raise ConfigError(f"{path}: header lacks {exc.args[0]!r}") from None
    return run_protocol(params, protocol)
