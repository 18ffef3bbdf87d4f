"""CSV/JSON serialization of maps, traces and sweep tables."""
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Union

import numpy as np

from robustdd.analysis import MapResult, SweepRow
from robustdd.simulator import TraceResult

MAP_COLUMNS = ("epsilon", "offset", "fidelity")
TRACE_COLUMNS = ("time_us", "pulse_count", "magnetization", "stderr")
SWEEP_COLUMNS = ("sequence", "tau_d_us", "duty_cycle", "t1e_us", "censored")

Result = Union[MapResult, TraceResult, list]


def _num(x) -> str:
    return repr(float(x))


def _kind(result) -> str:
    if isinstance(result, MapResult):
        return "map"
    if isinstance(result, TraceResult):
        return "trace"
    if isinstance(result, list) and all(isinstance(r, SweepRow) for r in result):
        return "sweep"
    raise TypeError(f"cannot serialize {type(result).__name__}")


def _rows(result):
    kind = _kind(result)
    if kind == "map":
        for i, e in enumerate(result.epsilon_axis):
            for j, o in enumerate(result.offset_axis):
                yield [_num(e), _num(o), _num(result.fidelity_grid[i, j])]
    elif kind == "trace":
        for t, n, m, s in zip(result.times, result.pulse_count, result.magnetization, result.stderr):
            yield [_num(t), str(int(n)), _num(m), _num(s)]
    else:
        for r in result:
            yield [r.sequence, _num(r.tau_d_us), _num(r.duty_cycle), _num(r.t1e_us), str(bool(r.censored)).lower()]


def _data(result) -> dict:
    kind = _kind(result)
    if kind == "map":
        return {
            "epsilon": result.epsilon_axis.tolist(),
            "offset": result.offset_axis.tolist(),
            "fidelity": result.fidelity_grid.tolist(),
            "pulses_applied": result.pulses_applied,
            "label": result.label,
            "metadata": result.metadata,
        }
    if kind == "trace":
        return {
            "time_us": result.times.tolist(),
            "pulse_count": result.pulse_count.tolist(),
            "magnetization": result.magnetization.tolist(),
            "stderr": result.stderr.tolist(),
        }
    return {"rows": [
        {"sequence": r.sequence, "tau_d_us": r.tau_d_us, "duty_cycle": r.duty_cycle, "t1e_us": r.t1e_us,
         "censored": bool(r.censored), "t1e_stderr": r.t1e_stderr}
        for r in result
    ]}


def columns(result) -> tuple:
    return {"map": MAP_COLUMNS, "trace": TRACE_COLUMNS, "sweep": SWEEP_COLUMNS}[_kind(result)]


def emit(result: Result, fmt: str = "csv", meta: dict = None) -> bytes:
    """Encode a result as UTF-8 CSV (header row) or a JSON object with ``meta`` and ``data``."""
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns(result))
        writer.writerows(_rows(result))
        return buf.getvalue().encode("utf-8")
    if fmt == "json":
        payload = {"meta": dict(meta or {}, kind=_kind(result)), "data": _data(result)}
        if _kind(result) == "trace":
            payload["meta"].setdefault("trace_metadata", result.metadata)
        return (json.dumps(payload, indent=1, sort_keys=True) + "\n").encode("utf-8")
    raise ValueError(f"unknown format {fmt!r}")


def write(result: Result, path: Union[str, Path], fmt: str = "csv", meta: dict = None) -> Path:
    path = Path(path)
    path.write_bytes(emit(result, fmt, meta))
    return path


def load_result(path: Union[str, Path]) -> Result:
    """Read a JSON result written by :func:`emit` back into memory."""
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    kind = payload["meta"]["kind"]
    data = payload["data"]
    if kind == "map":
        return MapResult(np.array(data["epsilon"]), np.array(data["offset"]), np.array(data["fidelity"]),
                         data["pulses_applied"], data["label"], data.get("metadata", {}))
    if kind == "trace":
        return TraceResult(np.array(data["time_us"]), np.array(data["pulse_count"]),
                           np.array(data["magnetization"]), np.array(data["stderr"]),
                           payload["meta"].get("trace_metadata", {}))
    if kind == "sweep":
        return [SweepRow(r["sequence"], r["tau_d_us"], r["duty_cycle"], r["t1e_us"], r["censored"],
                         r.get("t1e_stderr", 0.0)) for r in data["rows"]]
    raise ValueError(f"unknown result kind {kind!r}")
