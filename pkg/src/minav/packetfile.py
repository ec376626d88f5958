"""JSON packet files (schema version 1).

::

    {"v": 1, "c": 1.0, "sigma": 0.1,            # or "noise_cov": [9 numbers, row-major]
     "moments": [[x, y, z], ...], "readings": [[x, y, z], ...],
     "gyro_deltas": [[roll, pitch, yaw], ...],  # optional, radians
     "accel": [[x, y, z], ...]}                 # optional, m/s^2
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .dipole import MeasurementPacket, MomentSchedule
from .errors import SchemaError

SCHEMA_VERSION = 1


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(f"expected a number, got {type(value).__name__}", name)
    if not math.isfinite(value):
        raise SchemaError("numbers must be finite", name)
    return float(value)


def _vectors(doc: dict, name: str, required: bool = True):
    if name not in doc:
        if required:
            raise SchemaError("missing required field", name)
        return None
    rows = doc[name]
    if not isinstance(rows, list) or not rows:
        raise SchemaError("expected a nonempty array of [x, y, z]", name)
    out = []
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != 3:
            raise SchemaError("expected an array of 3 numbers", f"{name}[{i}]")
        out.append([_number(v, f"{name}[{i}]") for v in row])
    return np.array(out)


def parse_packet(doc) -> MeasurementPacket:
    if not isinstance(doc, dict):
        raise SchemaError("top level must be a JSON object")
    if doc.get("v") != SCHEMA_VERSION:
        raise SchemaError(f"unsupported schema version {doc.get('v')!r}, expected 1", "v")
    if "c" not in doc:
        raise SchemaError("missing required field", "c")
    c = _number(doc["c"], "c")
    has_sigma, has_cov = "sigma" in doc, "noise_cov" in doc
    if has_sigma == has_cov:
        raise SchemaError("give exactly one of 'sigma' and 'noise_cov'", "sigma")
    if has_sigma:
        sigma = _number(doc["sigma"], "sigma")
        if sigma <= 0:
            raise SchemaError("must be positive", "sigma")
        P = sigma**2 * np.eye(3)
    else:
        cov = doc["noise_cov"]
        if not isinstance(cov, list) or len(cov) != 9:
            raise SchemaError("expected 9 numbers (row-major 3x3)", "noise_cov")
        P = np.array([_number(v, "noise_cov") for v in cov]).reshape(3, 3)
    moments = _vectors(doc, "moments")
    readings = _vectors(doc, "readings")
    if len(readings) != len(moments):
        raise SchemaError(
            f"has {len(readings)} entries but 'moments' has {len(moments)}", "readings"
        )
    gyro = _vectors(doc, "gyro_deltas", required=False)
    if gyro is not None and len(gyro) != len(moments):
        raise SchemaError(f"expected {len(moments)} entries", "gyro_deltas")
    accel = _vectors(doc, "accel", required=False)
    try:
        schedule = MomentSchedule(moments)
    except ValueError as exc:
        raise SchemaError(str(exc), "moments") from None
    return MeasurementPacket(c=c, schedule=schedule, readings=readings, noise_cov=P,
                             gyro_deltas=gyro, accel=accel)


def load_packet(path) -> MeasurementPacket:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_packet(doc)


def packet_to_dict(packet: MeasurementPacket) -> dict:
    P = packet.noise_cov
    if P.ndim != 2:
        raise ValueError("per-sample noise covariances cannot be stored in a packet file")
    doc = {"v": SCHEMA_VERSION, "c": packet.c}
    if np.array_equal(P, P[0, 0] * np.eye(3)):
        doc["sigma"] = math.sqrt(P[0, 0])
    else:
        doc["noise_cov"] = P.ravel().tolist()
    doc["moments"] = packet.moments.tolist()
    doc["readings"] = packet.readings.tolist()
    if packet.gyro_deltas is not None:
        doc["gyro_deltas"] = packet.gyro_deltas.tolist()
    if packet.accel is not None:
        doc["accel"] = packet.accel.tolist()
    return doc


def dump_packet(packet: MeasurementPacket, path) -> None:
    Path(path).write_text(json.dumps(packet_to_dict(packet), indent=1) + "\n", encoding="utf-8")
