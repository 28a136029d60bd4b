"""Sampled curves with CSV/JSON serialization.

CSV columns are always ``t, x0..x{n-1}, U0.., A0.., J0..`` (J columns only
when jerks are present), written with 17 significant digits so files
round-trip to the same doubles and are byte-identical across runs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError

FMT = "%.17g"


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    U: np.ndarray
    A: np.ndarray
    J: Optional[np.ndarray] = None
    metric: str = "flat-euclidean"
    equation: str = "custom"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        if self.t.ndim != 1 or len(self.t) < 1:
            raise InputError("t must be a non-empty 1-d array")
        d = np.diff(self.t)
        if len(d) and not (np.all(d > 0) or np.all(d < 0)):
            raise InputError("sample times must be strictly monotone")

    @property
    def dim(self):
        return self.x.shape[-1]

    def __len__(self):
        return len(self.t)

    def state(self, i):
        from .dynamics import CurveState

        return CurveState(self.x[i], self.U[i], self.A[i], None if self.J is None else self.J[i])

    def states(self):
        from .dynamics import CurveState

        return CurveState(self.x, self.U, self.A, self.J)

    def columns(self):
        n = self.dim
        names = ["t"] + [f"{p}{i}" for p in ("x", "U", "A") for i in range(n)]
        blocks = [self.t[:, None], self.x, self.U, self.A]
        if self.J is not None:
            names += [f"J{i}" for i in range(n)]
            blocks.append(self.J)
        return names, np.hstack(blocks)

    def to_csv(self, path=None):
        names, data = self.columns()
        buf = io.StringIO()
        buf.write(",".join(names) + "\n")
        for row in data:
            buf.write(",".join(FMT % v for v in row) + "\n")
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    def to_dict(self):
        out = {
            "metric": self.metric,
            "equation": self.equation,
            "meta": _jsonable(self.meta),
            "t": self.t.tolist(),
            "x": self.x.tolist(),
            "U": self.U.tolist(),
            "A": self.A.tolist(),
        }
        if self.J is not None:
            out["J"] = self.J.tolist()
        return out

    def to_json(self, path=None):
        text = json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, source, metric="flat-euclidean", equation="custom"):
        text = Path(source).read_text() if not isinstance(source, str) or "\n" not in source else source
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        if header[0] != "t":
            raise InputError("first CSV column must be t")
        n = sum(1 for h in header if h.startswith("x"))
        get = lambda p: body[:, [header.index(f"{p}{i}") for i in range(n)]]  # noqa: E731
        J = get("J") if "J0" in header else None
        return cls(body[:, 0], get("x"), get("U"), get("A"), J, metric, equation)

    @classmethod
    def from_dict(cls, d):
        J = np.array(d["J"]) if "J" in d else None
        return cls(np.array(d["t"]), np.array(d["x"]), np.array(d["U"]), np.array(d["A"]), J,
                   d.get("metric", "flat-euclidean"), d.get("equation", "custom"), d.get("meta", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
