"""File formats: population configs (JSON), sample and curve CSVs, reports."""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path

import numpy as np

from .bias import SweepTable
from .core import CELL_ORDER, Pop1Spec
from .metrics import CurvePoints
from .populations import Pop2Spec, Sample

FLOAT_FMT = "%.17g"


class MalformedInputError(ValueError):
    pass


def load_population_config(path) -> Pop1Spec | Pop2Spec:
    with open(path) as fh:
        try:
            cfg = json.load(fh)
        except json.JSONDecodeError as exc:
            raise MalformedInputError(f"{path}: invalid JSON ({exc})") from exc
    return population_from_config(cfg)


def population_from_config(cfg: dict) -> Pop1Spec | Pop2Spec:
    if "alpha0" in cfg:
        cfg = dict(cfg)
        if isinstance(cfg.get("p"), (list, tuple)):
            cfg["p"] = dict(zip(CELL_ORDER, cfg["p"]))
        return Pop1Spec.from_config(cfg)
    if "sigma" in cfg or not cfg:
        return Pop2Spec(float(cfg.get("sigma", 0.1)))
    raise MalformedInputError("population config needs either alpha0/alpha1/beta/p or sigma")


def population_config(pop) -> dict:
    if isinstance(pop, Pop2Spec):
        return {"sigma": pop.sigma}
    return pop.to_config()


def _fmt(v: float) -> str:
    return FLOAT_FMT % v


def write_sample_csv(sample: Sample, path, counterfactuals: bool = True,
                     extra: tuple[str, ...] = ()) -> None:
    """Header ``y,a,x1..xd,z1..zp[,y0,y1][,h]`` followed by requested extra columns."""
    cols = [("y", sample.y), ("a", sample.a)]
    cols += [(f"x{j + 1}", sample.x[:, j]) for j in range(sample.x.shape[1])]
    cols += [(f"z{j + 1}", sample.z[:, j]) for j in range(sample.z.shape[1])]
    if counterfactuals and sample.y0 is not None:
        cols += [("y0", sample.y0), ("y1", sample.y1)]
    if sample.h is not None:
        cols.append(("h", sample.h))
    for name in extra:
        cols.append((name, sample.extra[name]))
    data = np.column_stack([c for _, c in cols])
    with open(path, "w", newline="") as fh:
        fh.write(",".join(name for name, _ in cols) + "\n")
        np.savetxt(fh, data, fmt=FLOAT_FMT, delimiter=",")


_X = re.compile(r"^x(\d+)$")
_Z = re.compile(r"^z(\d+)$")


def read_sample_csv(path) -> Sample:
    """Read a sample CSV; unknown columns are kept in ``Sample.extra``."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise MalformedInputError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedInputError(
                    f"{path}: row {lineno} has {len(row)} fields, expected {len(header)}"
                )
            try:
                vals = [float(v) for v in row]
            except ValueError:
                raise MalformedInputError(f"{path}: row {lineno} has a non-numeric field") from None
            if not all(math.isfinite(v) for v in vals):
                raise MalformedInputError(f"{path}: row {lineno} has a non-finite field")
            rows.append(vals)
    for required in ("y", "a"):
        if required not in header:
            raise MalformedInputError(f"missing column {required!r}")
    if not rows:
        raise MalformedInputError(f"{path}: no data rows")
    data = np.array(rows, dtype=float)
    col = {name: data[:, i] for i, name in enumerate(header)}
    xs = sorted((int(_X.match(h).group(1)), h) for h in header if _X.match(h))
    zs = sorted((int(_Z.match(h).group(1)), h) for h in header if _Z.match(h))
    if not xs:
        raise MalformedInputError("missing column 'x1'")
    n = data.shape[0]
    x = np.column_stack([col[h] for _, h in xs])
    z = np.column_stack([col[h] for _, h in zs]) if zs else np.empty((n, 0))
    known = {"y", "a", "y0", "y1", "h"} | {h for _, h in xs} | {h for _, h in zs}
    a = col["a"]
    bad = np.flatnonzero((a != 0) & (a != 1))
    if bad.size:
        raise MalformedInputError(f"{path}: row {int(bad[0]) + 2} has treatment not in {{0, 1}}")
    return Sample(
        y=col["y"], a=a, x=x, z=z,
        y0=col.get("y0") if "y1" in col else None,
        y1=col.get("y1") if "y0" in col else None,
        h=col.get("h"),
        extra={k: v for k, v in col.items() if k not in known},
        provenance="ingested",
    )


def write_curve_csv(curve: CurvePoints, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("kind,x,y\n")
        for x, y in zip(curve.x, curve.y):
            fh.write(f"{curve.kind},{_fmt(x)},{_fmt(y)}\n")


def read_curve_csv(path) -> CurvePoints:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    kinds = {r["kind"] for r in rows}
    if len(kinds) != 1:
        raise MalformedInputError("curve file must hold exactly one kind")
    return CurvePoints([float(r["x"]) for r in rows], [float(r["y"]) for r in rows], kinds.pop())


def write_sweep_csv(table: SweepTable, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write("beta1,a13_minus_a03,bias_11,bias_10,bias_01,bias_00,region\n")
        for i in range(len(table)):
            vals = [table.beta1[i], table.a13_minus_a03[i], *table.abs_bias[i]]
            fh.write(",".join(_fmt(v) for v in vals) + f",{table.region[i]}\n")


def write_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text
