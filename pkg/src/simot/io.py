"""Problem files, result documents and plot tables.

Problems and results are JSON.  Floats are written in their shortest
round-trip form, so a document read back reproduces every value bit for bit.
In exact mode decimals are parsed as fractions.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .errors import DimensionMismatch, ParseError
from .line1d.density import PiecewiseConstantDensity, PiecewiseMap
from .measure import DiscreteMeasure, MeasureFamily, TransportPlan, as_points, build_family


def load_schema() -> dict:
    return json.loads(resources.files("simot").joinpath("schema/problem.schema.json").read_text())


@dataclass
class Problem:
    raw: dict
    family: MeasureFamily | None = None
    target: DiscreteMeasure | None = None
    exact_target_weights: tuple = ()
    cost: np.ndarray | None = None
    plan: TransportPlan | None = None
    densities: list = field(default_factory=list)
    target_density: PiecewiseConstantDensity | None = None
    options: dict = field(default_factory=dict)


def _read_text(path) -> str:
    try:
        return Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc.strerror}") from None


def _parse(text: str, exact: bool, where) -> dict:
    try:
        doc = json.loads(text, parse_float=Fraction if exact else float)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{where}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ParseError(f"{where}: top level must be an object")
    return doc


def _density(doc) -> PiecewiseConstantDensity:
    return PiecewiseConstantDensity(np.asarray(doc["breakpoints"], float), np.asarray(doc["values"], float))


def _points(doc, dim: int | None) -> np.ndarray:
    pts = as_points(np.asarray(doc, dtype=float))
    if dim is not None and pts.shape[1] != dim:
        raise DimensionMismatch(f"expected {dim}-dimensional points, got {pts.shape[1]}")
    return pts


def load_problem(path, exact: bool = False) -> Problem:
    """Read and validate a problem file (``exact`` parses decimals as fractions)."""
    text = _read_text(path)
    doc = _parse(text, False, path)
    try:
        jsonschema.validate(doc, load_schema())
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ParseError(f"{path}: {loc}: {exc.message}") from None
    exact = exact or bool(doc.get("options", {}).get("exact", False))
    ex = _parse(text, True, path) if exact else doc
    prob = Problem(raw=doc, options=dict(doc.get("options", {})))
    dim = doc.get("dimension")
    if "support" in doc:
        support = _points(doc["support"], dim)
        dim = support.shape[1]
        prob.family = build_family(support, ex["measures"])
        kept = np.setdiff1d(np.arange(len(support)), prob.family.dropped)
    if "target" in doc:
        prob.target = DiscreteMeasure(_points(doc["target"]["points"], dim), np.asarray(doc["target"]["weights"], float))
        if exact:
            prob.exact_target_weights = tuple(Fraction(w) for w in ex["target"]["weights"])
    if "cost" in doc:
        C = np.asarray(doc["cost"], dtype=float)
        prob.cost = C[kept] if prob.family is not None and C.shape[0] == len(support) else C
    if "plan" in doc:
        prob.plan = plan_from_doc(doc["plan"], prob)
    prob.densities = [_density(d) for d in doc.get("densities", [])]
    if "target_density" in doc:
        prob.target_density = _density(doc["target_density"])
    return prob


def plan_from_doc(doc: dict, prob: Problem | None = None) -> TransportPlan:
    mat = np.asarray(doc["matrix"], dtype=float)
    if "source" in doc:
        source = as_points(np.asarray(doc["source"], dtype=float))
    elif prob is not None and prob.family is not None:
        source = prob.family.support
    else:
        raise ParseError("plan needs source points or a problem support")
    if "target" in doc:
        target = as_points(np.asarray(doc["target"], dtype=float))
    elif prob is not None and prob.target is not None:
        target = prob.target.points
    else:
        raise ParseError("plan needs target points or a problem target")
    return TransportPlan(source, target, mat)


def load_plan(path, prob: Problem | None = None) -> TransportPlan:
    """Plan from a result document (``{"plan": {...}}``) or a bare plan object."""
    doc = _parse(_read_text(path), False, path)
    return plan_from_doc(doc.get("plan", doc), prob)


# ---------------------------------------------------------------- output


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if np.isfinite(v) else None
    return obj


def dumps(doc: dict) -> str:
    return json.dumps(to_jsonable(doc), indent=2, sort_keys=True, allow_nan=False) + "\n"


def write_document(doc: dict, path=None) -> str:
    text = dumps(doc)
    if path is None:
        print(text, end="")
    else:
        Path(path).write_text(text)
    return text


def plan_doc(plan: TransportPlan) -> dict:
    return {"source": plan.source, "target": plan.target, "matrix": plan.matrix}


def measure_doc(measure: DiscreteMeasure) -> dict:
    return {"points": measure.points, "weights": measure.weights}


def map_doc(tmap: PiecewiseMap) -> dict:
    return {"lo": tmap.lo, "hi": tmap.hi, "slope": tmap.slope, "intercept": tmap.intercept}


def write_curve(path, x, y, header=("coordinate", "value")) -> None:
    """Two-column CSV plot table."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for a, b in zip(np.asarray(x, float).ravel(), np.asarray(y, float).ravel()):
            w.writerow([repr(float(a)), repr(float(b))])
