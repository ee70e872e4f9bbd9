"""
JSON dataset, parameter and report documents.

A dataset is ``{"structure", "roles", "replicates", "meta"}``; a replicate is
either a list of matrices or ``{"v": scalar, "blocks": [...]}`` when the
scalar of a joint form is carried along. Matrices are nested row lists.
Shapes are validated on load; positive definiteness is left to the
evaluators so that the failing replicate can be reported.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from multimatrix import __version__
from multimatrix.errors import DatasetError, DomainError
from multimatrix.kernels import KernelSpec
from multimatrix.matcore import BlockStructure
from multimatrix.models import DerivedSample, LocationScale, Role, SampleSet, ShapeParams, parse_roles

logger = logging.getLogger(__name__)

DATASET_KEYS = {"structure", "roles", "replicates", "meta"}
PARAMS_KEYS = {"a0", "a", "kernel", "location_scale"}
REPORT_KEYS = ("command", "inputs", "results", "checks", "seed", "version")

# One replicate of 56 dependent 3 x 3 F matrices (block rows 4, 21 x 56), seed 20240101.
PACKAGED_TRAJECTORY = Path(__file__).resolve().parent.parent / "data" / "docking_like_trajectory.json"


@dataclass(frozen=True)
class Dataset:
    structure: BlockStructure
    roles: tuple[Role, ...]
    replicates: tuple[DerivedSample, ...]
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "structure": self.structure.to_dict(),
            "roles": [r.value for r in self.roles],
            "replicates": [_replicate_to_json(s) for s in self.replicates],
            "meta": self.meta,
        }


@dataclass(frozen=True)
class ParamsFile:
    a0: Optional[float] = None
    a: Optional[Union[float, tuple[float, ...]]] = None
    kernel: Optional[dict] = None
    location_scale: Optional[dict] = None

    def shape_params(self, structure: BlockStructure) -> Optional[ShapeParams]:
        """None (integer shapes from the structure) when neither a0 nor a is given"""
        if self.a0 is None and self.a is None:
            return None
        if self.a0 is None or self.a is None:
            raise DatasetError("params need both a0 and a, or neither")
        if isinstance(self.a, tuple):
            return ShapeParams(self.a0, self.a, structure.cols)
        return ShapeParams.common(self.a0, self.a, structure.k, structure.cols)

    def kernel_spec(self, structure: BlockStructure) -> Optional[KernelSpec]:
        if self.kernel is None:
            return None
        return KernelSpec.from_json(self.kernel, structure.dim)

    def location(self) -> Optional[LocationScale]:
        return LocationScale.from_dict(self.location_scale) if self.location_scale else None


def _replicate_to_json(sample: DerivedSample):
    blocks = [b.tolist() for b in sample.arrays()]
    if sample.v is None:
        return blocks
    return {"v": sample.v, "blocks": blocks}


def read_json(path) -> object:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise DatasetError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from exc


def _matrix(value, where: str) -> np.ndarray:
    try:
        arr = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise DatasetError(f"{where}: not a numeric matrix") from exc
    if arr.ndim != 2 or arr.size == 0:
        raise DatasetError(f"{where}: expected a non-empty matrix of row arrays")
    if not np.all(np.isfinite(arr)):
        raise DatasetError(f"{where}: entries must be finite")
    return arr


def expected_shape(role: Role, rows: int, cols: int) -> tuple[int, int]:
    if role is Role.V:
        return (1, 1)
    if role.is_gram:
        return (cols, cols)
    return (rows, cols)


def parse_dataset(doc) -> Dataset:
    """Strictly validate a dataset document"""
    if not isinstance(doc, dict):
        raise DatasetError("dataset must be a JSON object")
    unknown = set(doc) - DATASET_KEYS
    if unknown:
        raise DatasetError(f"unknown dataset keys: {sorted(unknown)}")
    missing = {"structure", "roles", "replicates"} - set(doc)
    if missing:
        raise DatasetError(f"dataset is missing keys: {sorted(missing)}")

    try:
        structure = BlockStructure.from_dict(doc["structure"])
        roles = parse_roles(doc["roles"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"invalid structure or roles: {exc}") from exc

    if len(roles) == structure.k + 1:
        rows = structure.block_rows
    elif len(roles) == structure.k:
        rows = structure.block_rows[1:]
    else:
        raise DatasetError(f"{len(roles)} roles do not fit k={structure.k} blocks")

    replicates = doc["replicates"]
    if not isinstance(replicates, list) or not replicates:
        raise DatasetError("replicates must be a non-empty list")

    parsed = []
    for index, rep in enumerate(replicates):
        v = None
        if isinstance(rep, dict):
            extra = set(rep) - {"v", "blocks"}
            if extra or "blocks" not in rep:
                raise DatasetError(f"replicate {index}: expected keys v and blocks")
            v = rep.get("v")
            if v is not None and not (isinstance(v, (int, float)) and math.isfinite(v)):
                raise DatasetError(f"replicate {index}: v must be a finite number")
            rep = rep["blocks"]
        if not isinstance(rep, list) or len(rep) != len(roles):
            raise DatasetError(f"replicate {index}: expected {len(roles)} matrices")
        blocks = []
        for j, (value, role, n) in enumerate(zip(rep, roles, rows)):
            arr = _matrix(value, f"replicate {index}, block {j}")
            shape = expected_shape(role, n, structure.cols)
            if arr.shape != shape:
                raise DatasetError(f"replicate {index}, block {j}: shape {arr.shape}, expected {shape}")
            blocks.append(arr)
        parsed.append(DerivedSample(None if v is None else float(v), roles, tuple(blocks)))

    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise DatasetError("meta must be an object")
    return Dataset(structure, roles, tuple(parsed), meta)


def load_dataset(path) -> Dataset:
    dataset = parse_dataset(read_json(path))
    logger.info(f"Loaded {len(dataset.replicates)} replicates from {path}")
    return dataset


def load_packaged_trajectory() -> Dataset:
    return load_dataset(PACKAGED_TRAJECTORY)


def load_csv_manifest(path) -> Dataset:
    """Dataset whose matrices are CSV file paths, relative to the manifest"""
    doc = read_json(path)
    if not isinstance(doc, dict) or not isinstance(doc.get("replicates"), list):
        raise DatasetError("manifest must be an object with a replicates list")
    base = Path(path).parent

    def load(name) -> list:
        if not isinstance(name, str):
            raise DatasetError(f"manifest entries must be CSV paths, got {name!r}")
        try:
            return np.loadtxt(base / name, delimiter=",", ndmin=2).tolist()
        except (OSError, ValueError) as exc:
            raise DatasetError(f"cannot read matrix from {name}: {exc}") from exc

    replicates = []
    for rep in doc["replicates"]:
        if isinstance(rep, dict):
            replicates.append({**rep, "blocks": [load(p) for p in rep.get("blocks", [])]})
        elif isinstance(rep, list):
            replicates.append([load(p) for p in rep])
        else:
            raise DatasetError("each manifest replicate must list CSV paths")
    return parse_dataset({**doc, "replicates": replicates})


def _number(value, name: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise DatasetError(f"{name} must be a number, got {value!r}")
    return float(value)


def load_params(path) -> ParamsFile:
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise DatasetError("params must be a JSON object")
    unknown = set(doc) - PARAMS_KEYS
    if unknown:
        raise DatasetError(f"unknown params keys: {sorted(unknown)}")
    a = doc.get("a")
    if isinstance(a, list):
        a = tuple(_number(x, f"a[{i}]") for i, x in enumerate(a))
    elif a is not None:
        a = _number(a, "a")
    a0 = doc.get("a0")
    for key in ("kernel", "location_scale"):
        if doc.get(key) is not None and not isinstance(doc[key], dict):
            raise DatasetError(f"{key} must be a JSON object")
    return ParamsFile(
        a0=None if a0 is None else _number(a0, "a0"),
        a=a,
        kernel=doc.get("kernel"),
        location_scale=doc.get("location_scale"),
    )


def dataset_from_samples(samples: SampleSet, meta: Optional[dict] = None) -> dict:
    info = {
        "family": samples.family,
        "kernel": samples.kernel.to_json(),
        "count": len(samples.draws),
        "seed": samples.seed,
    }
    info.update(meta or {})
    return Dataset(samples.structure, samples.roles, samples.draws, info).to_dict()


def gram_replicates(dataset: Dataset) -> list[list[np.ndarray]]:
    """The F blocks of every replicate, for fitting"""
    if any(r is not Role.F for r in dataset.roles):
        raise DatasetError("fitting needs a dataset whose roles are all F")
    return [s.arrays() for s in dataset.replicates]


def build_report(
    command: str,
    inputs: dict,
    results: dict,
    checks: Optional[list] = None,
    seed: Optional[int] = None,
) -> dict:
    return {
        "command": command,
        "inputs": inputs,
        "results": results,
        "checks": [c.to_dict() for c in checks or []],
        "seed": seed,
        "version": __version__,
    }


def error_payload(command: str, exc: Exception, code: int) -> dict:
    return {"command": command, "error": str(exc), "kind": type(exc).__name__, "exit_code": code}


def dumps(doc) -> str:
    """Deterministic JSON text; floats use the shortest repr that round-trips"""
    try:
        return json.dumps(doc, indent=2, allow_nan=False) + "\n"
    except ValueError as exc:
        raise DomainError(f"result is not finite: {exc}") from exc


def write_document(doc, out: Optional[str]) -> str:
    text = dumps(doc)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return text
