"""Categorical dataset container: codebook, CSV round-trip, estimands.

Level codes are stored 0-based in numpy arrays; everything serialized (CSV
cells, codebook JSON, report JSON) speaks level labels, never raw codes.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field

import numpy as np


class CodebookError(ValueError):
    """A codebook, dataset or file violates the declared structure."""


@dataclass(frozen=True)
class Variable:
    name: str
    levels: tuple[str, ...]


@dataclass(frozen=True)
class Codebook:
    """Variable names and their level labels; ``na_token`` marks missing cells."""

    variables: tuple[Variable, ...]
    na_token: str = "NA"

    def __post_init__(self):
        object.__setattr__(
            self, "variables",
            tuple(Variable(v.name, tuple(v.levels)) for v in self.variables),
        )
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise CodebookError("variable names must be unique")
        for v in self.variables:
            if len(v.levels) < 2:
                raise CodebookError(f"variable {v.name!r} needs at least 2 levels")
            if len(set(v.levels)) != len(v.levels):
                raise CodebookError(f"variable {v.name!r} has duplicate level labels")
            if self.na_token in v.levels:
                raise CodebookError(
                    f"na_token {self.na_token!r} collides with a level of {v.name!r}"
                )

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def n_levels(self) -> np.ndarray:
        return np.array([len(v.levels) for v in self.variables], dtype=np.int64)

    def level_code(self, var: int, label: str) -> int:
        return self.variables[var].levels.index(label)

    @classmethod
    def from_mapping(cls, obj) -> "Codebook":
        try:
            variables = tuple(
                Variable(str(v["name"]), tuple(str(s) for s in v["levels"]))
                for v in obj["variables"]
            )
            na_token = str(obj.get("na_token", "NA"))
        except (KeyError, TypeError) as exc:
            raise CodebookError(f"malformed codebook document: {exc}") from exc
        return cls(variables=variables, na_token=na_token)

    @classmethod
    def from_json(cls, path) -> "Codebook":
        with open(path, encoding="utf-8") as fh:
            return cls.from_mapping(json.load(fh))

    def to_mapping(self) -> dict:
        return {
            "na_token": self.na_token,
            "variables": [
                {"name": v.name, "levels": list(v.levels)} for v in self.variables
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_mapping(), fh, indent=2)
            fh.write("\n")


@dataclass(frozen=True, eq=False)
class CategoricalDataset:
    """An n x p matrix of 0-based level codes plus a missingness mask.

    ``missing[i, j]`` True means cell (i, j) is unobserved; the code stored
    under a missing cell is a placeholder and not part of the dataset's value.
    Arrays are frozen after construction, so datasets can be shared across
    concurrent replications.
    """

    codebook: Codebook
    cells: np.ndarray
    missing: np.ndarray = field(default=None)

    def __post_init__(self):
        cells = np.ascontiguousarray(self.cells, dtype=np.int32)
        if cells.ndim != 2:
            raise CodebookError("cells must be a 2-d array")
        n, p = cells.shape
        if n < 1:
            raise CodebookError("dataset needs at least one row")
        if p != len(self.codebook.variables):
            raise CodebookError(
                f"cells have {p} columns but codebook declares "
                f"{len(self.codebook.variables)} variables"
            )
        if self.missing is None:
            missing = np.zeros((n, p), dtype=bool)
        else:
            missing = np.ascontiguousarray(self.missing, dtype=bool)
        if missing.shape != cells.shape:
            raise CodebookError("cells and missing mask shapes disagree")
        d = self.codebook.n_levels
        observed = ~missing
        for j in range(p):
            col = cells[observed[:, j], j]
            if col.size and (col.min() < 0 or col.max() >= d[j]):
                raise CodebookError(
                    f"observed cell out of range for variable "
                    f"{self.codebook.names[j]!r}"
                )
        cells.setflags(write=False)
        missing.setflags(write=False)
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "missing", missing)

    @property
    def n(self) -> int:
        return self.cells.shape[0]

    @property
    def p(self) -> int:
        return self.cells.shape[1]

    @property
    def fully_observed(self) -> bool:
        return not self.missing.any()

    def replace(self, cells=None, missing=None) -> "CategoricalDataset":
        return CategoricalDataset(
            codebook=self.codebook,
            cells=self.cells if cells is None else cells,
            missing=self.missing if missing is None else missing,
        )

    def __eq__(self, other) -> bool:
        # value = observed cells + mask; placeholder codes under missing
        # cells are ignored
        if not isinstance(other, CategoricalDataset):
            return NotImplemented
        if self.codebook != other.codebook:
            return False
        if not np.array_equal(self.missing, other.missing):
            return False
        observed = ~self.missing
        return bool(np.array_equal(self.cells[observed], other.cells[observed]))


def load_csv(path, codebook: Codebook) -> CategoricalDataset:
    """Read a comma-delimited file with a header row into a dataset.

    Every field equal to the codebook's na_token becomes a missing cell; any
    other field must match a declared level label of its column.
    """
    names = codebook.names
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise CodebookError(f"{path}: empty file") from None
        for name in header:
            if name not in names:
                raise CodebookError(f"{path}: unknown variable name {name!r} in header")
        if set(header) != set(names) or len(header) != len(names):
            raise CodebookError(
                f"{path}: header does not cover the codebook variables exactly"
            )
        col_of = [header.index(name) for name in names]
        lookup = [
            {label: code for code, label in enumerate(v.levels)}
            for v in codebook.variables
        ]
        rows = []
        mask_rows = []
        for lineno, fields in enumerate(reader, start=2):
            if len(fields) != len(header):
                raise CodebookError(
                    f"{path}: row {lineno} has {len(fields)} fields, "
                    f"expected {len(header)}"
                )
            row = np.zeros(len(names), dtype=np.int32)
            mrow = np.zeros(len(names), dtype=bool)
            for j, name in enumerate(names):
                value = fields[col_of[j]]
                if value == codebook.na_token:
                    mrow[j] = True
                    continue
                code = lookup[j].get(value)
                if code is None:
                    raise CodebookError(
                        f"{path}: row {lineno}, variable {name!r}: "
                        f"unknown level label {value!r}"
                    )
                row[j] = code
            rows.append(row)
            mask_rows.append(mrow)
    if not rows:
        raise CodebookError(f"{path}: no data rows")
    return CategoricalDataset(
        codebook=codebook, cells=np.stack(rows), missing=np.stack(mask_rows)
    )


def write_csv(data: CategoricalDataset, path) -> None:
    """Serialize a dataset; missing cells become the codebook's na_token."""
    cb = data.codebook
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cb.names)
        for i in range(data.n):
            writer.writerow(
                cb.na_token if data.missing[i, j] else cb.variables[j].levels[data.cells[i, j]]
                for j in range(data.p)
            )


_KIND_BY_ORDER = {1: "marginal", 2: "bivariate", 3: "trivariate"}


@dataclass(frozen=True)
class Estimand:
    """A marginal, bivariate or trivariate cell probability of the population."""

    kind: str
    cells: tuple[tuple[int, int], ...]  # (variable index, 0-based level code)
    population_value: float

    def __post_init__(self):
        order = len(self.cells)
        if _KIND_BY_ORDER.get(order) != self.kind:
            raise ValueError(f"kind {self.kind!r} does not match {order} cells")
        variables = [v for v, _ in self.cells]
        if len(set(variables)) != len(variables):
            raise ValueError("estimand variables must be distinct")


def enumerate_estimands(population: CategoricalDataset, n_sample: int,
                        max_order: int = 3) -> list[Estimand]:
    """All cell probabilities up to ``max_order`` that pass the CLT filter.

    An estimand with population proportion p is kept only when
    n_sample * p > 10 and n_sample * (1 - p) > 10, with n_sample the intended
    per-replication sample size.
    """
    if not population.fully_observed:
        raise ValueError("population must be fully observed")
    if not 1 <= max_order <= 3:
        raise ValueError("max_order must be 1, 2 or 3")
    n = population.n
    d = population.codebook.n_levels
    cells64 = population.cells.astype(np.int64)
    out: list[Estimand] = []
    for order in range(1, max_order + 1):
        kind = _KIND_BY_ORDER[order]
        for combo in itertools.combinations(range(population.p), order):
            radix = np.ones(order, dtype=np.int64)
            for a in range(order - 2, -1, -1):
                radix[a] = radix[a + 1] * d[combo[a + 1]]
            joint = cells64[:, combo] @ radix
            size = int(radix[0] * d[combo[0]])
            counts = np.bincount(joint, minlength=size)
            for flat, count in enumerate(counts):
                q = count / n
                if n_sample * q > 10 and n_sample * (1 - q) > 10:
                    levels = []
                    rem = flat
                    for a in range(order):
                        levels.append(rem // radix[a])
                        rem -= levels[-1] * radix[a]
                    out.append(Estimand(
                        kind=kind,
                        cells=tuple(
                            (int(v), int(lev)) for v, lev in zip(combo, levels)
                        ),
                        population_value=q,
                    ))
    return out


def estimate(completed: CategoricalDataset, e: Estimand) -> tuple[float, float]:
    """Completed-data point estimate and its variance for one estimand.

    q is the sample proportion of rows matching every (variable, level) pair;
    u is the standard proportion variance q(1-q)/n.
    """
    if not completed.fully_observed:
        raise ValueError("estimate requires a completed dataset")
    match = np.ones(completed.n, dtype=bool)
    for var, lev in e.cells:
        match &= completed.cells[:, var] == lev
    q = float(match.mean())
    return q, q * (1.0 - q) / completed.n


def estimate_all(completed: CategoricalDataset,
                 estimands: list[Estimand]) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized ``estimate`` over many estimands (the simulator hot path)."""
    if not completed.fully_observed:
        raise ValueError("estimate_all requires a completed dataset")
    n = completed.n
    d = completed.codebook.n_levels
    cells64 = completed.cells.astype(np.int64)
    by_combo: dict[tuple[int, ...], list[tuple[int, int]]] = {}
    for idx, e in enumerate(estimands):
        combo = tuple(v for v, _ in e.cells)
        radix = 1
        flat = 0
        for v, lev in reversed(e.cells):
            flat += lev * radix
            radix *= d[v]
        by_combo.setdefault(combo, []).append((idx, flat))
    q = np.empty(len(estimands))
    for combo, members in by_combo.items():
        radix = np.ones(len(combo), dtype=np.int64)
        for a in range(len(combo) - 2, -1, -1):
            radix[a] = radix[a + 1] * d[combo[a + 1]]
        joint = cells64[:, combo] @ radix
        counts = np.bincount(joint, minlength=int(radix[0] * d[combo[0]]))
        for idx, flat in members:
            q[idx] = counts[flat] / n
    return q, q * (1.0 - q) / n
