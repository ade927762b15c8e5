"""Repeated-sampling evaluation harness.

For each replication: draw a simple random sample without replacement from a
fully observed population, compute pre-missing estimates and intervals,
ampute, hand the same incomplete data to every configured engine, pool each
engine's L completed-data estimates, and record interval coverage and squared
error per estimand.  After all replications the relative MSE of an engine is
the ratio of its summed squared errors to the pre-missing estimator's, and
coverage is the fraction of covering intervals.

Replication h derives its own seed stream from (master_seed, h), so results
are byte-identical regardless of worker count or scheduling.  Engine failures
on a replication are recorded and excluded with a count, never silently
dropped.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .amputation import Anchor, MissingnessSpec, ampute
from .cart import CartEngine
from .chained import ChainedConfig, multiple_impute
from .data import (
    CategoricalDataset,
    Codebook,
    Estimand,
    Variable,
    enumerate_estimands,
    estimate_all,
    load_csv,
)
from .dpm import DpmConfig, dpm_multiple_impute
from .glm import EngineUnsupported, FitNotConverged, GlmEngine
from .pooling import pool_arrays

CONFIDENCE_LEVEL = 0.95
ENGINE_NAMES = ("glm", "cart", "dpm")


# ---------------------------------------------------------------------------
# population sources


@dataclass(frozen=True)
class CsvPopulation:
    data_path: str
    codebook_path: str


@dataclass(frozen=True)
class MixturePopulationSpec:
    """I.i.d. rows from a small latent-class mixture with fixed parameters."""

    n_rows: int
    variables: tuple[Variable, ...]
    weights: tuple[float, ...]
    class_level_probs: tuple  # [class][variable][level]

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("population needs at least one row")
        w = np.asarray(self.weights, dtype=float)
        _check_prob_vector(w, "mixture weights")
        for k, per_var in enumerate(self.class_level_probs):
            if len(per_var) != len(self.variables):
                raise ValueError("class_level_probs does not cover every variable")
            for j, probs in enumerate(per_var):
                v = self.variables[j]
                if len(probs) != len(v.levels):
                    raise ValueError(
                        f"class {k}, variable {v.name!r}: {len(probs)} probabilities "
                        f"for {len(v.levels)} levels"
                    )
                _check_prob_vector(np.asarray(probs, dtype=float),
                                   f"class {k} variable {v.name!r}")


@dataclass(frozen=True)
class TablePopulationSpec:
    """I.i.d. rows from an explicit joint probability table."""

    n_rows: int
    variables: tuple[Variable, ...]
    probs: tuple  # nested, shape = level counts in variable order

    def __post_init__(self):
        if self.n_rows < 1:
            raise ValueError("population needs at least one row")
        arr = np.asarray(self.probs, dtype=float)
        shape = tuple(len(v.levels) for v in self.variables)
        if arr.shape != shape:
            raise ValueError(f"joint table shape {arr.shape} does not match {shape}")
        _check_prob_vector(arr.ravel(), "joint table")


def _check_prob_vector(v: np.ndarray, what: str) -> None:
    if (v < 0).any() or not np.isfinite(v).all():
        raise ValueError(f"invalid probability table: {what} has bad entries")
    if abs(float(v.sum()) - 1.0) > 1e-8:
        raise ValueError(f"invalid probability table: {what} sums to {v.sum():.6g}")


def generate_population(spec, rng: np.random.Generator) -> CategoricalDataset:
    """Draw a fully observed synthetic population from its declared joint."""
    codebook = Codebook(variables=tuple(spec.variables))
    n = spec.n_rows
    if isinstance(spec, MixturePopulationSpec):
        weights = np.asarray(spec.weights, dtype=float)
        cum_w = np.cumsum(weights)
        comp = np.minimum(
            np.searchsorted(cum_w, rng.random(n) * cum_w[-1], side="right"),
            len(weights) - 1,
        )
        cells = np.empty((n, len(spec.variables)), dtype=np.int32)
        for j in range(len(spec.variables)):
            table = np.array([per_var[j] for per_var in spec.class_level_probs])
            cum = np.cumsum(table, axis=1)
            r = rng.random(n) * cum[comp, -1]
            cells[:, j] = np.minimum(
                (cum[comp] <= r[:, None]).sum(axis=1), table.shape[1] - 1
            )
        return CategoricalDataset(codebook=codebook, cells=cells)
    if isinstance(spec, TablePopulationSpec):
        flat = np.asarray(spec.probs, dtype=float).ravel()
        cum = np.cumsum(flat)
        pick = np.minimum(
            np.searchsorted(cum, rng.random(n) * cum[-1], side="right"), flat.size - 1
        )
        shape = tuple(len(v.levels) for v in spec.variables)
        cells = np.stack(np.unravel_index(pick, shape), axis=1).astype(np.int32)
        return CategoricalDataset(codebook=codebook, cells=cells)
    raise TypeError(f"unknown population spec {type(spec).__name__}")


# ---------------------------------------------------------------------------
# engine specs and the simulation config


@dataclass(frozen=True)
class GlmSpec:
    cycles: int = 10
    ordering: str = "appearance"
    ridge: float = 1e-5
    max_levels: int = 10


@dataclass(frozen=True)
class CartSpec:
    cycles: int = 10
    ordering: str = "appearance"
    min_leaf: int = 4
    cp: float = 1e-4
    exhaustive_cap: int = 12


@dataclass(frozen=True)
class DpmSpec:
    classes: int = 35
    iterations: int = 10000
    burn_in: int = 2000


_SPEC_TYPES = {"glm": GlmSpec, "cart": CartSpec, "dpm": DpmSpec}


@dataclass(frozen=True)
class SimulationConfig:
    population: object  # CsvPopulation | MixturePopulationSpec | TablePopulationSpec
    n_sample: int
    replications: int
    missingness: MissingnessSpec
    engines: dict  # name -> GlmSpec | CartSpec | DpmSpec
    n_imputations: int = 10
    max_order: int = 3
    master_seed: int = 0

    def __post_init__(self):
        if self.replications < 2:
            raise ValueError("need at least 2 replications")
        if self.n_imputations < 2:
            raise ValueError("need at least 2 imputations per engine")
        if not 1 <= self.max_order <= 3:
            raise ValueError("max_order must be 1, 2 or 3")
        if not self.engines:
            raise ValueError("configure at least one engine")
        for name, spec in self.engines.items():
            want = _SPEC_TYPES.get(name)
            if want is None:
                raise ValueError(f"unknown engine {name!r}; choose from {ENGINE_NAMES}")
            if not isinstance(spec, want):
                raise ValueError(f"engine {name!r} needs a {want.__name__}")


def _variables_from_json(items) -> tuple[Variable, ...]:
    return tuple(Variable(str(v["name"]), tuple(str(s) for s in v["levels"]))
                 for v in items)


def _missingness_from_json(obj, variables: tuple[Variable, ...]) -> MissingnessSpec:
    index_of = {v.name: i for i, v in enumerate(variables)}

    def resolve(name):
        if name not in index_of:
            raise ValueError(f"missingness references unknown variable {name!r}")
        return index_of[name]

    mechanism = obj.get("mechanism")
    exempt = frozenset(resolve(n) for n in obj.get("exempt", []))
    if mechanism == "mcar":
        return MissingnessSpec(mechanism="mcar", rate=float(obj["rate"]), exempt=exempt)
    if mechanism == "mar":
        anchors = tuple(
            Anchor(resolve(a["variable"]), tuple(float(r) for r in a["rates"]))
            for a in obj.get("anchors", [])
        )
        exempt = exempt | frozenset(a.variable for a in anchors)
        return MissingnessSpec(mechanism="mar", anchors=anchors, exempt=exempt)
    raise ValueError(f"unknown missingness mechanism {mechanism!r}")


def config_from_json(path) -> SimulationConfig:
    """Parse the simulation config document (see README for the schema)."""
    with open(path, encoding="utf-8") as fh:
        obj = json.load(fh)
    pop_obj = obj["population"]
    kind = pop_obj.get("type")
    if kind == "csv":
        population = CsvPopulation(str(pop_obj["data"]), str(pop_obj["codebook"]))
        variables = Codebook.from_json(population.codebook_path).variables
    elif kind == "mixture":
        variables = _variables_from_json(pop_obj["variables"])
        population = MixturePopulationSpec(
            n_rows=int(pop_obj["n_rows"]),
            variables=variables,
            weights=tuple(float(w) for w in pop_obj["weights"]),
            class_level_probs=tuple(
                tuple(tuple(float(x) for x in probs) for probs in per_var)
                for per_var in pop_obj["class_level_probs"]
            ),
        )
    elif kind == "table":
        variables = _variables_from_json(pop_obj["variables"])
        population = TablePopulationSpec(
            n_rows=int(pop_obj["n_rows"]),
            variables=variables,
            probs=pop_obj["probs"],
        )
    else:
        raise ValueError(f"unknown population type {kind!r}")
    engines = {}
    for name, eobj in obj.get("engines", {}).items():
        want = _SPEC_TYPES.get(name)
        if want is None:
            raise ValueError(f"unknown engine {name!r}; choose from {ENGINE_NAMES}")
        engines[name] = want(**eobj)
    return SimulationConfig(
        population=population,
        n_sample=int(obj["n_sample"]),
        replications=int(obj["replications"]),
        missingness=_missingness_from_json(obj["missingness"], variables),
        engines=engines,
        n_imputations=int(obj.get("L", 10)),
        max_order=int(obj.get("max_order", 3)),
        master_seed=int(obj.get("master_seed", 0)),
    )


# ---------------------------------------------------------------------------
# report containers


@dataclass
class EngineOutcome:
    coverage: np.ndarray | None
    rel_mse: np.ndarray | None
    n_failed: int
    n_used: int
    saturation_count: int = 0
    degenerate_count: int = 0
    boundary_count: int = 0
    failures: tuple[str, ...] = ()


@dataclass
class SimulationReport:
    variables: tuple[Variable, ...]
    n_population: int
    n_sample: int
    replications: int
    n_imputations: int
    max_order: int
    master_seed: int
    missingness: dict
    estimands: list[Estimand]
    baseline_coverage: np.ndarray
    engines: dict
    timing: dict = field(default_factory=dict)  # wall-clock; never serialized

    def to_json_dict(self) -> dict:
        names = [v.name for v in self.variables]
        levels = [list(v.levels) for v in self.variables]
        estimands = [
            {
                "kind": e.kind,
                "cells": [[names[var], levels[var][lev]] for var, lev in e.cells],
                "Q": e.population_value,
            }
            for e in self.estimands
        ]
        engines = {}
        for name, out in self.engines.items():
            engines[name] = {
                "coverage": None if out.coverage is None else out.coverage.tolist(),
                "rel_mse": None if out.rel_mse is None else out.rel_mse.tolist(),
                "n_failed": out.n_failed,
                "n_used": out.n_used,
                "saturation_count": out.saturation_count,
                "degenerate_count": out.degenerate_count,
                "boundary_count": out.boundary_count,
                "failures": list(out.failures),
            }
        return {
            "schema": "catmi-report/1",
            "variables": [{"name": n, "levels": l} for n, l in zip(names, levels)],
            "n_population": self.n_population,
            "n_sample": self.n_sample,
            "replications": self.replications,
            "L": self.n_imputations,
            "max_order": self.max_order,
            "master_seed": self.master_seed,
            "missingness": self.missingness,
            "estimands": estimands,
            "baseline_coverage": self.baseline_coverage.tolist(),
            "engines": engines,
        }

    def to_json_bytes(self) -> bytes:
        """Canonical serialization: sorted keys, no volatile timing content."""
        return (json.dumps(self.to_json_dict(), sort_keys=True,
                           separators=(",", ":")) + "\n").encode("utf-8")

    @classmethod
    def from_json_dict(cls, obj) -> "SimulationReport":
        if obj.get("schema") != "catmi-report/1":
            raise ValueError("not a simulation report document")
        variables = _variables_from_json(obj["variables"])
        index_of = {v.name: i for i, v in enumerate(variables)}
        estimands = [
            Estimand(
                kind=e["kind"],
                cells=tuple(
                    (index_of[name], variables[index_of[name]].levels.index(label))
                    for name, label in e["cells"]
                ),
                population_value=float(e["Q"]),
            )
            for e in obj["estimands"]
        ]
        engines = {}
        for name, eo in obj["engines"].items():
            engines[name] = EngineOutcome(
                coverage=None if eo["coverage"] is None else np.asarray(eo["coverage"]),
                rel_mse=None if eo["rel_mse"] is None else np.asarray(eo["rel_mse"]),
                n_failed=int(eo["n_failed"]),
                n_used=int(eo["n_used"]),
                saturation_count=int(eo.get("saturation_count", 0)),
                degenerate_count=int(eo.get("degenerate_count", 0)),
                boundary_count=int(eo.get("boundary_count", 0)),
                failures=tuple(eo.get("failures", ())),
            )
        return cls(
            variables=variables,
            n_population=int(obj["n_population"]),
            n_sample=int(obj["n_sample"]),
            replications=int(obj["replications"]),
            n_imputations=int(obj["L"]),
            max_order=int(obj["max_order"]),
            master_seed=int(obj["master_seed"]),
            missingness=dict(obj["missingness"]),
            estimands=estimands,
            baseline_coverage=np.asarray(obj["baseline_coverage"]),
            engines=engines,
        )

    @classmethod
    def from_json(cls, path) -> "SimulationReport":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json_dict(json.load(fh))


def _missingness_to_json(spec: MissingnessSpec, variables) -> dict:
    names = [v.name for v in variables]
    if spec.mechanism == "mcar":
        return {
            "mechanism": "mcar",
            "rate": spec.rate,
            "exempt": sorted(names[i] for i in spec.exempt),
        }
    return {
        "mechanism": "mar",
        "anchors": [
            {"variable": names[a.variable], "rates": list(a.level_rates)}
            for a in spec.anchors
        ],
        "exempt": sorted(names[i] for i in spec.exempt),
    }


# ---------------------------------------------------------------------------
# replication worker


_CTX = None


def _init_worker(payload) -> None:
    global _CTX
    _CTX = payload


def _impute_for_engine(name, spec, amputed, n_imputations, seed_seq, sample,
                       extra_engines):
    """Run one engine on one replication; returns (datasets, saturated)."""
    if name == "glm":
        engine = GlmEngine(ridge=spec.ridge, max_levels=spec.max_levels)
        cfg = ChainedConfig(engine=engine, cycles=spec.cycles,
                            ordering=spec.ordering, n_imputations=n_imputations)
        return multiple_impute(amputed, cfg, seed_seq), False
    if name == "cart":
        engine = CartEngine(min_leaf=spec.min_leaf, cp=spec.cp,
                            exhaustive_cap=spec.exhaustive_cap)
        cfg = ChainedConfig(engine=engine, cycles=spec.cycles,
                            ordering=spec.ordering, n_imputations=n_imputations)
        return multiple_impute(amputed, cfg, seed_seq), False
    if name == "dpm":
        cfg = DpmConfig(n_classes=spec.classes, iterations=spec.iterations,
                        burn_in=spec.burn_in, n_imputations=n_imputations)
        result = dpm_multiple_impute(amputed, cfg, np.random.default_rng(seed_seq))
        return result.datasets, result.saturated
    # test-only engines injected through run_simulation(extra_engines=...)
    fn = extra_engines[name]
    return fn(sample, amputed, n_imputations, np.random.default_rng(seed_seq)), False


def _run_replication(h: int) -> tuple[int, dict]:
    population, cfg, estimands, truth, engine_items, extra_engines = _CTX
    t0 = time.perf_counter()
    ss = np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(1, h))
    streams = ss.spawn(2 + len(engine_items))
    sample_rng = np.random.default_rng(streams[0])
    idx = sample_rng.choice(population.n, size=cfg.n_sample, replace=False)
    sample = CategoricalDataset(codebook=population.codebook,
                                cells=population.cells[idx])
    pre_q, pre_u = estimate_all(sample, estimands)
    z = stats.norm.ppf(0.5 + CONFIDENCE_LEVEL / 2.0)
    half = z * np.sqrt(pre_u)
    pre_cov = (pre_q - half <= truth) & (truth <= pre_q + half)
    amputed = ampute(sample, cfg.missingness, np.random.default_rng(streams[1]))
    out = {}
    for pos, (name, spec) in enumerate(engine_items):
        t_engine = time.perf_counter()
        try:
            datasets, saturated = _impute_for_engine(
                name, spec, amputed, cfg.n_imputations, streams[2 + pos],
                sample, extra_engines,
            )
        except (EngineUnsupported, FitNotConverged) as exc:
            out[name] = {"failed": f"{type(exc).__name__}: {exc}",
                         "seconds": time.perf_counter() - t_engine}
            continue
        q = np.empty((cfg.n_imputations, len(estimands)))
        u = np.empty_like(q)
        for l, completed in enumerate(datasets):
            q[l], u[l] = estimate_all(completed, estimands)
        pooled = pool_arrays(q, u, level=CONFIDENCE_LEVEL)
        out[name] = {
            "coverage": (pooled["ci_low"] <= truth) & (truth <= pooled["ci_high"]),
            "sq_err": (pooled["estimate"] - truth) ** 2,
            "saturated": saturated,
            "degenerate": int(pooled["degenerate_between"].sum()),
            "boundary": int(((pooled["ci_low"] < 0) | (pooled["ci_high"] > 1)).sum()),
            "seconds": time.perf_counter() - t_engine,
        }
    return h, {"pre_q": pre_q, "pre_cov": pre_cov, "engines": out,
               "seconds": time.perf_counter() - t0}


def run_simulation(cfg: SimulationConfig, jobs: int = 1,
                   extra_engines=None) -> SimulationReport:
    """Execute the full repeated-sampling study.

    ``jobs`` controls worker processes; the report is byte-identical for any
    value.  ``extra_engines`` maps names to test-only callables
    ``fn(sample, amputed, L, rng) -> list of completed datasets``; these
    require jobs == 1 unless picklable.
    """
    t_start = time.perf_counter()
    extra_engines = dict(extra_engines or {})
    population = _load_population(cfg)
    if cfg.n_sample > population.n:
        raise ValueError("n_sample exceeds the population size")
    cfg.missingness.validate_against(population)
    estimands = enumerate_estimands(population, cfg.n_sample, cfg.max_order)
    if not estimands:
        raise ValueError("no estimand passes the CLT filter for this population")
    truth = np.array([e.population_value for e in estimands])
    engine_items = list(cfg.engines.items()) + [(n, None) for n in extra_engines]
    payload = (population, cfg, estimands, truth, engine_items, extra_engines)
    replications = range(cfg.replications)
    if jobs <= 1:
        _init_worker(payload)
        results = [_run_replication(h) for h in replications]
    else:
        with ProcessPoolExecutor(max_workers=jobs, initializer=_init_worker,
                                 initargs=(payload,)) as pool:
            results = list(pool.map(_run_replication, replications))
    results.sort(key=lambda item: item[0])
    records = [rec for _, rec in results]

    n_est = len(estimands)
    baseline_cov = np.mean([r["pre_cov"] for r in records], axis=0)
    engines = {}
    engine_seconds = {}
    for name, _spec in engine_items:
        ok = [r for r in records if "coverage" in r["engines"].get(name, {})]
        failed = [r["engines"][name]["failed"] for r in records
                  if "failed" in r["engines"].get(name, {})]
        engine_seconds[name] = float(sum(
            r["engines"][name]["seconds"] for r in records if name in r["engines"]
        ))
        if not ok:
            engines[name] = EngineOutcome(
                coverage=None, rel_mse=None, n_failed=len(failed), n_used=0,
                failures=tuple(failed[:5]),
            )
            continue
        cov = np.mean([r["engines"][name]["coverage"] for r in ok], axis=0)
        num = np.zeros(n_est)
        den = np.zeros(n_est)
        for r in ok:
            num += r["engines"][name]["sq_err"]
            den += (r["pre_q"] - truth) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = num / den
        engines[name] = EngineOutcome(
            coverage=cov,
            rel_mse=rel,
            n_failed=len(failed),
            n_used=len(ok),
            saturation_count=sum(bool(r["engines"][name]["saturated"]) for r in ok),
            degenerate_count=sum(r["engines"][name]["degenerate"] for r in ok),
            boundary_count=sum(r["engines"][name]["boundary"] for r in ok),
            failures=tuple(failed[:5]),
        )
    return SimulationReport(
        variables=population.codebook.variables,
        n_population=population.n,
        n_sample=cfg.n_sample,
        replications=cfg.replications,
        n_imputations=cfg.n_imputations,
        max_order=cfg.max_order,
        master_seed=cfg.master_seed,
        missingness=_missingness_to_json(cfg.missingness,
                                         population.codebook.variables),
        estimands=estimands,
        baseline_coverage=baseline_cov,
        engines=engines,
        timing={
            "total_seconds": time.perf_counter() - t_start,
            "replication_seconds": [r["seconds"] for r in records],
            "engine_seconds": engine_seconds,
        },
    )


def _load_population(cfg: SimulationConfig) -> CategoricalDataset:
    if isinstance(cfg.population, CsvPopulation):
        codebook = Codebook.from_json(cfg.population.codebook_path)
        population = load_csv(cfg.population.data_path, codebook)
        if not population.fully_observed:
            raise ValueError("population file contains missing cells")
        return population
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.master_seed, spawn_key=(0,))
    )
    return generate_population(cfg.population, rng)


# ---------------------------------------------------------------------------
# summaries shaped like the study's quantile tables


_ORDER_NAMES = ("marginal", "bivariate", "trivariate")
_STATS = (("min", 0.0), ("q1", 0.25), ("median", 0.5), ("q3", 0.75), ("max", 1.0))


def summarize(report: SimulationReport) -> dict:
    """Five-number Rel.MSE summaries and median coverage per engine and order."""
    kinds = np.array([e.kind for e in report.estimands])
    orders = [k for k in _ORDER_NAMES if (kinds == k).any()]
    engines = list(report.engines)
    rel = {}
    coverage = {}
    for order in orders:
        sel = kinds == order
        rel[order] = {}
        coverage[order] = {
            "pre_missing": float(np.median(report.baseline_coverage[sel]))
        }
        for name in engines:
            out = report.engines[name]
            if out.rel_mse is None:
                rel[order][name] = None
                coverage[order][name] = None
                continue
            values = out.rel_mse[sel]
            rel[order][name] = {
                stat: float(np.quantile(values, q)) for stat, q in _STATS
            }
            coverage[order][name] = float(np.median(out.coverage[sel]))
    overall = {}
    for name in engines:
        out = report.engines[name]
        overall[name] = {
            "median_rel_mse": (None if out.rel_mse is None
                               else float(np.median(out.rel_mse))),
            "median_coverage": (None if out.coverage is None
                                else float(np.median(out.coverage))),
        }
    return {"orders": orders, "engines": engines, "rel_mse": rel,
            "coverage": coverage, "overall": overall}


_STAT_LABELS = {"min": "Min.", "q1": "1st Qu.", "median": "Median",
                "q3": "3rd Qu.", "max": "Max."}


def render_text(summary: dict) -> str:
    """Quantile tables with engines under each estimand order."""
    orders = summary["orders"]
    engines = [e for e in summary["engines"]
               if any(summary["rel_mse"][o][e] is not None for o in orders)]
    col = 9
    group = max(col * len(engines), 12)
    lines = ["Relative MSE of pooled point estimates", ""]
    head1 = f"{'':10}" + "".join(f"{o.capitalize():<{group + 2}}" for o in orders)
    head2 = f"{'':10}" + "".join(
        "".join(f"{e.upper():>{col}}" for e in engines) + "  " for o in orders
    )
    lines += [head1.rstrip(), head2.rstrip()]
    for stat, _q in _STATS:
        row = f"{_STAT_LABELS[stat]:10}"
        for o in orders:
            for e in engines:
                cell = summary["rel_mse"][o][e]
                row += f"{cell[stat]:>{col}.2f}" if cell else f"{'--':>{col}}"
            row += "  "
        lines.append(row.rstrip())
    lines += ["", "Median 95% interval coverage", ""]
    lines.append(f"{'':12}" + "".join(f"{o.capitalize():>12}" for o in orders))
    row = f"{'pre-missing':12}"
    for o in orders:
        row += f"{summary['coverage'][o]['pre_missing']:>12.3f}"
    lines.append(row)
    for e in engines:
        row = f"{e.upper():12}"
        for o in orders:
            value = summary["coverage"][o][e]
            row += f"{value:>12.3f}" if value is not None else f"{'--':>12}"
        lines.append(row)
    return "\n".join(lines) + "\n"


def render_csv(summary: dict) -> str:
    """One row per (order, statistic, engine)."""
    lines = ["order,statistic,engine,value"]
    for o in summary["orders"]:
        for stat, _q in _STATS:
            for e in summary["engines"]:
                cell = summary["rel_mse"][o][e]
                value = "" if cell is None else repr(cell[stat])
                lines.append(f"{o},rel_mse_{stat},{e},{value}")
        lines.append(
            f"{o},median_coverage,pre_missing,"
            f"{summary['coverage'][o]['pre_missing']!r}"
        )
        for e in summary["engines"]:
            value = summary["coverage"][o][e]
            lines.append(
                f"{o},median_coverage,{e},{'' if value is None else repr(value)}"
            )
    return "\n".join(lines) + "\n"
