"""Genetic search over feature subsets, model kinds and hyperparameters.

A pipeline genome is a feature mask over a candidate pool, a model kind and
a bounded per-kind hyperparameter record.  Fitness is validation accuracy
minus small penalties for the analytic op-count latency estimate and the
model footprint (wall-clock profiling is deliberately kept out of the search
loop for determinism).  The search is a plain generational GA: tournament
selection, uniform crossover, bounded mutation, elitism.  Candidate feature
matrices are extracted once up front; individuals only mask columns.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import GROUND_TRUTH_CLASSES
from .errors import PipelineError
from .features import FeatureEntry, FeatureSet, apply_scaler, fit_scaler, full_feature_pool
from .models.bonsai import BonsaiConfig, bonsai_train
from .models.forest import RfConfig, rf_train
from .models.nn import NnConfig, nn_train
from .models.pme import PmeConfig, pme_train
from .seeds import derive_seed

MIN_FEATURES = 3
OP_NORM = 20_000.0  # op-count that saturates the latency penalty
MEM_NORM = 65_536.0  # flash+ram bytes that saturate the memory penalty
LAMBDA_LATENCY = 0.05
LAMBDA_MEMORY = 0.05

# Search budget overrides: epoch-hungry models get a short leash inside the
# GA loop; the winning pipeline is retrained at full budget afterwards.
SEARCH_BONSAI_EPOCHS = 100
SEARCH_NN_EPOCHS = 10

MODEL_CHOICES = ("pme", "rf", "bonsai", "nn")

# (low, high, is_integer) per tunable hyperparameter.
HYPER_BOUNDS: dict[str, dict[str, tuple[float, float, bool]]] = {
    "pme": {"aif_min": (5, 50, True), "aif_max": (100, 800, True), "max_neurons": (32, 256, True)},
    "rf": {"n_trees": (10, 60, True), "max_depth": (3, 10, True)},
    "bonsai": {"proj_dim": (4, 16, True), "depth": (2, 4, True), "sigma": (0.1, 1.0, False)},
    "nn": {"lr": (3e-4, 5e-3, False), "dropout": (0.0, 0.3, False)},
}

DEFAULT_HYPER: dict[str, dict[str, float]] = {
    "pme": {"aif_min": 25, "aif_max": 400, "max_neurons": 128},
    "rf": {"n_trees": 40, "max_depth": 7},
    "bonsai": {"proj_dim": 13, "depth": 4, "sigma": 0.3},
    "nn": {"lr": 0.0015, "dropout": 0.1},
}


@dataclass(frozen=True)
class CandidatePool:
    """Named candidate feature columns; real features carry their
    (feature, axis) entry, planted test columns carry None."""

    names: tuple[str, ...]
    entries: tuple[FeatureEntry | None, ...]

    def __post_init__(self):
        if len(self.names) != len(self.entries):
            raise ValueError("names and entries must align")
        if len(set(self.names)) != len(self.names):
            raise ValueError("pool names must be unique")

    def __len__(self) -> int:
        return len(self.names)

    @classmethod
    def from_feature_set(cls, fs: FeatureSet) -> "CandidatePool":
        return cls(tuple(fs.names), tuple(fs.entries))

    @classmethod
    def default(cls) -> "CandidatePool":
        return cls.from_feature_set(full_feature_pool())

    def feature_set(self, mask: np.ndarray) -> FeatureSet:
        """Concrete FeatureSet for a mask; fails on planted columns."""
        picked = [self.entries[i] for i in np.nonzero(mask)[0]]
        if any(e is None for e in picked):
            raise PipelineError("mask selects a synthetic pool column with no feature entry")
        return FeatureSet(tuple(picked))


@dataclass
class Pipeline:
    """One GA genome."""

    mask: np.ndarray  # bool over the pool
    kind: str
    hyper: dict[str, float]

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.sum() < MIN_FEATURES:
            raise ValueError(f"pipelines need >= {MIN_FEATURES} features")
        if self.kind not in HYPER_BOUNDS:
            raise ValueError(f"unknown model kind {self.kind!r}")
        for name, value in self.hyper.items():
            lo, hi, _ = HYPER_BOUNDS[self.kind][name]
            if not lo <= value <= hi:
                raise ValueError(f"{self.kind}.{name}={value} outside [{lo},{hi}]")

    def to_jsonable(self, pool: CandidatePool) -> dict:
        return {
            "features": [pool.names[i] for i in np.nonzero(self.mask)[0]],
            "kind": self.kind,
            "hyper": {k: self.hyper[k] for k in sorted(self.hyper)},
        }


@dataclass(frozen=True)
class FitnessScore:
    accuracy: float
    latency_cost: float
    memory_cost: float
    scalar: float
    note: str = ""


@dataclass(frozen=True)
class SearchConfig:
    population: int = 24
    generations: int = 12
    tournament_k: int = 3
    crossover_rate: float = 0.7
    mutation_rate: float = 0.15
    elitism: int = 2
    rng_seed: int = 0

    def __post_init__(self):
        if self.population < 4:
            raise ValueError("population must be >= 4")
        for r in (self.crossover_rate, self.mutation_rate):
            if not 0 <= r <= 1:
                raise ValueError("rates must be in [0, 1]")
        if not 0 <= self.elitism < self.population:
            raise ValueError("elitism must be < population")


def scalarize(accuracy: float, latency_cost: float, memory_cost: float) -> float:
    return accuracy - LAMBDA_LATENCY * latency_cost - LAMBDA_MEMORY * memory_cost


def _train_for(pipeline: Pipeline, X: np.ndarray, y: np.ndarray, seed: int):
    h = pipeline.hyper
    if pipeline.kind == "pme":
        cfg = PmeConfig(
            aif_min=int(h["aif_min"]), aif_max=int(max(h["aif_max"], h["aif_min"] + 1)),
            max_neurons=int(h["max_neurons"]), seed=seed,
        )
        return pme_train(X, y, cfg)
    if pipeline.kind == "rf":
        cfg = RfConfig(n_trees=int(h["n_trees"]), max_depth=int(h["max_depth"]), seed=seed)
        return rf_train(X, y, cfg)
    if pipeline.kind == "bonsai":
        cfg = BonsaiConfig(
            proj_dim=min(int(h["proj_dim"]), X.shape[1]), depth=int(h["depth"]),
            sigma=float(h["sigma"]), epochs=SEARCH_BONSAI_EPOCHS, seed=seed,
        )
        return bonsai_train(X, y, cfg)
    if pipeline.kind == "nn":
        cfg = NnConfig(lr=float(h["lr"]), dropout=float(h["dropout"]),
                       epochs=SEARCH_NN_EPOCHS, seed=seed)
        return nn_train(X, y, cfg)
    raise ValueError(pipeline.kind)


def fitness(
    pipeline: Pipeline,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    seed: int = 0,
) -> FitnessScore:
    """Train the genome on its masked columns and score it.  Training
    failures yield a zero scalar with a note instead of aborting the search."""
    cols = np.nonzero(pipeline.mask)[0]
    try:
        scaler = fit_scaler(X_train[:, cols])
        Xt = apply_scaler(scaler, X_train[:, cols])
        Xv = apply_scaler(scaler, X_val[:, cols])
        model = _train_for(pipeline, Xt, y_train, seed)
        preds = model.predict_batch(Xv)
        correct = sum(
            1 for p, t in zip(preds, y_val) if p.label is GROUND_TRUTH_CLASSES[int(t)]
        )
        accuracy = correct / len(y_val)
        fp = model.footprint()
        latency_cost = min(1.0, model.op_count() / OP_NORM)
        memory_cost = min(1.0, (fp.flash_bytes + fp.ram_bytes) / MEM_NORM)
        return FitnessScore(
            accuracy, latency_cost, memory_cost, scalarize(accuracy, latency_cost, memory_cost)
        )
    except PipelineError as exc:
        return FitnessScore(0.0, 0.0, 0.0, 0.0, note=f"{type(exc).__name__}: {exc}")
    except (ValueError, FloatingPointError) as exc:
        return FitnessScore(0.0, 0.0, 0.0, 0.0, note=f"{type(exc).__name__}: {exc}")


def _repair_mask(mask: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    mask = mask.copy()
    while mask.sum() < MIN_FEATURES:
        off = np.nonzero(~mask)[0]
        mask[off[int(rng.integers(0, off.size))]] = True
    return mask


def _random_hyper(kind: str, rng: np.random.Generator) -> dict[str, float]:
    hyper = {}
    for name, (lo, hi, is_int) in HYPER_BOUNDS[kind].items():
        v = rng.uniform(lo, hi)
        hyper[name] = float(int(round(v))) if is_int else float(v)
    if kind == "pme" and hyper["aif_min"] > hyper["aif_max"]:
        hyper["aif_min"], hyper["aif_max"] = 25.0, 400.0
    return hyper


def _random_pipeline(pool_size: int, rng: np.random.Generator) -> Pipeline:
    mask = _repair_mask(rng.random(pool_size) < 0.4, rng)
    kind = MODEL_CHOICES[int(rng.integers(0, len(MODEL_CHOICES)))]
    return Pipeline(mask, kind, _random_hyper(kind, rng))


def _mutate(p: Pipeline, rng: np.random.Generator) -> Pipeline:
    mask = p.mask.copy()
    kind = p.kind
    hyper = dict(p.hyper)
    choice = rng.random()
    if choice < 0.2:  # switch model kind, fresh hyperparameters
        others = [k for k in MODEL_CHOICES if k != kind]
        kind = others[int(rng.integers(0, len(others)))]
        hyper = _random_hyper(kind, rng)
    elif choice < 0.6:  # flip a few mask bits
        flips = rng.random(mask.size) < max(2.0 / mask.size, 0.05)
        mask = np.logical_xor(mask, flips)
    else:  # perturb one hyperparameter within bounds
        name = sorted(hyper)[int(rng.integers(0, len(hyper)))]
        lo, hi, is_int = HYPER_BOUNDS[kind][name]
        span = hi - lo
        v = float(np.clip(hyper[name] + rng.normal(0.0, 0.15 * span), lo, hi))
        hyper[name] = float(int(round(v))) if is_int else v
    if kind == "pme" and hyper["aif_min"] > hyper["aif_max"]:
        hyper["aif_min"], hyper["aif_max"] = hyper["aif_max"], hyper["aif_min"]
    return Pipeline(_repair_mask(mask, rng), kind, hyper)


def _crossover(a: Pipeline, b: Pipeline, rng: np.random.Generator) -> Pipeline:
    pick = rng.random(a.mask.size) < 0.5
    mask = np.where(pick, a.mask, b.mask)
    if a.kind == b.kind:
        hyper = {
            k: (a.hyper[k] if rng.random() < 0.5 else b.hyper[k]) for k in sorted(a.hyper)
        }
        kind = a.kind
    else:
        kind, hyper = a.kind, dict(a.hyper)
    return Pipeline(_repair_mask(mask, rng), kind, hyper)


def _tournament(scored, k, rng):
    picks = rng.integers(0, len(scored), size=k)
    best = max(picks, key=lambda i: scored[i][1].scalar)
    return scored[best][0]


@dataclass
class EvolveResult:
    ranked: list[tuple[Pipeline, FitnessScore]]
    log: list[dict] = field(default_factory=list)

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def evolve(
    cfg: SearchConfig,
    pool: CandidatePool,
    X_train: np.ndarray,
    y_train: np.ndarray,
    X_val: np.ndarray,
    y_val: np.ndarray,
    max_workers: int = 1,
) -> EvolveResult:
    """Run the GA; returns the final population ranked by scalar descending
    plus the per-individual generation log.  Pure function of (data, cfg):
    per-individual sub-seeds are derived from (generation, index), so results
    do not depend on worker scheduling."""
    root = cfg.rng_seed
    rng = np.random.default_rng(derive_seed(root, "ga"))
    population = [_random_pipeline(len(pool), rng) for _ in range(cfg.population)]
    scores: list[FitnessScore | None] = [None] * cfg.population
    seeds: list[int | None] = [None] * cfg.population  # carried by elites
    log: list[dict] = []
    for gen in range(cfg.generations):
        pending = [i for i in range(len(population)) if scores[i] is None]
        for i in pending:
            seeds[i] = derive_seed(root, "fit", gen, i)
        if max_workers > 1 and len(pending) > 1:
            from concurrent.futures import ThreadPoolExecutor

            def _run(i: int) -> FitnessScore:
                return fitness(population[i], X_train, y_train, X_val, y_val, seed=seeds[i])

            with ThreadPoolExecutor(max_workers=max_workers) as pool_exec:
                for i, score in zip(pending, pool_exec.map(_run, pending)):
                    scores[i] = score
        else:
            for i in pending:
                scores[i] = fitness(population[i], X_train, y_train, X_val, y_val, seed=seeds[i])
        for i, individual in enumerate(population):
            rec = individual.to_jsonable(pool)
            rec.update(
                generation=gen,
                index=i,
                seed=seeds[i],
                accuracy=scores[i].accuracy,
                latency_cost=scores[i].latency_cost,
                memory_cost=scores[i].memory_cost,
                scalar=scores[i].scalar,
                note=scores[i].note,
            )
            log.append(rec)
        order = sorted(range(len(population)), key=lambda i: -scores[i].scalar)
        scored = [(population[i], scores[i]) for i in order]
        if gen == cfg.generations - 1:
            return EvolveResult(ranked=scored, log=log)
        elite_idx = order[: cfg.elitism]
        next_pop = [population[i] for i in elite_idx]
        next_scores: list[FitnessScore | None] = [scores[i] for i in elite_idx]
        next_seeds: list[int | None] = [seeds[i] for i in elite_idx]
        while len(next_pop) < cfg.population:
            parent_a = _tournament(scored, cfg.tournament_k, rng)
            child = parent_a
            if rng.random() < cfg.crossover_rate:
                parent_b = _tournament(scored, cfg.tournament_k, rng)
                child = _crossover(parent_a, parent_b, rng)
            if rng.random() < cfg.mutation_rate:
                child = _mutate(child, rng)
            next_pop.append(child)
            next_scores.append(None)
            next_seeds.append(None)
        population, scores, seeds = next_pop, next_scores, next_seeds
    raise AssertionError("unreachable")


def feature_frequency(
    runs: list[list[tuple[Pipeline, FitnessScore]]],
    top_n: int,
    pool: CandidatePool,
) -> list[tuple[str, int]]:
    """Count candidate features across the top_n pipelines of every run;
    ranked by count descending, ties broken by pool order."""
    if not runs:
        raise ValueError("need at least one run")
    counts = np.zeros(len(pool), dtype=np.int64)
    for ranked in runs:
        for pipeline, _score in ranked[:top_n]:
            counts += pipeline.mask.astype(np.int64)
    order = sorted(range(len(pool)), key=lambda i: (-counts[i], i))
    return [(pool.names[i], int(counts[i])) for i in order]
