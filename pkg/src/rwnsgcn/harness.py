"""Experiment orchestration: baseline runs, attack comparisons, the
scoring ablation, and the max-distance sweep, with CSV/JSON reporting.

Each run r uses seed base_seed + r; every stochastic phase (split,
communities, sampling, init/dropout, attack) draws from a named
sub-stream of that seed, so variants sharing a base seed share the
randomness of every phase they have in common.  CSV output is a pure
function of the configuration, so identical configs produce
byte-identical files; wall-clock timings go to the JSON only.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from rwnsgcn import data as data_mod
from rwnsgcn.attacks import AttackSpec, apply_attack, edge_betweenness
from rwnsgcn.config import ExperimentConfig, config_hash, derive_seed, substream
from rwnsgcn.data import Dataset, degree_filtered_nodes, planetoid_split
from rwnsgcn.dpp import (
    build_negative_graph,
    draw_negative_samples,
    label_propagation,
)
from rwnsgcn.graph import Graph, build_graph, sym_normalized_operator
from rwnsgcn.metrics import accuracy, mad
from rwnsgcn.model import TrainConfig, _maybe_sparse, predict, train
from rwnsgcn.scoring import (
    CandidateSet,
    candidate_map_from_json,
    candidate_map_to_json,
    score_all_sources,
)

__all__ = [
    "RunReport",
    "load_dataset",
    "run_baseline",
    "run_ablation",
    "run_l_sweep",
    "run_attack_comparison",
    "emit_report",
]

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    label: str
    config_hash: str
    config: dict
    columns: list[str]
    rows: list[dict]
    aggregates: dict[str, float]
    timings: dict[str, float] = field(default_factory=dict)


def load_dataset(config: ExperimentConfig) -> Dataset:
    """Load the configured dataset (JSON bundle or .content/.cites pair)."""
    path = config.dataset_path
    if not path:
        raise ValueError("config.dataset_path is empty")
    if config.dataset_format == "bundle":
        return data_mod.load_json_bundle(path)
    if config.dataset_format == "content-cites":
        return data_mod.load_content_cites_paths(
            path + ".content", path + ".cites", row_normalize=config.row_normalize
        )
    raise ValueError(f"unknown dataset_format {config.dataset_format!r}")


def _graph_fingerprint(g: Graph) -> str:
    h = hashlib.sha256()
    h.update(np.int64(g.num_nodes).tobytes())
    h.update(np.ascontiguousarray(g.indptr).tobytes())
    h.update(np.ascontiguousarray(g.indices).tobytes())
    h.update(np.ascontiguousarray(g.weights).tobytes())
    return h.hexdigest()[:16]


def _scoring_key(g: Graph, config: ExperimentConfig, sources: Sequence[int]) -> str:
    payload = json.dumps(
        {
            "graph": _graph_fingerprint(g),
            "alpha": config.alpha,
            "beta": config.beta,
            "l_max": config.l_max,
            "levels": list(config.levels),
            "k_per_level": config.k_per_level,
            "pgr_mode": config.pgr_mode,
            "sources": hashlib.sha256(
                np.asarray(sorted(sources), dtype=np.int64).tobytes()
            ).hexdigest()[:16],
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()[:16]


def _experiment_sources(g: Graph, config: ExperimentConfig) -> list[int]:
    if config.sources == "all":
        return list(range(g.num_nodes))
    if config.sources == "degree-range":
        return [int(v) for v in degree_filtered_nodes(g, config.degree_lo, config.degree_hi)]
    raise ValueError(f"unknown sources mode {config.sources!r}")


class _CandidateCache:
    """Process-wide candidate cache with an optional JSON spill directory."""

    def __init__(self):
        self.memory: dict[str, dict[int, CandidateSet]] = {}

    def get(
        self, g: Graph, config: ExperimentConfig
    ) -> dict[int, CandidateSet]:
        sources = _experiment_sources(g, config)
        key = _scoring_key(g, config, sources)
        if key in self.memory:
            return self.memory[key]
        path = None
        if config.cache_dir:
            path = Path(config.cache_dir) / f"candidates-{key}.json"
            if path.exists():
                raw = json.loads(path.read_text())
                cands = candidate_map_from_json(raw["candidates"])
                self.memory[key] = cands
                return cands
        cands = score_all_sources(
            g,
            sources,
            alpha=config.alpha,
            beta=config.beta,
            l_max=config.l_max,
            levels=config.levels,
            k_per_level=config.k_per_level,
            pgr_mode=config.pgr_mode,
        )
        self.memory[key] = cands
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(
                json.dumps({"key": key, "candidates": candidate_map_to_json(cands)})
            )
        return cands

    def clear(self):
        self.memory.clear()


_CACHE = _CandidateCache()


def _empty_graph(n: int) -> Graph:
    return build_graph(n, [])


def _run_once(
    ds: Dataset,
    config: ExperimentConfig,
    run_index: int,
    timings: dict[str, float],
    dump_dir: Path | None = None,
) -> dict:
    """One full pipeline execution. Returns the per-run report row."""
    seed = config.base_seed + run_index
    split_seed = derive_seed(seed, "split")
    masks = planetoid_split(
        ds,
        per_class=config.per_class,
        num_val=config.num_val,
        num_test=config.num_test,
        seed=split_seed,
    )
    n = ds.num_nodes
    lp_seed = derive_seed(seed, "labelprop")
    negatives_schedule = None
    if config.lam != 0.0:
        t0 = time.perf_counter()
        candidates = _CACHE.get(ds.graph, config)
        timings["scoring"] = timings.get("scoring", 0.0) + time.perf_counter() - t0

        t0 = time.perf_counter()
        comm = label_propagation(ds.graph, features=ds.features, seed=lp_seed)

        def draw(*rng_tags):
            sampled = draw_negative_samples(
                candidates,
                ds.features,
                comm,
                k=config.k_dpp,
                method=config.sampler,
                jitter=config.jitter,
                rng_for_source=lambda src: substream(seed, "dpp", src, *rng_tags),
            )
            return sampled, build_negative_graph(sampled, n)

        negatives, neg_graph = draw()
        timings["sampling"] = timings.get("sampling", 0.0) + time.perf_counter() - t0
        if config.resample_every > 0:

            def negatives_schedule(epoch: int):
                if epoch == 0 or epoch % config.resample_every != 0:
                    return None
                return draw("epoch", epoch)[1]
        if dump_dir is not None:
            dump_dir.mkdir(parents=True, exist_ok=True)
            (dump_dir / f"negatives-run{run_index}.json").write_text(
                json.dumps(
                    {
                        "config_hash": config_hash(config),
                        "run": run_index,
                        "negatives": {str(s): v for s, v in negatives.items()},
                    }
                )
            )
    else:
        neg_graph = _empty_graph(n)

    model_seed = derive_seed(seed, "model")
    tc = TrainConfig(
        epochs=config.epochs,
        lr=config.lr,
        hidden=config.hidden,
        layers=config.layers,
        dropout=config.dropout,
        lam=config.lam,
        seed=model_seed,
        self_loops=config.gcn_self_loops,
    )
    t0 = time.perf_counter()
    best, _history = train(ds, masks, neg_graph, tc, negatives_schedule=negatives_schedule)
    timings["training"] = timings.get("training", 0.0) + time.perf_counter() - t0

    t0 = time.perf_counter()
    pos_op = sym_normalized_operator(ds.graph, self_loops=config.gcn_self_loops)
    eval_negatives = best.negatives if best.negatives is not None else neg_graph
    neg_op = sym_normalized_operator(eval_negatives, self_loops=False)
    preds, emb = predict(best.params, _maybe_sparse(ds.features), pos_op, neg_op)
    acc = accuracy(preds, ds.labels, masks.test)
    mad_report = mad(emb[masks.test])
    timings["evaluation"] = timings.get("evaluation", 0.0) + time.perf_counter() - t0
    return {
        "run": run_index,
        "seed": seed,
        "accuracy": acc,
        "mad": mad_report.value,
        "best_epoch": best.best_epoch,
        "split_seed": split_seed,
        "labelprop_seed": lp_seed,
        "model_seed": model_seed,
    }


_BASE_COLUMNS = [
    "run",
    "seed",
    "accuracy",
    "mad",
    "best_epoch",
    "split_seed",
    "labelprop_seed",
    "model_seed",
]
_METRIC_COLUMNS = ("accuracy", "mad")


def _aggregate(rows: list[dict], metrics: Iterable[str] = _METRIC_COLUMNS) -> dict:
    out = {}
    for m in metrics:
        vals = np.array([row[m] for row in rows], dtype=np.float64)
        out[f"{m}_mean"] = float(vals.mean())
        # sample standard deviation, matching mean +/- std reporting
        out[f"{m}_std"] = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
    return out


def run_baseline(
    ds: Dataset,
    config: ExperimentConfig,
    label: str = "baseline",
    dump_negatives_dir: str | Path | None = None,
) -> RunReport:
    """Full pipeline for ``config.runs`` seeded runs, with aggregates."""
    timings: dict[str, float] = {}
    dump = Path(dump_negatives_dir) if dump_negatives_dir else None
    rows = []
    for r in range(config.runs):
        rows.append(_run_once(ds, config, r, timings, dump_dir=dump))
        log.info("%s run %d: accuracy=%.4f", label, r, rows[-1]["accuracy"])
    return RunReport(
        label=label,
        config_hash=config_hash(config),
        config=config.to_dict(),
        columns=list(_BASE_COLUMNS),
        rows=rows,
        aggregates=_aggregate(rows),
        timings=timings,
    )


def run_ablation(ds: Dataset, config: ExperimentConfig) -> list[RunReport]:
    """Combined vs single-score variants under identical seeds."""
    variants = [
        ("ablate/combined", config.beta),
        ("ablate/rwr-only", 1.0),
        ("ablate/pgr-only", 0.0),
    ]
    return [
        run_baseline(ds, config.with_overrides(beta=beta), label=label)
        for label, beta in variants
    ]


def run_l_sweep(
    ds: Dataset, config: ExperimentConfig, l_values: Sequence[int] = (5, 6)
) -> list[RunReport]:
    """One report per maximum hop distance, shared seeds.

    Candidate levels follow the distance: levels = 2..L-1 (layer 1 is
    reserved for positives, so L must be at least 3).
    """
    reports = []
    for l in l_values:
        if l < 3:
            raise ValueError(
                f"l_max={l} leaves no candidate levels (levels are 2..L-1)"
            )
        cfg = config.with_overrides(l_max=l, levels=tuple(range(2, l)))
        reports.append(run_baseline(ds, cfg, label=f"sweep-l/L={l}"))
    return reports


def run_attack_comparison(
    ds: Dataset,
    config: ExperimentConfig,
    attack_grid: Sequence[tuple[str, float]] = (("ctbca", 0.10), ("twpa", 0.5)),
) -> list[RunReport]:
    """Clean-vs-attacked accuracy for the negative-sampling model and the
    plain GCN under shared per-run seeds (retraining on the perturbed
    graph).  One report per attack, one paired row per run."""
    gcn_config = config.with_overrides(lam=0.0)
    timings: dict[str, float] = {}
    clean_rw = [_run_once(ds, config, r, timings) for r in range(config.runs)]
    clean_gcn = [_run_once(ds, gcn_config, r, timings) for r in range(config.runs)]

    betweenness = None
    if any(kind == "ctbca" for kind, _ in attack_grid):
        t0 = time.perf_counter()
        betweenness = edge_betweenness(ds.graph)
        timings["betweenness"] = time.perf_counter() - t0

    reports = []
    for kind, intensity in attack_grid:
        attacked_cfg = config.with_overrides(
            attack_kind=kind, attack_intensity=intensity
        )
        attacked_gcn_cfg = attacked_cfg.with_overrides(lam=0.0)
        rows = []
        for r in range(config.runs):
            seed = config.base_seed + r
            attack_seed = derive_seed(seed, "attack")
            spec = AttackSpec(kind=kind, intensity=intensity, seed=attack_seed)
            perturbed_graph = apply_attack(ds.graph, spec, scores=betweenness)
            perturbed = Dataset(
                graph=perturbed_graph,
                features=ds.features,
                labels=ds.labels,
                class_count=ds.class_count,
                feature_dim=ds.feature_dim,
                node_names=ds.node_names,
                class_names=ds.class_names,
            )
            att_rw = _run_once(perturbed, attacked_cfg, r, timings)
            att_gcn = _run_once(perturbed, attacked_gcn_cfg, r, timings)
            deg_rw = clean_rw[r]["accuracy"] - att_rw["accuracy"]
            deg_gcn = clean_gcn[r]["accuracy"] - att_gcn["accuracy"]
            rows.append(
                {
                    "run": r,
                    "seed": seed,
                    "attack_seed": attack_seed,
                    "clean_accuracy_rwnsgcn": clean_rw[r]["accuracy"],
                    "attacked_accuracy_rwnsgcn": att_rw["accuracy"],
                    "degradation_rwnsgcn": deg_rw,
                    "clean_accuracy_gcn": clean_gcn[r]["accuracy"],
                    "attacked_accuracy_gcn": att_gcn["accuracy"],
                    "degradation_gcn": deg_gcn,
                    "rwnsgcn_no_worse": int(deg_rw <= deg_gcn),
                }
            )
        metric_cols = [
            "clean_accuracy_rwnsgcn",
            "attacked_accuracy_rwnsgcn",
            "degradation_rwnsgcn",
            "clean_accuracy_gcn",
            "attacked_accuracy_gcn",
            "degradation_gcn",
            "rwnsgcn_no_worse",
        ]
        reports.append(
            RunReport(
                label=f"attack/{kind}@{intensity:g}",
                config_hash=config_hash(attacked_cfg),
                config=attacked_cfg.to_dict(),
                columns=["run", "seed", "attack_seed"] + metric_cols,
                rows=rows,
                aggregates=_aggregate(rows, metrics=metric_cols),
                timings=dict(timings),
            )
        )
    return reports


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def emit_report(
    reports: Sequence[RunReport],
    out_dir: str | Path,
    formats: Sequence[str] = ("csv", "json"),
    stem: str = "report",
) -> list[Path]:
    """Write per-run CSV rows (plus one aggregate row per report) and a
    JSON document with full configs and aggregates.  Column order and
    float formatting are fixed, so equal inputs give equal bytes."""
    if not reports:
        raise ValueError("no reports to emit")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if "csv" in formats:
        columns: list[str] = []
        for rep in reports:
            for c in rep.columns:
                if c not in columns:
                    columns.append(c)
        agg_cols = []
        for rep in reports:
            for key in rep.aggregates:
                if key not in agg_cols:
                    agg_cols.append(key)
        path = out / f"{stem}.csv"
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["config_hash", "label", "row"] + columns + agg_cols)
            for rep in reports:
                for row in rep.rows:
                    writer.writerow(
                        [rep.config_hash, rep.label, row["run"]]
                        + [_fmt(row[c]) if c in row else "" for c in columns]
                        + ["" for _ in agg_cols]
                    )
                writer.writerow(
                    [rep.config_hash, rep.label, "aggregate"]
                    + ["" for _ in columns]
                    + [
                        _fmt(rep.aggregates[k]) if k in rep.aggregates else ""
                        for k in agg_cols
                    ]
                )
        written.append(path)
    if "json" in formats:
        path = out / f"{stem}.json"
        payload = [
            {
                "label": rep.label,
                "config_hash": rep.config_hash,
                "config": rep.config,
                "columns": rep.columns,
                "rows": rep.rows,
                "aggregates": rep.aggregates,
                "timings": rep.timings,
            }
            for rep in reports
        ]
        path.write_text(json.dumps(payload, indent=2, sort_keys=True))
        written.append(path)
    return written
