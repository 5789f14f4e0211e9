"""Named ablation sweeps over loss terms, clustering layer, update
schedule, and cluster count, aggregated over seeds."""

import csv
from dataclasses import replace

import numpy as np

from .config import benchmark_config
from .data import DatasetSpec, generate_synthetic
from .errors import ConfigError
from .train import evaluate, mean_max_center_similarity, train

# completed runs keyed by config hash; sweeps share the full-model config
_run_cache = {}


def run_one(config, want_similarity=False):
    """Train + evaluate one config on its own seeded bundle."""
    key = (config.hash(), want_similarity)
    if key in _run_cache:
        return _run_cache[key]
    bundle = generate_synthetic(DatasetSpec.from_config(config), config.seed)
    result = train(config, bundle)
    report = evaluate(result, bundle)
    sim = mean_max_center_similarity(result, bundle) \
        if want_similarity and result.cluster_state is not None else float("nan")
    out = (dict(report.aurocs), sim)
    _run_cache[key] = out
    return out


def _variants(name, base):
    c = base
    if name == "loss-terms":
        return [
            ("self_only", replace(c, use_ccl=False, use_cil=False)),
            ("self+ccl", replace(c, use_ccl=True, use_cil=False)),
            ("self+cil", replace(c, use_ccl=False, use_cil=True)),
            ("full", replace(c, use_ccl=True, use_cil=True)),
        ]
    if name == "cluster-layer":
        return [
            ("self_only", replace(c, use_ccl=False, use_cil=False)),
            ("projection", replace(c, clustering_layer="projection")),
            ("embedding", replace(c, clustering_layer="embedding")),
        ]
    if name == "schedule":
        return [
            ("no_warmup_u10", replace(c, warmup_epochs=0, update_interval=10)),
            ("warmup_u_batch", replace(c, update_per_batch=True)),
            ("warmup_u1", replace(c, update_interval=1)),
            ("warmup_u10", replace(c, update_interval=10)),
            ("warmup_u50", replace(c, update_interval=50)),
        ]
    if name == "cluster-count":
        r = c.components
        return [
            (f"r={r // 2}", replace(c, clusters=max(2, r // 2))),
            (f"r={r}", replace(c, clusters=r)),
            (f"r={5 * r}", replace(c, clusters=5 * r)),
        ]
    raise ConfigError(f"unknown sweep {name!r}; "
                      "choose loss-terms, cluster-layer, schedule, or cluster-count")


def run_sweep(name, base=None, n_seeds=5):
    """Run every variant of a named sweep over n_seeds seeds.

    Returns one row per variant with mean AUROC per OOD set (and, for the
    cluster-count sweep, the mean max embedding-to-center similarity).
    """
    base = base or benchmark_config()
    want_sim = name == "cluster-count"
    rows = []
    for label, cfg in _variants(name, base):
        aurocs, sims = {}, []
        for s in range(n_seeds):
            run_aurocs, sim = run_one(replace(cfg, seed=base.seed + s),
                                      want_similarity=want_sim)
            for set_name, v in run_aurocs.items():
                aurocs.setdefault(set_name, []).append(v)
            sims.append(sim)
        row = {"sweep": name, "variant": label, "config_hash": cfg.hash()}
        for set_name in sorted(aurocs):
            row[f"auroc_{set_name}"] = float(np.mean(aurocs[set_name]))
        if want_sim:
            row["similarity"] = float(np.mean(sims))
        rows.append(row)
    return rows


def write_sweep(rows, path):
    fieldnames = sorted({k for row in rows for k in row},
                        key=lambda k: (k not in ("sweep", "variant"), k))
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=fieldnames)
        w.writeheader()
        for row in rows:
            w.writerow(row)


def format_sweep(rows):
    lines = []
    for row in rows:
        metrics = ", ".join(f"{k.removeprefix('auroc_')}={v:.4f}"
                            for k, v in sorted(row.items())
                            if isinstance(v, float))
        lines.append(f"{row['sweep']:8s} {row['variant']:16s} {metrics}")
    return "\n".join(lines)
