"""Acceptance gate: one test per release criterion.

Each test prints a single "criterion N (...): PASS/FAIL" line. The
benchmark comparisons (criteria 4-8) share trained models through the
session-scoped `bench` cache, so the whole module stays inside its time
budget even though it covers ten model variants across five seeds.
"""

from dataclasses import replace

import numpy as np

import oracles
from clood import losses, scoring
from clood.autodiff import Tensor, finite_difference_check
from clood.clustering import assign
from clood.config import benchmark_config
from clood.data import DatasetSpec, generate_synthetic
from clood.scoring import ReferenceBank
from clood.train import evaluate, load_checkpoint, serialize_checkpoint, train
from clood.scoring import write_report


def _verdict(num, name, ok, detail=""):
    line = f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print("\n" + line)
    assert ok, line


def _seeded_instance(seed):
    """Small random problem instance: 8 rows, d=6, 3 clusters."""
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((8, 6))
    centers = rng.standard_normal((3, 6))
    assigns = rng.integers(3, size=8)
    assigns[1] = assigns[0]          # guarantee at least one positive pair
    phis = rng.uniform(0.3, 1.0, 3)
    return z, centers, assigns, phis


def test_criterion_1_gradient_suite():
    failures = []
    for seed in range(20):
        z, centers, assigns, phis = _seeded_instance(seed)
        cases = {
            "pair": lambda t: losses.nt_xent_pair(0, 1, t, 0.5),
            "self": lambda t: losses.self_supervised_loss(t, 0.5),
            "center": lambda t: losses.cluster_center_loss(
                t, centers, assigns, phis),
            "instance": lambda t: losses.cluster_instance_loss(
                t, assigns, 0.5),
            "cluster": lambda t: losses.cluster_aware_loss(
                losses.cluster_center_loss(t, centers, assigns, phis),
                losses.cluster_instance_loss(t, assigns, 0.5)),
            "total": lambda t: losses.total_loss(
                losses.self_supervised_loss(t, 0.5),
                losses.cluster_aware_loss(
                    losses.cluster_center_loss(t, centers, assigns, phis),
                    losses.cluster_instance_loss(t, assigns, 0.5)),
                0.5),
        }
        for name, f in cases.items():
            err = finite_difference_check(f, Tensor(z), step=1e-5)
            if not err < 1e-4:
                failures.append((name, seed, err))
    _verdict(1, "gradient suite", not failures,
             detail=str(failures[:3]) if failures else "")


def test_criterion_2_oracle_suite():
    worst = 0.0
    assign_ok = True
    for seed in range(100):
        z, centers, assigns, phis = _seeded_instance(seed)
        rng = np.random.default_rng(1000 + seed)
        checks = [
            (losses.nt_xent_pair(0, 1, z, 0.5).data,
             oracles.ntxent_pair_oracle(0, 1, z.tolist(), 0.5)),
            (losses.self_supervised_loss(z, 0.5).data,
             oracles.self_supervised_oracle(z.tolist(), 0.5)),
            (losses.cluster_center_loss(z, centers, assigns, phis).data,
             oracles.cluster_center_oracle(z.tolist(), centers.tolist(),
                                           assigns.tolist(), phis.tolist())),
            (losses.cluster_instance_loss(z, assigns, 0.5).data,
             oracles.cluster_instance_oracle(z.tolist(), assigns.tolist(),
                                             0.5)),
        ]
        got_assign = assign(z, centers)
        want_assign = oracles.assign_oracle(z.tolist(), centers.tolist())
        assign_ok = assign_ok and list(got_assign) == list(want_assign)

        bank_rows = rng.standard_normal((12, 6))
        bank = ReferenceBank(bank_rows)
        q = rng.standard_normal(6)
        checks.append((scoring.score_cos(bank, q),
                       oracles.score_cos_oracle(bank_rows.tolist(),
                                                q.tolist())))
        checks.append((scoring.score_var(bank, q, 5),
                       oracles.score_var_oracle(bank_rows.tolist(),
                                                q.tolist(), 5)))
        ids = rng.integers(0, 5, size=9).astype(float)
        oods = rng.integers(0, 5, size=7).astype(float)
        checks.append((scoring.auroc(ids, oods),
                       oracles.auroc_oracle(ids.tolist(), oods.tolist())))
        worst = max(worst, max(abs(a - b) for a, b in checks))
    _verdict(2, "oracle suite", assign_ok and worst < 1e-10,
             detail=f"worst abs err {worst:.2e}")


def test_criterion_3_schedule_contract(tmp_path):
    config = benchmark_config(epochs_total=50, warmup_epochs=20,
                              update_interval=10)
    bundle = generate_synthetic(DatasetSpec.from_config(config), config.seed)
    full = train(config, bundle, probe_epochs=(20,))
    refits_ok = full.refit_epochs == [20, 30, 40]

    # the cluster terms must leave the parameters untouched before the
    # warm-up boundary: the epoch-20 probe (taken before the first refit)
    # must be bit-identical to a run that never uses them at all
    plain_cfg = replace(config, use_ccl=False, use_cil=False)
    plain = train(plain_cfg, bundle, probe_epochs=(20,))
    probes = []
    for label, result in (("full", full), ("plain", plain)):
        p = tmp_path / f"{label}.ckpt"
        p.write_bytes(result.snapshots[20])
        probes.append(load_checkpoint(p))
    params_ok = all(
        np.array_equal(a.data, b.data)
        for a, b in zip(probes[0].encoder.tensors()
                        + probes[0].projection.tensors(),
                        probes[1].encoder.tensors()
                        + probes[1].projection.tensors()))
    _verdict(3, "schedule contract", refits_ok and params_ok,
             detail=f"refits={full.refit_epochs}")


def test_criterion_4_loss_term_comparison(bench, bench_config):
    c = bench_config
    means = {
        "self": bench.mean_auroc(replace(c, use_ccl=False, use_cil=False)),
        "ccl": bench.mean_auroc(replace(c, use_cil=False)),
        "cil": bench.mean_auroc(replace(c, use_ccl=False)),
        "full": bench.mean_auroc(c),
    }
    ok = (means["full"] >= means["self"] + 0.02
          and means["ccl"] >= means["self"]
          and means["cil"] >= means["self"])
    _verdict(4, "loss term comparison", ok,
             detail=", ".join(f"{k}={v:.4f}" for k, v in means.items()))


def test_criterion_5_clustering_layer(bench, bench_config):
    emb = bench.mean_auroc(bench_config)
    proj = bench.mean_auroc(replace(bench_config,
                                    clustering_layer="projection"))
    _verdict(5, "clustering layer", emb >= proj,
             detail=f"embedding={emb:.4f}, projection={proj:.4f}")


def test_criterion_6_update_schedule(bench, bench_config):
    c = bench_config
    means = {
        "no_warmup": bench.mean_auroc(replace(c, warmup_epochs=0)),
        "u1": bench.mean_auroc(replace(c, update_interval=1)),
        "u10": bench.mean_auroc(c),
        "u50": bench.mean_auroc(replace(c, update_interval=50)),
    }
    best = max(means["u1"], means["u10"], means["u50"])
    ok = means["u10"] >= means["no_warmup"] and means["u10"] >= best - 0.01
    _verdict(6, "update schedule", ok,
             detail=", ".join(f"{k}={v:.4f}" for k, v in means.items()))


def test_criterion_7_cluster_count(bench, bench_config):
    c = bench_config
    variants = {r: replace(c, clusters=r)
                for r in (c.components // 2, c.components, 5 * c.components)}
    aurocs = {r: bench.mean_auroc(cfg) for r, cfg in variants.items()}
    sims = {r: bench.mean_similarity(variants[r])
            for r in (c.components, 5 * c.components)}
    auroc_ok = aurocs[c.components] == max(aurocs.values())
    sim_ok = sims[c.components] >= sims[5 * c.components]
    _verdict(7, "cluster count", auroc_ok and sim_ok,
             detail=f"aurocs={ {r: round(v, 4) for r, v in aurocs.items()} }, "
                    f"sims={ {r: round(v, 4) for r, v in sims.items()} }")


def test_criterion_8_score_functions(bench, bench_config):
    gaps = {}
    for ood_set in ("shifted", "scaled", "interp"):
        cos = bench.mean_auroc(bench_config, ood_set=ood_set,
                               score_kind="cos")
        var = bench.mean_auroc(bench_config, ood_set=ood_set,
                               score_kind="var")
        gaps[ood_set] = var - cos
    ok = all(g >= -0.01 for g in gaps.values())
    _verdict(8, "score functions", ok,
             detail=", ".join(f"{k}:{v:+.4f}" for k, v in gaps.items()))


def test_criterion_9_determinism(tmp_path):
    config = benchmark_config(train_per_component=20, test_per_component=10,
                              ood_samples=40, epochs_total=30,
                              warmup_epochs=10, k_top=10)
    blobs, files = [], []
    for run in range(2):
        bundle = generate_synthetic(DatasetSpec.from_config(config),
                                    config.seed)
        result = train(config, bundle)
        blobs.append(serialize_checkpoint(result.encoder, result.projection,
                                          result.cluster_state, config))
        report = evaluate(result, bundle)
        sp, ap = tmp_path / f"scores{run}.csv", tmp_path / f"auroc{run}.csv"
        write_report(report, sp, ap)
        files.append((sp.read_bytes(), ap.read_bytes()))
    ok = blobs[0] == blobs[1] and files[0] == files[1]
    _verdict(9, "determinism", ok)
