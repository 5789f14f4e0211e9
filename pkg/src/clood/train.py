"""Two-phase training loop (warm-up then joint), checkpointing, evaluation.

Warm-up minimizes the instance-level contrastive loss alone; once the
warm-up epochs have elapsed, cluster centers are refit on the full
un-augmented ID training set at the configured layer on every scheduled
epoch, and each step optimizes the weighted combination of the instance
and cluster-aware losses with plain SGD.
"""

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import clustering, losses, model, scoring
from .data import augment
from .autodiff import Tensor
from .clustering import ClusterSchedule, ClusterState
from .config import TrainConfig, config_from_dict
from .errors import ConfigError, NumericError
from .model import EncoderParams, ProjectionParams


@dataclass
class TrainResult:
    encoder: EncoderParams
    projection: ProjectionParams
    cluster_state: ClusterState | None
    config: TrainConfig
    metrics: list = field(default_factory=list)
    refit_epochs: list = field(default_factory=list)
    snapshots: dict = field(default_factory=dict)


# ---- deterministic checkpoint format ----

_MAGIC = b"CLOODCKPT1"


def _named_arrays(encoder, projection, cluster_state):
    arrays = {}
    for name, arr in encoder.arrays().items():
        arrays[f"encoder.{name}"] = arr
    for name, arr in projection.arrays().items():
        arrays[f"projection.{name}"] = arr
    if cluster_state is not None:
        arrays["cluster.centers"] = cluster_state.centers
        arrays["cluster.assignments"] = cluster_state.assignments.astype(np.int64)
        arrays["cluster.phis"] = cluster_state.phis
    return arrays


def serialize_checkpoint(encoder, projection, cluster_state, config):
    """Byte-deterministic flat serialization of all parameter arrays."""
    buf = io.BytesIO()
    buf.write(_MAGIC + b"\n")
    buf.write(config.hash().encode() + b"\n")
    cfg = config.to_dict()
    if cluster_state is not None:
        cfg["_cluster_layer"] = cluster_state.layer
        cfg["_cluster_epoch"] = str(cluster_state.updated_at_epoch)
    buf.write(f"{len(cfg)}\n".encode())
    for key in sorted(cfg):
        buf.write(f"{key}={cfg[key]}\n".encode())
    arrays = _named_arrays(encoder, projection, cluster_state)
    buf.write(f"{len(arrays)}\n".encode())
    for name in sorted(arrays):
        arr = np.ascontiguousarray(arrays[name])
        shape = " ".join(str(s) for s in arr.shape)
        buf.write(f"{name} {arr.dtype.name} {shape}\n".encode())
        buf.write(arr.tobytes())
    return buf.getvalue()


def save_checkpoint(path, result):
    with open(path, "wb") as f:
        f.write(serialize_checkpoint(result.encoder, result.projection,
                                     result.cluster_state, result.config))


def load_checkpoint(path):
    """Round-trips serialize_checkpoint bit-exactly."""
    with open(path, "rb") as f:
        if f.readline().strip() != _MAGIC:
            raise ConfigError(f"{path} is not a checkpoint file")
        stored_hash = f.readline().strip().decode()
        n_cfg = int(f.readline())
        cfg = {}
        for _ in range(n_cfg):
            key, val = f.readline().decode().rstrip("\n").split("=", 1)
            cfg[key] = val
        cluster_layer = cfg.pop("_cluster_layer", None)
        cluster_epoch = int(cfg.pop("_cluster_epoch", "0"))
        config = config_from_dict(cfg)
        if config.hash() != stored_hash:
            raise ConfigError(f"{path}: config hash mismatch")
        arrays = {}
        n_arr = int(f.readline())
        for _ in range(n_arr):
            name, dtype, *shape = f.readline().decode().split()
            shape = tuple(int(s) for s in shape)
            count = int(np.prod(shape)) if shape else 1
            data = np.frombuffer(
                f.read(count * np.dtype(dtype).itemsize), dtype=dtype
            ).reshape(shape)
            arrays[name] = data

    def unpack(prefix, grad):
        params = model.MLPParams()
        i = 0
        while f"{prefix}.w{i}" in arrays:
            params.weights.append(
                Tensor(arrays[f"{prefix}.w{i}"], requires_grad=grad))
            params.biases.append(
                Tensor(arrays[f"{prefix}.b{i}"], requires_grad=grad))
            i += 1
        return params

    encoder = unpack("encoder", True)
    projection = unpack("projection", True)
    cluster_state = None
    if cluster_layer is not None:
        cluster_state = ClusterState(
            centers=arrays["cluster.centers"].copy(),
            assignments=arrays["cluster.assignments"].copy(),
            phis=arrays["cluster.phis"].copy(),
            layer=cluster_layer, updated_at_epoch=cluster_epoch)
    return TrainResult(encoder=encoder, projection=projection,
                       cluster_state=cluster_state, config=config)


# ---- training ----

def _layer_features_np(encoder, projection, x, layer):
    h = model.mlp_forward_np(encoder, x)
    return h if layer == "embedding" else model.mlp_forward_np(projection, h)


def _refit(config, encoder, projection, bundle, epoch):
    feats = _layer_features_np(encoder, projection, bundle.id_train,
                               config.clustering_layer)
    seed = int(np.random.SeedSequence([config.seed, 13, epoch]).generate_state(1)[0])
    return clustering.fit_state(
        feats, config.clusters, seed=seed, alpha=config.alpha,
        phi_floor=config.phi_floor, layer=config.clustering_layer, epoch=epoch,
        max_iters=config.kmeans_max_iters, tol=config.kmeans_tol)


def _sgd_step(params_list, lr):
    for p in params_list:
        if p.grad is not None:
            p.data -= lr * p.grad
        p.grad = None


def _epoch_lr(config, epoch):
    if not config.cosine_anneal:
        return config.lr
    return config.lr * 0.5 * (1.0 + math.cos(math.pi * epoch / config.epochs_total))


def train(config, bundle, probe_epochs=()):
    """Run the full two-phase schedule; deterministic for a fixed config."""
    encoder, projection = model.init_params(
        config.seed, config.encoder_widths, config.projection_widths)
    all_params = encoder.tensors() + projection.tensors()
    hyper = losses.LossHyperparams(
        tau=config.tau, alpha=config.alpha,
        lambda_weight=config.lambda_weight, phi_floor=config.phi_floor)

    m = bundle.id_train.shape[0]
    if m < config.clusters:
        raise ConfigError("training set smaller than the cluster count")
    state = None
    result = TrainResult(encoder=encoder, projection=projection,
                         cluster_state=None, config=config)
    schedule = ClusterSchedule(config.warmup_epochs, config.update_interval)
    cluster_on = config.use_ccl or config.use_cil
    cfg_hash = config.hash()

    for epoch in range(config.epochs_total):
        if epoch in probe_epochs:
            result.snapshots[epoch] = serialize_checkpoint(
                encoder, projection, state, config)
        refit_now = cluster_on and clustering.should_update(epoch, schedule) \
            and not config.update_per_batch
        if refit_now:
            state = _refit(config, encoder, projection, bundle, epoch)
            result.refit_epochs.append(epoch)

        lr = _epoch_lr(config, epoch)
        epoch_rng = np.random.default_rng(
            np.random.SeedSequence([config.seed, 7, epoch]))
        order = epoch_rng.permutation(m)
        n_batches = max(1, m // config.batch_size)
        epoch_self, epoch_cluster, n_cluster_terms = 0.0, 0.0, 0

        for b in range(n_batches):
            idx = order[b * config.batch_size:(b + 1) * config.batch_size]
            if idx.size < 2:
                continue
            joint = epoch >= config.warmup_epochs and cluster_on
            if joint and config.update_per_batch:
                state = _refit(config, encoder, projection, bundle, epoch)
                if epoch not in result.refit_epochs:
                    result.refit_epochs.append(epoch)

            aug_seed = np.random.SeedSequence([config.seed, 11, epoch, b])
            views = data_augment(bundle.id_train[idx], aug_seed, config)
            batch = model.encode_batch(encoder, projection, views)
            l_self = losses.self_supervised_loss(batch.projections, hyper.tau)

            if joint and state is not None:
                feats = batch.embeddings if config.clustering_layer == "embedding" \
                    else batch.projections
                assigns = clustering.assign(feats.data, state.centers)
                terms = []
                if config.use_ccl:
                    terms.append(losses.cluster_center_loss(
                        feats, state.centers, assigns, state.phis,
                        include_positive=config.denominator_includes_positive))
                if config.use_cil:
                    terms.append(losses.cluster_instance_loss(
                        feats, assigns, hyper.tau))
                l_cluster = losses.cluster_aware_loss(*terms) \
                    if len(terms) == 2 else terms[0]
                total = losses.total_loss(l_self, l_cluster,
                                          hyper.lambda_weight)
                epoch_cluster += float(l_cluster.data)
                n_cluster_terms += 1
            else:
                total = l_self

            if not np.isfinite(total.data):
                raise NumericError(
                    f"non-finite loss at epoch {epoch}, batch {b}")
            total.backward()
            _sgd_step(all_params, lr)
            epoch_self += float(l_self.data)

        result.metrics.append({
            "epoch": epoch,
            "lr": lr,
            "l_self": epoch_self / n_batches,
            "l_cluster": (epoch_cluster / n_cluster_terms
                          if n_cluster_terms else float("nan")),
            "refit": int(refit_now or (config.update_per_batch and
                                       epoch >= config.warmup_epochs and
                                       cluster_on)),
            "config_hash": cfg_hash,
        })

    if config.epochs_total in probe_epochs:
        result.snapshots[config.epochs_total] = serialize_checkpoint(
            encoder, projection, state, config)
    result.cluster_state = state
    return result


def data_augment(rows, seed_seq, config):
    seed = int(np.asarray(seed_seq.generate_state(1))[0])
    return augment(rows, seed, noise_sigma=config.aug_noise,
                   mask_prob=config.aug_mask_prob, gain=config.aug_gain)


def write_metrics(metrics, path):
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=["epoch", "lr", "l_self", "l_cluster",
                                          "refit", "config_hash"])
        w.writeheader()
        for row in metrics:
            w.writerow(row)


# ---- evaluation ----

def evaluate(result, bundle, score_kind=None, k_top=None):
    """Score ID test and every OOD set against the training-feature bank."""
    config = result.config
    score_kind = score_kind or config.score_kind
    k_top = k_top or config.k_top
    if bundle.id_train.shape[1] != config.d_in:
        raise ConfigError(
            f"bundle dimension {bundle.id_train.shape[1]} does not match "
            f"config d_in {config.d_in}")
    feats = lambda x: _layer_features_np(result.encoder, result.projection,
                                         x, config.score_layer)
    bank = scoring.ReferenceBank(feats(bundle.id_train))
    ood = {name: feats(rows) for name, rows in bundle.ood_sets.items()}
    return scoring.build_report(bank, feats(bundle.id_test), ood, score_kind,
                                k_top=k_top, config_hash=config.hash())


def mean_max_center_similarity(result, bundle):
    """Mean over ID test samples of max cosine similarity to any center."""
    if result.cluster_state is None:
        raise ConfigError("checkpoint has no cluster state")
    feats = _layer_features_np(result.encoder, result.projection,
                               bundle.id_test, result.cluster_state.layer)
    feats = feats / np.linalg.norm(feats, axis=1, keepdims=True)
    centers = result.cluster_state.centers
    centers = centers / np.linalg.norm(centers, axis=1, keepdims=True)
    return float(np.mean(np.max(feats @ centers.T, axis=1)))


def export_features(result, bundle, layer, path):
    """Write every set's features at the chosen layer as one labeled CSV."""
    if layer not in ("embedding", "projection"):
        raise ConfigError(f"unknown layer {layer!r}")
    sets = [("id_train", bundle.id_train), ("id_test", bundle.id_test)]
    sets += [(name, bundle.ood_sets[name]) for name in sorted(bundle.ood_sets)]
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        for name, rows in sets:
            feats = _layer_features_np(result.encoder, result.projection,
                                       rows, layer)
            for row in feats:
                w.writerow([name] + [repr(float(x)) for x in row])
