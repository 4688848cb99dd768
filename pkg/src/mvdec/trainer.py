"""Training orchestration: pretraining, fine-tuning rounds, run reports.

The full procedure is:

1. Pretrain one autoencoder per view on reconstruction alone (Adam).
2. Initialize per-view cluster centroids with k-means on the embeddings.
3. Rounds: build a target distribution, record diagnostics, stop once the
   fraction of examples on which every view's hard prediction agrees
   exceeds ``aligned_stop``, otherwise fine-tune each view for a fixed
   number of batches and repeat.
4. Predict by averaging the per-view soft assignments.

In the default ``sdmvc`` mode the target is shared across views: each
round, the current embeddings are min-max scaled, concatenated, clustered
with k-means, converted to soft similarities against the global centroids,
and sharpened.  Baselines: ``idec_per_view`` sharpens each view's own
soft assignments (no shared target, no consensus), ``no_utd`` trains the
same way but still predicts by consensus, and ``no_ssm`` sharpens
similarities computed once from the scaled raw features, so its target
never moves.

Per-view fine-tuning jobs are independent; set MVDEC_THREADS to a positive
integer to run them in a thread pool (results are identical either way).
"""

from __future__ import annotations

import copy
import dataclasses
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import backend, clustering, dataio, metrics, nn, target

logger = logging.getLogger("mvdec.trainer")

MODES = ("sdmvc", "idec_per_view", "no_utd", "no_ssm")
SCHEMA_VERSION = 1

# seed-stream tags, one per consumer of randomness
_TAG_BUILD = 1
_TAG_PRETRAIN = 2
_TAG_GLOBAL_KMEANS = 3
_TAG_BATCHES = 4
_TAG_VIEW_KMEANS = 5


class TrainingError(RuntimeError):
    """Raised when a run dies mid-flight; carries the partial report."""

    def __init__(self, message: str, report: dict | None = None):
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class TrainingConfig:
    """Hyperparameters for one training run."""

    k: int
    mode: str = "sdmvc"
    gamma: float = 0.1
    batch_size: int = 256
    pretrain_epochs: int = 500
    finetune_batches_per_round: int | None = 1000
    aligned_stop: float = 0.90
    max_rounds: int = 50
    seed: int = 0
    embed_dim: int = 10
    hidden_dims: tuple[int, ...] = (500, 500, 2000)
    learning_rate: float = 0.001
    kmeans_restarts: int = 10

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(d) for d in self.hidden_dims))
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; expected one of {MODES}")
        if self.k < 2:
            raise ValueError("k must be >= 2")
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.pretrain_epochs < 0:
            raise ValueError("pretrain_epochs must be >= 0")
        if self.finetune_batches_per_round is not None and self.finetune_batches_per_round < 1:
            raise ValueError("finetune_batches_per_round must be >= 1 or None")
        if not 0.0 <= self.aligned_stop <= 1.0:
            raise ValueError("aligned_stop must lie in [0, 1]")
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be >= 1")
        if self.embed_dim < 1:
            raise ValueError("embed_dim must be >= 1")
        if not self.hidden_dims or any(d < 1 for d in self.hidden_dims):
            raise ValueError("hidden_dims must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.kmeans_restarts < 1:
            raise ValueError("kmeans_restarts must be >= 1")

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["hidden_dims"] = list(self.hidden_dims)
        return d


def _rng(seed: int, *tags: int) -> np.random.Generator:
    """Independent generator for one (seed, tag path) combination."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(t) for t in tags]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _seed_int(seed: int, *tags: int) -> int:
    """Stable 32-bit sub-seed for components that take plain int seeds."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF] + [int(t) for t in tags]
    return int(np.random.SeedSequence(entropy).generate_state(1)[0])


def view_kmeans_seed(seed: int, view: int) -> int:
    """Seed used for view `view`'s centroid-initialization k-means."""
    return _seed_int(seed, _TAG_VIEW_KMEANS, view)


# ---------------------------------------------------------------------------
# phases
# ---------------------------------------------------------------------------


@dataclass
class PretrainResult:
    models: list[nn.AutoencoderModel]
    loss_curves: list[list[float]]
    final_losses: list[float]
    seconds: float = 0.0


def build_models(dataset: dataio.MultiViewDataset, config: TrainingConfig):
    return [
        nn.build_autoencoder(
            dim,
            embed_dim=config.embed_dim,
            hidden_dims=config.hidden_dims,
            seed=_rng(config.seed, _TAG_BUILD, v),
        )
        for v, dim in enumerate(dataset.dims)
    ]


def _epoch_batches(n: int, batch_size: int, perm: np.ndarray):
    for start in range(0, n, batch_size):
        yield perm[start : start + batch_size]


def pretrain(dataset: dataio.MultiViewDataset, config: TrainingConfig) -> PretrainResult:
    """Train each view's autoencoder on reconstruction loss alone.

    Epoch curves record the mean per-example loss of the batches as they
    were trained.  Zero epochs returns freshly initialized models.
    """
    t0 = time.perf_counter()
    models = build_models(dataset, config)
    curves: list[list[float]] = []
    finals: list[float] = []
    for v, (model, x) in enumerate(zip(models, dataset.views)):
        params = nn.model_parameters(model)
        opt = nn.adam_init(params, learning_rate=config.learning_rate)
        curve = []
        n = x.shape[0]
        for epoch in range(config.pretrain_epochs):
            perm = _rng(config.seed, _TAG_PRETRAIN, v, epoch).permutation(n)
            total = 0.0
            for ids in _epoch_batches(n, config.batch_size, perm):
                xb = x[ids]
                state = nn.forward_autoencoder(model, xb)
                total += nn.reconstruction_loss(xb, state.x_hat)
                d_xhat = (2.0 / xb.shape[0]) * (state.x_hat - xb)
                nn.adam_step(opt, params, nn.backward_autoencoder(model, state, d_xhat))
            curve.append(total / n)
        curves.append(curve)
        finals.append(nn.mean_reconstruction_loss(x, nn.decode(model, nn.encode(model, x))))
        logger.info("pretrained view %d: loss %.6f", v, finals[-1])
    return PretrainResult(models, curves, finals, seconds=time.perf_counter() - t0)


def init_view_centroids(models, dataset, k: int, seed: int, restarts: int = 10):
    """K-means on each view's embeddings; returns one layer per view."""
    layers = []
    for v, (model, x) in enumerate(zip(models, dataset.views)):
        z = nn.encode(model, x)
        result = target.kmeans(z, k, seed=view_kmeans_seed(seed, v), restarts=restarts)
        layers.append(clustering.ClusteringLayer(result.centroids.copy()))
    return layers


def aligned_rate(predictions) -> float:
    """Fraction of examples on which every view predicts the same cluster."""
    stacked = np.vstack([np.asarray(p, dtype=np.int64).ravel() for p in predictions])
    if stacked.shape[1] == 0:
        raise ValueError("predictions are empty")
    return float(np.mean(np.all(stacked == stacked[0], axis=0)))


def consensus_predict(q_list) -> np.ndarray:
    """Argmax of the view-averaged soft assignments."""
    mean_q = np.mean(np.stack([np.asarray(q, dtype=np.float64) for q in q_list]), axis=0)
    return clustering.hard_predict(mean_q)


def _batch_schedule(n: int, batch_size: int, n_batches: int, rng) -> list[np.ndarray]:
    """Shuffled epoch-style batch ids, repeated until n_batches are drawn."""
    batches: list[np.ndarray] = []
    while len(batches) < n_batches:
        perm = rng.permutation(n)
        for ids in _epoch_batches(n, batch_size, perm):
            batches.append(ids)
            if len(batches) == n_batches:
                break
    return batches


def _finetune_view(model, layer, opt, params, x, p, batches, gamma):
    """One view's fine-tuning pass over a fixed batch schedule.

    Encoder parameters follow the reconstruction gradient plus gamma times
    the clustering gradient, decoder parameters follow reconstruction
    alone, and centroids follow the bare clustering gradient; every batch
    gradient is scaled by the batch size.
    """
    for ids in batches:
        xb = x[ids]
        nb = xb.shape[0]
        state = nn.forward_autoencoder(model, xb)
        q = clustering.soft_assign(state.z, layer)
        pb = p[ids]
        d_xhat = (2.0 / nb) * (state.x_hat - xb)
        d_z = (gamma / nb) * clustering.grad_embeddings(state.z, layer, pb, q)
        grads = nn.backward_autoencoder(model, state, d_xhat, d_z)
        grads.append(clustering.grad_centroids(state.z, layer, pb, q) / nb)
        nn.adam_step(opt, params, grads)


def finetune_phase(models, layers, opts, params_lists, dataset, targets, batches, gamma, threads=0):
    """Run `_finetune_view` for every view, sequentially or in a pool."""
    for p in targets:
        p.setflags(write=False)
    jobs = [
        (models[v], layers[v], opts[v], params_lists[v], dataset.views[v], targets[v], batches, gamma)
        for v in range(dataset.v)
    ]
    if threads > 0 and dataset.v > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            list(pool.map(lambda job: _finetune_view(*job), jobs))
    else:
        for job in jobs:
            _finetune_view(*job)


def _matched_drift(current: np.ndarray, previous: np.ndarray | None) -> float | None:
    """Mean distance between centroids matched one-to-one across rounds."""
    if previous is None or previous.shape != current.shape:
        return None
    d2 = np.sum((current[:, None, :] - previous[None, :, :]) ** 2, axis=2)
    rows, cols = linear_sum_assignment(d2)
    return float(np.mean(np.sqrt(d2[rows, cols])))


def _label_metrics(pred, truth) -> dict:
    return {
        "acc": metrics.acc(pred, truth),
        "nmi": metrics.nmi(pred, truth),
        "ari": metrics.ari(pred, truth),
    }


def _pairwise_q_diff(q_list) -> float | None:
    if len(q_list) < 2:
        return None
    diffs = []
    for a in range(len(q_list)):
        for b in range(a + 1, len(q_list)):
            diffs.append(float(np.mean(np.abs(q_list[a] - q_list[b]))))
    return float(np.mean(diffs))


def strip_timing(obj):
    """Copy of a report with every timing field removed (for comparisons)."""
    if isinstance(obj, dict):
        return {
            k: strip_timing(v)
            for k, v in obj.items()
            if k != "timing" and not k.endswith("_seconds")
        }
    if isinstance(obj, list):
        return [strip_timing(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# the round loop
# ---------------------------------------------------------------------------


@dataclass
class TrainingResult:
    report: dict
    models: list
    layers: list
    per_view_labels: list[np.ndarray]
    consensus_labels: np.ndarray | None


def _fixed_raw_target(dataset, config) -> np.ndarray:
    """Sharpened similarities of the scaled raw feature concatenation."""
    gf = target.scale_and_concat(dataset.views)
    km = target.kmeans(
        gf.values, config.k, seed=_seed_int(config.seed, _TAG_GLOBAL_KMEANS, 0),
        restarts=config.kmeans_restarts,
    )
    return target.sharpen(target.pseudo_assign(gf, km))


def run_training(
    dataset: dataio.MultiViewDataset,
    config: TrainingConfig,
    pretrained: PretrainResult | None = None,
) -> TrainingResult:
    """Full pipeline; returns models, per-view and consensus labels, report.

    Raises TrainingError (carrying the partial report) if a phase fails.
    """
    if config.batch_size > dataset.n:
        raise ValueError("batch_size exceeds dataset size")
    threads = int(os.environ.get("MVDEC_THREADS", "0") or "0")
    t_start = time.perf_counter()
    report: dict = {
        "schema_version": SCHEMA_VERSION,
        "mode": config.mode,
        "dataset": {"name": dataset.name, "n": dataset.n, "dims": list(dataset.dims)},
        "config": config.to_dict(),
        "backend": backend.get_backend(),
        "threads": threads,
        "notes": [],
        "pretrain": None,
        "rounds": [],
        "stop_reason": None,
        "final": None,
        "incomplete": True,
        "timing": {"total_seconds": None},
    }
    try:
        result = _run_training_inner(dataset, config, report, pretrained, threads)
    except Exception as exc:
        report["stop_reason"] = "error"
        report["notes"].append(f"error: {exc}")
        report["timing"]["total_seconds"] = time.perf_counter() - t_start
        raise TrainingError(str(exc), report) from exc
    report["incomplete"] = False
    report["timing"]["total_seconds"] = time.perf_counter() - t_start
    return result


def _run_training_inner(dataset, config, report, pretrained, threads):
    truth = dataset.labels
    if pretrained is None:
        pretrained = pretrain(dataset, config)
        models = pretrained.models
    else:
        # keep the caller's models intact; fine-tuning mutates in place
        models = copy.deepcopy(pretrained.models)
    report["pretrain"] = {
        "epochs": config.pretrain_epochs,
        "loss_curves": [[float(x) for x in c] for c in pretrained.loss_curves],
        "final_losses": [float(x) for x in pretrained.final_losses],
        "pretrain_seconds": pretrained.seconds,
    }

    layers = init_view_centroids(
        models, dataset, config.k, config.seed, restarts=config.kmeans_restarts
    )
    params_lists = [
        nn.model_parameters(m) + [layer.centroids] for m, layer in zip(models, layers)
    ]
    opts = [
        nn.adam_init(params, learning_rate=config.learning_rate)
        for params in params_lists
    ]

    n_batches = config.finetune_batches_per_round
    if n_batches is None:
        n_batches = math.ceil(dataset.n / config.batch_size)

    fixed_target = None
    if config.mode == "no_ssm":
        fixed_target = _fixed_raw_target(dataset, config)
        report["notes"].append(
            "target built once from scaled raw features and never refreshed"
        )

    prev_global = None
    stop_reason = "max_rounds"
    for rnd in range(config.max_rounds):
        t0 = time.perf_counter()
        z_list = [nn.encode(m, x) for m, x in zip(models, dataset.views)]
        q_list = [clustering.soft_assign(z, layer) for z, layer in zip(z_list, layers)]
        preds = [clustering.hard_predict(q) for q in q_list]
        rate = aligned_rate(preds)

        drift = None
        zero_cols: list[int] = []
        if config.mode == "sdmvc":
            gf = target.scale_and_concat(z_list)
            km = target.kmeans(
                gf.values,
                config.k,
                seed=_seed_int(config.seed, _TAG_GLOBAL_KMEANS, rnd),
                restarts=config.kmeans_restarts,
            )
            s = target.pseudo_assign(gf, km)
            zero_cols = np.flatnonzero(target.column_frequencies(s) <= 0.0).tolist()
            shared = target.sharpen(s)
            targets = [shared] * dataset.v
            drift = _matched_drift(km.centroids, prev_global)
            prev_global = km.centroids
        elif config.mode == "no_ssm":
            targets = [fixed_target] * dataset.v
        else:  # idec_per_view, no_utd
            targets = []
            for q in q_list:
                zero_cols.extend(
                    np.flatnonzero(target.column_frequencies(q) <= 0.0).tolist()
                )
                targets.append(target.sharpen(q))
            zero_cols = sorted(set(zero_cols))

        record = {
            "round": rnd,
            "aligned_rate": rate,
            "reconstruction_loss": [
                nn.mean_reconstruction_loss(x, nn.decode(m, z))
                for m, x, z in zip(models, dataset.views, z_list)
            ],
            "clustering_loss": [
                clustering.kl_clustering_loss(p, q) / dataset.n
                for p, q in zip(targets, q_list)
            ],
            "pairwise_q_diff": _pairwise_q_diff(q_list),
            "centroid_drift": drift,
            "zero_frequency_columns": zero_cols,
            "per_view": [_label_metrics(p, truth) for p in preds] if truth is not None else None,
            "consensus": (
                _label_metrics(consensus_predict(q_list), truth)
                if truth is not None and config.mode != "idec_per_view"
                else None
            ),
            "timing": {"target_seconds": time.perf_counter() - t0, "finetune_seconds": None},
        }
        report["rounds"].append(record)
        logger.info(
            "round %d: aligned %.3f, recon %s", rnd, rate,
            ["%.5f" % x for x in record["reconstruction_loss"]],
        )

        if rate > config.aligned_stop:
            stop_reason = "aligned_threshold"
            break

        t1 = time.perf_counter()
        batches = _batch_schedule(
            dataset.n, config.batch_size, n_batches, _rng(config.seed, _TAG_BATCHES, rnd)
        )
        finetune_phase(
            models, layers, opts, params_lists, dataset, targets, batches,
            config.gamma, threads=threads,
        )
        record["timing"]["finetune_seconds"] = time.perf_counter() - t1

    report["stop_reason"] = stop_reason

    z_list = [nn.encode(m, x) for m, x in zip(models, dataset.views)]
    q_list = [clustering.soft_assign(z, layer) for z, layer in zip(z_list, layers)]
    per_view_labels = [clustering.hard_predict(q) for q in q_list]
    consensus = None if config.mode == "idec_per_view" else consensus_predict(q_list)
    report["final"] = {
        "rounds_run": len(report["rounds"]),
        "aligned_rate": aligned_rate(per_view_labels),
        "per_view": [_label_metrics(p, truth) for p in per_view_labels] if truth is not None else None,
        "consensus": (
            _label_metrics(consensus, truth)
            if truth is not None and consensus is not None
            else None
        ),
    }
    return TrainingResult(report, models, layers, per_view_labels, consensus)


def train_sdmvc(dataset, config: TrainingConfig) -> TrainingResult:
    """Train with the shared self-supervised target (mode must be sdmvc)."""
    if config.mode != "sdmvc":
        raise ValueError(f"train_sdmvc requires mode 'sdmvc', got {config.mode!r}")
    return run_training(dataset, config)


def train_baseline(dataset, config: TrainingConfig) -> TrainingResult:
    """Train one of the ablation baselines (idec_per_view, no_utd, no_ssm)."""
    if config.mode == "sdmvc":
        raise ValueError("train_baseline expects a baseline mode, not 'sdmvc'")
    return run_training(dataset, config)
