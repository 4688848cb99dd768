"""Multi-view dataset format, synthetic generator, and run artifacts.

A dataset lives in a directory with a ``manifest.json``::

    {
      "name": "...", "n": 1000,
      "views": [{"file": "view0.bin", "dims": 20, "format": "binary"}],
      "labels_file": "labels.csv",        # optional
      "scale": false,
      "checksums": {"view0.bin": "<sha256>", ...}
    }

Binary view files carry a 16-byte header -- magic ``MVDS`` (4 bytes),
u32 rows, u32 cols, u32 reserved (zero) -- followed by rows*cols
little-endian float64 values in row-major order.  CSV views are plain
comma-separated numbers written with 17 significant digits so that
save/load round-trips are exact.

Synthetic data is drawn from a splitmix64 stream (Vigna's published
constants, see `PortableRng`) with Box-Muller Gaussians, so generated
datasets are bit-reproducible across platforms and languages.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels, nn, target

MAGIC = b"MVDS"
_HEADER = struct.Struct("<4sIII")
MANIFEST_NAME = "manifest.json"


class DatasetError(Exception):
    """Base class for dataset load/save failures."""


class MissingFileError(DatasetError):
    pass


class DimensionMismatchError(DatasetError):
    pass


class ChecksumError(DatasetError):
    pass


class FeatureRangeError(DatasetError):
    pass


# ---------------------------------------------------------------------------
# portable RNG
# ---------------------------------------------------------------------------

_MASK = np.uint64(0xFFFFFFFFFFFFFFFF)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0**-53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def splitmix64(seed: int, count: int, offset: int = 0) -> np.ndarray:
    """`count` outputs of the splitmix64 stream seeded with `seed`.

    Output i (0-based, after `offset`) is mix(seed + (offset+i+1) *
    0x9E3779B97F4A7C15), identical to repeatedly stepping the reference
    generator.
    """
    idx = np.arange(offset + 1, offset + count + 1, dtype=np.uint64)
    return _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN)


def child_seed(seed: int, tag: int) -> int:
    """Derive an independent substream seed (the tag-th master output)."""
    return int(splitmix64(seed, 1, offset=tag)[0])


class PortableRng:
    """Deterministic 64-bit generator: splitmix64 plus Box-Muller normals."""

    def __init__(self, seed: int):
        self._seed = int(seed) & 0xFFFFFFFFFFFFFFFF
        self._consumed = 0

    def raw(self, count: int) -> np.ndarray:
        out = splitmix64(self._seed, count, offset=self._consumed)
        self._consumed += count
        return out

    def uniforms(self, count: int) -> np.ndarray:
        """float64 values in [0, 1): top 53 bits over 2^53."""
        return (self.raw(count) >> np.uint64(11)).astype(np.float64) * _U53

    def normals(self, count: int) -> np.ndarray:
        """Standard normals via Box-Muller; consumes 2*ceil(count/2) raws."""
        m = (count + 1) // 2
        u1 = ((self.raw(m) >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * _U53
        u2 = (self.raw(m) >> np.uint64(11)).astype(np.float64) * _U53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * np.pi * u2
        return np.concatenate([radius * np.cos(angle), radius * np.sin(angle)])[:count]

    def permutation(self, count: int) -> np.ndarray:
        """Permutation of range(count) by sorting one raw key per index."""
        return np.argsort(self.raw(count), kind="stable")


# ---------------------------------------------------------------------------
# dataset containers
# ---------------------------------------------------------------------------


@dataclass
class MultiViewDataset:
    """Aligned per-view feature matrices with optional ground-truth labels."""

    views: list[np.ndarray]
    labels: np.ndarray | None = None
    name: str = "dataset"

    def __post_init__(self):
        if not self.views:
            raise DatasetError("dataset needs at least one view")
        self.views = [np.asarray(v, dtype=np.float64) for v in self.views]
        n = self.views[0].shape[0]
        for i, v in enumerate(self.views):
            if v.ndim != 2:
                raise DimensionMismatchError(f"view {i} is not 2-D")
            if v.shape[0] != n:
                raise DimensionMismatchError(
                    f"view {i} has {v.shape[0]} rows, expected {n}"
                )
            if v.size and (v.min() < 0.0 or v.max() > 1.0):
                raise FeatureRangeError(f"view {i} has entries outside [0, 1]")
        if self.labels is not None:
            self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
            if self.labels.size != n:
                raise DimensionMismatchError("labels length does not match rows")
            if self.labels.size and self.labels.min() < 0:
                raise DatasetError("labels must be non-negative")

    @property
    def n(self) -> int:
        return self.views[0].shape[0]

    @property
    def v(self) -> int:
        return len(self.views)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(view.shape[1] for view in self.views)


# ---------------------------------------------------------------------------
# synthetic generator
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticSpec:
    """Cluster-prototype generator spec; one noise level per view."""

    n: int
    k: int
    dims: tuple[int, ...]
    noise_per_view: tuple[float, ...]
    separation: float = 1.0
    seed: int = 0
    name: str = "synthetic"

    def __post_init__(self):
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        object.__setattr__(
            self, "noise_per_view", tuple(float(s) for s in self.noise_per_view)
        )
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.n < 2 * self.k:
            raise ValueError("need n >= 2k examples")
        if not self.dims or len(self.dims) != len(self.noise_per_view):
            raise ValueError("dims and noise_per_view must align, one entry per view")
        if any(d < 1 for d in self.dims):
            raise ValueError("view dims must be positive")
        if any(s < 0 for s in self.noise_per_view):
            raise ValueError("noise levels must be non-negative")
        if self.separation <= 0:
            raise ValueError("separation must be positive")


PRESETS = {
    "noisy-view": dict(
        n=1000,
        k=4,
        dims=(20, 20, 20),
        noise_per_view=(0.05, 0.05, 0.60),
        separation=1.0,
        name="noisy-view",
    ),
}


def preset_spec(name: str, seed: int = 0) -> SyntheticSpec:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; have {sorted(PRESETS)}")
    return SyntheticSpec(seed=seed, **PRESETS[name])


def generate_synthetic(spec: SyntheticSpec) -> MultiViewDataset:
    """Gaussian blobs around per-view prototypes, scaled to [0, 1].

    Labels are balanced within one example per cluster and shuffled.
    Substreams (master stream `spec.seed`): tag 0 shuffles labels, tags
    1+2v / 2+2v draw view v's prototypes and noise.  Values are clipped
    at +/- 2.5 noise standard deviations around the prototype range
    before per-column min-max scaling.
    """
    counts = np.full(spec.k, spec.n // spec.k, dtype=np.int64)
    counts[: spec.n % spec.k] += 1
    sorted_labels = np.repeat(np.arange(spec.k), counts)
    perm = PortableRng(child_seed(spec.seed, 0)).permutation(spec.n)
    labels = sorted_labels[perm]

    views = []
    for v, (dim, sigma) in enumerate(zip(spec.dims, spec.noise_per_view)):
        proto_rng = PortableRng(child_seed(spec.seed, 1 + 2 * v))
        noise_rng = PortableRng(child_seed(spec.seed, 2 + 2 * v))
        prototypes = spec.separation * proto_rng.uniforms(spec.k * dim).reshape(
            spec.k, dim
        )
        x = prototypes[labels]
        if sigma > 0:
            x = x + sigma * noise_rng.normals(spec.n * dim).reshape(spec.n, dim)
        x = np.clip(x, -2.5 * sigma, spec.separation + 2.5 * sigma)
        views.append(kernels.minmax_columns(x))
    return MultiViewDataset(views, labels=labels, name=spec.name)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def write_view_binary(path, mat) -> None:
    mat = np.ascontiguousarray(np.asarray(mat, dtype=np.float64))
    rows, cols = mat.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols, 0))
        fh.write(mat.astype("<f8").tobytes(order="C"))


def read_view_binary(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise DimensionMismatchError(f"{path}: truncated header")
    magic, rows, cols, _ = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise DatasetError(f"{path}: bad magic {magic!r}")
    data = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if data.size != rows * cols:
        raise DimensionMismatchError(
            f"{path}: header says {rows}x{cols}, found {data.size} values"
        )
    return data.reshape(rows, cols).astype(np.float64)


def _write_view_csv(path, mat) -> None:
    np.savetxt(path, np.asarray(mat, dtype=np.float64), delimiter=",", fmt="%.17g")


def _read_view_csv(path) -> np.ndarray:
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=np.float64))


def write_labels(path, labels) -> None:
    np.savetxt(path, np.asarray(labels, dtype=np.int64), fmt="%d")


def read_labels(path) -> np.ndarray:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing labels file {path}")
    data = np.loadtxt(path, dtype=np.int64, ndmin=1)
    return data.ravel()


def save_dataset(dataset: MultiViewDataset, path, fmt: str = "binary") -> Path:
    """Write manifest, view files, and labels; returns the directory."""
    if fmt not in ("binary", "csv"):
        raise ValueError(f"unknown format {fmt!r}")
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    views_meta = []
    checksums = {}
    for i, view in enumerate(dataset.views):
        fname = f"view{i}.bin" if fmt == "binary" else f"view{i}.csv"
        fpath = path / fname
        if fmt == "binary":
            write_view_binary(fpath, view)
        else:
            _write_view_csv(fpath, view)
        views_meta.append({"file": fname, "dims": int(view.shape[1]), "format": fmt})
        checksums[fname] = _sha256(fpath)
    manifest = {
        "name": dataset.name,
        "n": int(dataset.n),
        "views": views_meta,
        "scale": False,
        "checksums": checksums,
    }
    if dataset.labels is not None:
        write_labels(path / "labels.csv", dataset.labels)
        manifest["labels_file"] = "labels.csv"
        manifest["checksums"]["labels.csv"] = _sha256(path / "labels.csv")
    with open(path / MANIFEST_NAME, "w") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    return path


def load_dataset(path) -> MultiViewDataset:
    """Load a dataset directory, verifying checksums and declared shapes."""
    path = Path(path)
    manifest_path = path / MANIFEST_NAME
    if not manifest_path.exists():
        raise MissingFileError(f"no {MANIFEST_NAME} in {path}")
    manifest = json.loads(manifest_path.read_text())
    for key in ("name", "n", "views", "scale", "checksums"):
        if key not in manifest:
            raise DatasetError(f"manifest missing key {key!r}")
    n = int(manifest["n"])
    checksums = manifest["checksums"]

    def _checked(fname: str) -> Path:
        fpath = path / fname
        if not fpath.exists():
            raise MissingFileError(f"missing file {fpath}")
        if fname in checksums and _sha256(fpath) != checksums[fname]:
            raise ChecksumError(f"checksum mismatch for {fname}")
        return fpath

    views = []
    for meta in manifest["views"]:
        fpath = _checked(meta["file"])
        mat = read_view_binary(fpath) if meta["format"] == "binary" else _read_view_csv(fpath)
        if mat.shape != (n, int(meta["dims"])):
            raise DimensionMismatchError(
                f"{meta['file']}: expected {(n, meta['dims'])}, found {mat.shape}"
            )
        if manifest["scale"]:
            mat = kernels.minmax_columns(mat)
        elif mat.size and (mat.min() < 0.0 or mat.max() > 1.0):
            raise FeatureRangeError(f"{meta['file']}: entries outside [0, 1]")
        views.append(mat)

    labels = None
    if manifest.get("labels_file"):
        labels = read_labels(_checked(manifest["labels_file"]))
        if labels.size != n:
            raise DimensionMismatchError("labels length does not match manifest n")
    return MultiViewDataset(views, labels=labels, name=manifest["name"])


# ---------------------------------------------------------------------------
# model persistence and embedding export
# ---------------------------------------------------------------------------


def save_autoencoder(model: nn.AutoencoderModel, path) -> None:
    arrays = {}
    meta = {"input_dim": model.input_dim, "embed_dim": model.embed_dim, "stacks": {}}
    for stack_name, stack in (("enc", model.encoder), ("dec", model.decoder)):
        meta["stacks"][stack_name] = [layer.activation for layer in stack]
        for i, layer in enumerate(stack):
            arrays[f"{stack_name}_{i}_w"] = layer.weights
            arrays[f"{stack_name}_{i}_b"] = layer.biases
    np.savez(path, meta=json.dumps(meta), **arrays)


def load_autoencoder(path) -> nn.AutoencoderModel:
    path = Path(path)
    if not path.exists():
        raise MissingFileError(f"missing model file {path}")
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"]))
        stacks = {}
        for stack_name, activations in meta["stacks"].items():
            stacks[stack_name] = [
                nn.DenseLayer(
                    data[f"{stack_name}_{i}_w"], data[f"{stack_name}_{i}_b"], act
                )
                for i, act in enumerate(activations)
            ]
    return nn.AutoencoderModel(
        stacks["enc"], stacks["dec"], meta["input_dim"], meta["embed_dim"]
    )


def save_models(models, directory) -> list[Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for v, model in enumerate(models):
        p = directory / f"view{v}.npz"
        save_autoencoder(model, p)
        paths.append(p)
    return paths


def load_models(directory) -> list[nn.AutoencoderModel]:
    directory = Path(directory)
    paths = sorted(directory.glob("view*.npz"))
    if not paths:
        raise MissingFileError(f"no view*.npz models in {directory}")
    return [load_autoencoder(p) for p in paths]


def export_embeddings(models, dataset: MultiViewDataset, path) -> list[Path]:
    """Write per-view embeddings and the concatenated global features as CSV.

    Each file carries a header row naming its columns; the global file has
    one column per embedding dimension across all views.
    """
    if len(models) != dataset.v:
        raise DimensionMismatchError(
            f"{len(models)} models for {dataset.v} views"
        )
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    written = []
    embeddings = []
    for v, (model, view) in enumerate(zip(models, dataset.views)):
        z = nn.encode(model, view)
        embeddings.append(z)
        header = ",".join(f"z{j}" for j in range(z.shape[1]))
        out = path / f"embeddings_view{v}.csv"
        np.savetxt(out, z, delimiter=",", fmt="%.17g", header=header, comments="")
        written.append(out)
    global_features = target.scale_and_concat(embeddings)
    names = []
    for v, (start, stop) in enumerate(global_features.view_offsets):
        names.extend(f"v{v}_z{j}" for j in range(stop - start))
    out = path / "embeddings_global.csv"
    np.savetxt(
        out,
        global_features.values,
        delimiter=",",
        fmt="%.17g",
        header=",".join(names),
        comments="",
    )
    written.append(out)
    return written


# ---------------------------------------------------------------------------
# run reports
# ---------------------------------------------------------------------------


def write_report(report, path) -> Path:
    """Serialize a run report (dict or object with to_dict) as JSON."""
    payload = report.to_dict() if hasattr(report, "to_dict") else report
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    return path


def read_report(path) -> dict:
    return json.loads(Path(path).read_text())
