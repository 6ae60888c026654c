"""Dataset container, loaders, splits, and feature preprocessing.

Data is stored samples-as-columns: X has shape (d, n) for d features and
n samples, labels are dense integers 0..M-1. Loaders record the original
label strings in class_names so reports can speak the user's names.
"""

from __future__ import annotations

import csv
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError, ParseError, ShapeError, ValidationError
from .ioutil import atomic_write_text, write_json
from .linalg import as_matrix, sym_eig
from .projection import ProjectionModel

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

# Features with standard deviation below this are treated as constant.
STD_FLOOR = 1e-12


@dataclass(frozen=True)
class Dataset:
    """Labeled samples-as-columns data.

    Attributes
    ----------
    X : numpy.ndarray
        Feature matrix, shape (d, n), finite float64.
    labels : numpy.ndarray
        Shape (n,), integers 0..M-1 with every class represented.
    feature_names : tuple of str or None
    class_names : tuple of str or None
        Index-aligned with label values.
    """

    X: np.ndarray
    labels: np.ndarray
    feature_names: tuple | None = None
    class_names: tuple | None = None

    def __post_init__(self):
        X = as_matrix(self.X, "X")
        labels = np.ascontiguousarray(self.labels)
        if labels.ndim != 1:
            raise ShapeError(f"labels must be 1-D, got ndim={labels.ndim}")
        if labels.shape[0] != X.shape[1]:
            raise ShapeError(
                f"got {labels.shape[0]} labels for {X.shape[1]} samples"
            )
        if not np.issubdtype(labels.dtype, np.integer):
            as_int = labels.astype(np.int64)
            if not np.array_equal(as_int, labels):
                raise ValidationError("labels must be integers")
            labels = as_int
        labels = labels.astype(np.int64)
        if labels.min() < 0:
            raise ValidationError("labels must be non-negative")
        m = int(labels.max()) + 1
        counts = np.bincount(labels, minlength=m)
        if np.any(counts == 0):
            missing = np.flatnonzero(counts == 0).tolist()
            raise ValidationError(
                f"labels must be dense 0..{m - 1}; classes {missing} have no samples"
            )
        X.flags.writeable = False
        labels.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        if self.feature_names is not None:
            names = tuple(str(v) for v in self.feature_names)
            if len(names) != X.shape[0]:
                raise ShapeError(
                    f"got {len(names)} feature names for {X.shape[0]} features"
                )
            object.__setattr__(self, "feature_names", names)
        if self.class_names is not None:
            names = tuple(str(v) for v in self.class_names)
            if len(names) != m:
                raise ShapeError(f"got {len(names)} class names for {m} classes")
            object.__setattr__(self, "class_names", names)

    @property
    def n_features(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1

    def subset(self, indices) -> "Dataset":
        """New Dataset holding the given sample columns, in the given order.

        The selection must still cover every class (splits produced by the
        stratified helpers always do).
        """
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.X[:, idx],
            self.labels[idx],
            feature_names=self.feature_names,
            class_names=self.class_names,
        )

    def class_name(self, j: int) -> str:
        return self.class_names[j] if self.class_names is not None else str(j)


def select_classes(ds: Dataset, classes) -> Dataset:
    """Keep only the listed classes, relabeled 0..k-1 in the given order."""
    classes = [int(c) for c in classes]
    if len(set(classes)) != len(classes) or not classes:
        raise ValidationError("classes must be a non-empty list of distinct labels")
    for c in classes:
        if c < 0 or c >= ds.n_classes:
            raise ValidationError(f"class {c} is out of range 0..{ds.n_classes - 1}")
    new_label = {c: i for i, c in enumerate(classes)}
    keep = np.flatnonzero(np.isin(ds.labels, classes))
    labels = np.array([new_label[int(v)] for v in ds.labels[keep]], dtype=np.int64)
    names = None
    if ds.class_names is not None:
        names = tuple(ds.class_names[c] for c in classes)
    else:
        names = tuple(str(c) for c in classes)
    return Dataset(ds.X[:, keep], labels, feature_names=ds.feature_names, class_names=names)


@dataclass(frozen=True)
class SplitPlan:
    """Index sets of one train/test split."""

    train_indices: np.ndarray
    test_indices: np.ndarray
    seed: int
    train_fraction: float

    def __post_init__(self):
        train = np.ascontiguousarray(self.train_indices, dtype=np.int64)
        test = np.ascontiguousarray(self.test_indices, dtype=np.int64)
        train.flags.writeable = False
        test.flags.writeable = False
        object.__setattr__(self, "train_indices", train)
        object.__setattr__(self, "test_indices", test)
        if not 0.0 < self.train_fraction < 1.0:
            raise ValidationError(
                f"train_fraction must lie in (0, 1), got {self.train_fraction}"
            )
        overlap = np.intersect1d(train, test)
        if overlap.size:
            raise ValidationError(f"split indices overlap: {overlap[:5].tolist()}...")


def split_dataset(ds: Dataset, plan: SplitPlan) -> tuple[Dataset, Dataset]:
    """Materialize (train, test) Datasets from a split plan."""
    return ds.subset(plan.train_indices), ds.subset(plan.test_indices)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for an isotropic Gaussian-blob dataset.

    Class means are drawn uniformly from [-mean_box, mean_box]^dim, each
    class gets an isotropic normal cloud of class_std, and n_total samples
    are assigned to classes as evenly as possible (earlier classes take the
    remainder).
    """

    n_classes: int
    dim: int
    n_total: int
    class_std: float
    mean_box: float = 50.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 1:
            raise ValidationError(f"n_classes must be >= 1, got {self.n_classes}")
        if self.dim < 1:
            raise ValidationError(f"dim must be >= 1, got {self.dim}")
        if self.n_total < self.n_classes:
            raise ValidationError(
                f"n_total must be >= n_classes, got {self.n_total} < {self.n_classes}"
            )
        if not self.class_std > 0.0:
            raise ValidationError(f"class_std must be > 0, got {self.class_std}")
        if not self.mean_box > 0.0:
            raise ValidationError(f"mean_box must be > 0, got {self.mean_box}")


def synth_gaussian(spec: SyntheticSpec) -> Dataset:
    """Deterministic Gaussian-blob dataset from a SyntheticSpec."""
    rng = np.random.default_rng(spec.seed)
    means = rng.uniform(-spec.mean_box, spec.mean_box, size=(spec.dim, spec.n_classes))
    base, rem = divmod(spec.n_total, spec.n_classes)
    blocks = []
    labels = []
    for j in range(spec.n_classes):
        size = base + (1 if j < rem else 0)
        blocks.append(means[:, j : j + 1] + spec.class_std * rng.standard_normal((spec.dim, size)))
        labels.extend([j] * size)
    X = np.concatenate(blocks, axis=1)
    return Dataset(X, np.asarray(labels, dtype=np.int64))


def _float_cell(text: str, row: int, col: int) -> float:
    try:
        value = float(text)
    except ValueError as exc:
        raise ParseError(f"row {row}, column {col}: {text!r} is not a number") from exc
    if not math.isfinite(value):
        raise ParseError(f"row {row}, column {col}: non-finite value {text!r}")
    return value


def load_csv(
    path,
    label_column,
    delimiter: str = ",",
    has_header: bool | None = None,
) -> Dataset:
    """Load a delimited text file into a Dataset.

    Each row is one sample. The label column is named (requires a header
    row) or given as a zero-based index. String labels map to dense
    integers by first appearance; the original strings land in
    class_names. With ``has_header=None`` and an integer label column, a
    header is assumed when the first row has any non-numeric feature cell.

    Raises ParseError (bad cell, ragged row), ValidationError (missing
    column, single class, no data), or OSError (unreadable file).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as handle:
        rows = list(csv.reader(handle, delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise ValidationError(f"{path} contains no data rows")

    feature_names = None
    if isinstance(label_column, str):
        header = rows[0]
        if label_column not in header:
            raise ValidationError(
                f"label column {label_column!r} not found in header {header}"
            )
        label_idx = header.index(label_column)
        data_rows = rows[1:]
        first_row = 2
        feature_names = tuple(c for i, c in enumerate(header) if i != label_idx)
    else:
        label_idx = int(label_column)
        if has_header is None:
            probe = rows[0]
            has_header = False
            for i, cell in enumerate(probe):
                if i == label_idx:
                    continue
                try:
                    float(cell)
                except ValueError:
                    has_header = True
                    break
        if has_header:
            header = rows[0]
            data_rows = rows[1:]
            first_row = 2
            if 0 <= label_idx < len(header):
                feature_names = tuple(c for i, c in enumerate(header) if i != label_idx)
        else:
            data_rows = rows
            first_row = 1

    if not data_rows:
        raise ValidationError(f"{path} contains no data rows")
    width = len(data_rows[0])
    if not 0 <= label_idx < width:
        raise ValidationError(
            f"label column index {label_idx} is out of range for {width} columns"
        )
    if width < 2:
        raise ValidationError("rows must have at least one feature besides the label")

    class_ids: dict[str, int] = {}
    columns = []
    labels = []
    for r, row in enumerate(data_rows, start=first_row):
        if len(row) != width:
            raise ParseError(f"row {r}: expected {width} cells, got {len(row)}")
        sample = [
            _float_cell(cell, r, c + 1)
            for c, cell in enumerate(row)
            if c != label_idx
        ]
        name = row[label_idx].strip()
        if name not in class_ids:
            class_ids[name] = len(class_ids)
        labels.append(class_ids[name])
        columns.append(sample)

    if len(class_ids) < 2:
        raise ValidationError(f"{path} contains a single class; need at least two")
    X = np.asarray(columns, dtype=np.float64).T
    class_names = tuple(class_ids)  # insertion order == first appearance
    return Dataset(X, np.asarray(labels, dtype=np.int64), feature_names, class_names)


def _read_exact(data: bytes, offset: int, count: int, path, what: str) -> bytes:
    end = offset + count
    if end > len(data):
        raise FormatError(
            f"{path} is truncated: needed {count} bytes for {what}, "
            f"had {len(data) - offset}"
        )
    return data[offset:end]


def load_idx(images_path, labels_path, scale: bool = True) -> Dataset:
    """Load an IDX image/label file pair (the classic digit-image format).

    Big-endian headers are verified against the expected magic numbers.
    Images flatten row-major to one column per sample; pixel values are
    scaled to [0, 1] unless ``scale`` is false. Label values are mapped to
    dense 0..M-1 in sorted order, original values kept in class_names.
    """
    images_path = Path(images_path)
    labels_path = Path(labels_path)
    img_bytes = images_path.read_bytes()
    lab_bytes = labels_path.read_bytes()

    header = _read_exact(img_bytes, 0, 16, images_path, "image header")
    magic, count, n_rows, n_cols = struct.unpack(">IIII", header)
    if magic != IDX_IMAGE_MAGIC:
        raise FormatError(
            f"{images_path}: bad image magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
        )
    pixels = _read_exact(img_bytes, 16, count * n_rows * n_cols, images_path, "pixel data")

    header = _read_exact(lab_bytes, 0, 8, labels_path, "label header")
    magic, lab_count = struct.unpack(">II", header)
    if magic != IDX_LABEL_MAGIC:
        raise FormatError(
            f"{labels_path}: bad label magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
        )
    raw_labels = _read_exact(lab_bytes, 8, lab_count, labels_path, "label data")
    if lab_count != count:
        raise ValidationError(
            f"image/label count mismatch: {count} images vs {lab_count} labels"
        )
    if count == 0:
        raise ValidationError(f"{images_path} contains no images")

    X = np.frombuffer(pixels, dtype=np.uint8).reshape(count, n_rows * n_cols).T
    X = X.astype(np.float64)
    if scale:
        X = X / 255.0
    values = np.frombuffer(raw_labels, dtype=np.uint8).astype(np.int64)
    unique = np.unique(values)
    dense = np.searchsorted(unique, values)
    return Dataset(X, dense, class_names=tuple(str(v) for v in unique))


def save_dataset(ds: Dataset, path, delimiter: str = ",", extra_meta: dict | None = None) -> None:
    """Write a Dataset as CSV (one sample per row, label last) plus a JSON
    sidecar `<name>.json` recording shape and label names, so a reload
    reproduces the exact same labels."""
    path = Path(path)
    names = ds.feature_names or tuple(f"x{i}" for i in range(ds.n_features))
    lines = [delimiter.join([*names, "label"])]
    for i in range(ds.n_samples):
        cells = [repr(float(v)) for v in ds.X[:, i]]
        cells.append(ds.class_name(int(ds.labels[i])))
        lines.append(delimiter.join(cells))
    atomic_write_text(path, "\n".join(lines) + "\n")
    meta = {
        "d": ds.n_features,
        "n": ds.n_samples,
        "M": ds.n_classes,
        "class_names": [ds.class_name(j) for j in range(ds.n_classes)],
        "label_column": "label",
        "delimiter": delimiter,
    }
    if extra_meta:
        meta.update(extra_meta)
    write_json(_sidecar_path(path), meta)


def _sidecar_path(path: Path) -> Path:
    return path.with_name(path.name + ".json")


def load_dataset(path, label_column="label", delimiter: str = ",") -> Dataset:
    """Load a CSV dataset, honoring a save_dataset sidecar when present.

    The sidecar pins the label column, delimiter, and class-name order, so
    a save/load round trip preserves label integers exactly even when the
    first-appearance order of labels differs.
    """
    path = Path(path)
    sidecar = _sidecar_path(path)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        ds = load_csv(
            path,
            meta.get("label_column", label_column),
            delimiter=meta.get("delimiter", delimiter),
        )
        wanted = [str(c) for c in meta["class_names"]]
        if ds.class_names is not None and list(ds.class_names) != wanted:
            current = {name: j for j, name in enumerate(ds.class_names)}
            missing = [c for c in wanted if c not in current]
            if missing or len(wanted) != len(current):
                raise ValidationError(
                    f"sidecar class names {wanted} do not match data classes "
                    f"{list(ds.class_names)}"
                )
            remap = np.empty(len(wanted), dtype=np.int64)
            for new_id, name in enumerate(wanted):
                remap[current[name]] = new_id
            ds = Dataset(ds.X, remap[ds.labels], ds.feature_names, tuple(wanted))
        if ds.n_features != meta["d"] or ds.n_samples != meta["n"]:
            raise ValidationError(
                f"sidecar says {meta['d']}x{meta['n']}, file has "
                f"{ds.n_features}x{ds.n_samples}"
            )
        return ds
    return load_csv(path, label_column, delimiter=delimiter)


def stratified_split(ds: Dataset, train_fraction: float, seed: int) -> SplitPlan:
    """Per-class random split: floor(train_fraction * class size) samples
    of every class go to train, the rest to test.

    Every class needs at least two samples, and train_fraction must leave
    each class with at least one training sample.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValidationError(f"train_fraction must lie in (0, 1), got {train_fraction}")
    rng = np.random.default_rng(seed)
    train: list[int] = []
    test: list[int] = []
    for j in range(ds.n_classes):
        idx = np.flatnonzero(ds.labels == j)
        if idx.size < 2:
            raise ValidationError(
                f"class {ds.class_name(j)} has {idx.size} sample(s); need >= 2 to split"
            )
        idx = idx[rng.permutation(idx.size)]
        # Tiny epsilon keeps exact products like 0.7*10 from flooring to 6.
        n_train = math.floor(train_fraction * idx.size + 1e-9)
        if n_train == 0:
            raise ValidationError(
                f"train_fraction {train_fraction} leaves class {ds.class_name(j)} "
                "with no training samples"
            )
        train.extend(idx[:n_train].tolist())
        test.extend(idx[n_train:].tolist())
    return SplitPlan(
        np.sort(np.asarray(train, dtype=np.int64)),
        np.sort(np.asarray(test, dtype=np.int64)),
        seed=seed,
        train_fraction=train_fraction,
    )


def kfold_indices(n: int, labels, k: int, seed: int) -> list[SplitPlan]:
    """Stratified k-fold plans: per-class shuffled indices are dealt
    round-robin into k folds; fold i is the test set of plan i.

    Requires k >= 2 and every class to have at least k samples.
    """
    if k < 2:
        raise ValidationError(f"k must be >= 2, got {k}")
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != n:
        raise ShapeError(f"labels must be 1-D of length {n}")
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for j in range(int(labels.max()) + 1):
        idx = np.flatnonzero(labels == j)
        if idx.size < k:
            raise ValidationError(
                f"class {j} has {idx.size} sample(s); need >= k={k} for k-fold"
            )
        idx = idx[rng.permutation(idx.size)]
        for pos, sample in enumerate(idx.tolist()):
            folds[pos % k].append(sample)
    plans = []
    for f in range(k):
        test = np.sort(np.asarray(folds[f], dtype=np.int64))
        train = np.sort(
            np.asarray([i for g in range(k) if g != f for i in folds[g]], dtype=np.int64)
        )
        plans.append(
            SplitPlan(train, test, seed=seed, train_fraction=1.0 - 1.0 / k)
        )
    return plans


def pca_reduce(ds: Dataset, variance_kept: float) -> tuple[Dataset, ProjectionModel]:
    """Project onto the smallest leading eigenspace of the feature
    covariance that retains at least ``variance_kept`` of total variance.

    Works in the n x n Gram form when d > n so wide data never builds a
    d x d matrix. variance_kept = 1.0 keeps the full covariance rank. The
    returned model stores the training mean, so transforming test data
    centers it with training statistics only.
    """
    if not 0.0 < variance_kept <= 1.0:
        raise ValidationError(f"variance_kept must lie in (0, 1], got {variance_kept}")
    if ds.n_samples < 2:
        raise ValidationError("PCA needs at least two samples")
    X = ds.X
    d, n = X.shape
    mean = X.mean(axis=1, keepdims=True)
    Xc = X - mean
    denom = float(n - 1)
    if d <= n:
        eig = sym_eig((Xc @ Xc.T) / denom)
        evals = eig.eigenvalues
        evecs = eig.eigenvectors
    else:
        eig = sym_eig((Xc.T @ Xc) / denom)
        evals = eig.eigenvalues
        keep = evals > 0.0
        scale = np.sqrt(np.where(keep, evals * denom, 1.0))
        evecs = (Xc @ eig.eigenvectors) / scale
        evecs[:, ~keep] = 0.0
    evals = np.clip(evals, 0.0, None)
    total = float(evals.sum())
    if total <= 0.0:
        raise ValidationError("data has zero variance; nothing to reduce")
    rank_tol = evals[0] * max(d, n) * np.finfo(np.float64).eps
    rank = int(np.count_nonzero(evals > rank_tol))
    rank = max(rank, 1)
    if variance_kept >= 1.0:
        k = rank
    else:
        fractions = np.cumsum(evals) / total
        k = int(np.searchsorted(fractions, variance_kept) + 1)
        k = min(k, rank)
    A = np.ascontiguousarray(evecs[:, :k])
    # Pin eigenvector sign: largest-magnitude entry of each column positive.
    for col in range(k):
        lead = np.argmax(np.abs(A[:, col]))
        if A[lead, col] < 0.0:
            A[:, col] = -A[:, col]
    retained = float(evals[:k].sum() / total)
    model = ProjectionModel(
        method="pca",
        A=A,
        params={"variance_kept": float(variance_kept)},
        train_mean=mean.ravel(),
        diagnostics={
            "k": k,
            "rank": rank,
            "retained_variance": retained,
            "eigenvalues": [float(v) for v in evals[:k]],
        },
        class_names=ds.class_names,
    )
    reduced = Dataset(
        model.transform(X),
        ds.labels,
        feature_names=tuple(f"pc{i}" for i in range(k)),
        class_names=ds.class_names,
    )
    return reduced, model


def standardize(ds: Dataset) -> tuple[Dataset, np.ndarray, np.ndarray]:
    """Center each feature and scale to unit standard deviation.

    Features with std below 1e-12 are centered only and their recorded
    std is 1, so the transform stays invertible. Returns the standardized
    Dataset plus the (mean, std) actually applied.
    """
    mean = ds.X.mean(axis=1)
    std = ds.X.std(axis=1)
    std = np.where(std < STD_FLOOR, 1.0, std)
    Z = (ds.X - mean[:, None]) / std[:, None]
    out = Dataset(Z, ds.labels, ds.feature_names, ds.class_names)
    return out, mean, std
