"""Embedding quality metrics and benchmark protocols.

Point sets follow the package convention of samples-as-columns. The
distance metrics compute explicit coordinate differences (never the
expanded-square shortcut), so duplicated points produce exactly equal
distances and tie-breaking stays well defined.
"""

from __future__ import annotations

import math
import statistics
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset, kfold_indices, pca_reduce, split_dataset, stratified_split
from .errors import NumericError, ShapeError, ValidationError
from .fisher import FisherLdaParams, fit_fisher
from .linalg import as_matrix
from .model import ConvexLdaParams, OptimizerConfig, fit, with_seed
from .projection import ProjectionModel, transform

DEFAULT_LOG_GRID = (1e-3, 1e-2, 1e-1, 1.0, 1e1, 1e2, 1e3)

# Cap on point-block size so pairwise difference tensors stay small.
_CHUNK = 256


def _distance_blocks(A: np.ndarray, B: np.ndarray):
    """Yield (start, block) where block holds Euclidean distances from a
    run of A's columns (starting at ``start``) to every column of B.

    Distances come from explicit coordinate differences, never the
    expanded-square identity, so duplicate points are exactly equidistant.
    """
    if A.shape[0] != B.shape[0]:
        raise ShapeError(
            f"point sets live in different dimensions: {A.shape[0]} vs {B.shape[0]}"
        )
    for start in range(0, A.shape[1], _CHUNK):
        stop = min(start + _CHUNK, A.shape[1])
        diff = A[:, start:stop, None] - B[:, None, :]
        # Squared coordinates accumulate in pinned low-to-high order; a
        # plain per-pair loop reproduces every distance bit for bit.
        sq = diff[0] * diff[0]
        for c in range(1, diff.shape[0]):
            sq = sq + diff[c] * diff[c]
        yield start, np.sqrt(sq)


def _pairwise_distances(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Full (a, b) Euclidean distance matrix between column sets."""
    out = np.empty((A.shape[1], B.shape[1]), dtype=np.float64)
    for start, block in _distance_blocks(A, B):
        out[start : start + block.shape[0]] = block
    return out


def knn_predict(train_Z, train_labels, test_Z, k: int) -> np.ndarray:
    """k-nearest-neighbor labels for test points.

    Euclidean distance; equal distances rank by lower training index
    (stable sort), and vote ties go to the smallest class label.
    """
    train_Z = as_matrix(train_Z, "train_Z")
    test_Z = as_matrix(test_Z, "test_Z")
    labels = np.ascontiguousarray(train_labels, dtype=np.int64)
    if labels.ndim != 1 or labels.shape[0] != train_Z.shape[1]:
        raise ShapeError(
            f"got {labels.shape[0] if labels.ndim == 1 else 'non-1-D'} labels "
            f"for {train_Z.shape[1]} training points"
        )
    if not 1 <= k <= train_Z.shape[1]:
        raise ValidationError(
            f"k must lie in 1..{train_Z.shape[1]} (training size), got {k}"
        )
    n_classes = int(labels.max()) + 1
    pred = np.empty(test_Z.shape[1], dtype=np.int64)
    for start, block in _distance_blocks(test_Z, train_Z):
        for i in range(block.shape[0]):
            nearest = np.argsort(block[i], kind="stable")[:k]
            votes = np.bincount(labels[nearest], minlength=n_classes)
            pred[start + i] = int(np.argmax(votes))
    return pred


def accuracy(predicted, truth) -> float:
    """Fraction of matching labels."""
    predicted = np.ascontiguousarray(predicted)
    truth = np.ascontiguousarray(truth)
    if predicted.shape != truth.shape or predicted.ndim != 1:
        raise ShapeError(
            f"predictions and truth must be 1-D of equal length, "
            f"got {predicted.shape} vs {truth.shape}"
        )
    if predicted.size == 0:
        raise ValidationError("cannot score an empty prediction vector")
    return float(np.mean(predicted == truth))


def loo_knn_accuracy(Z, labels, k: int = 1) -> float:
    """Leave-one-out k-NN accuracy of an embedded labeled set.

    Each point is classified by its k nearest other points, with the same
    tie rules as knn_predict.
    """
    Z = as_matrix(Z, "Z")
    labels = np.ascontiguousarray(labels, dtype=np.int64)
    n = Z.shape[1]
    if labels.shape[0] != n:
        raise ShapeError(f"got {labels.shape[0]} labels for {n} points")
    if not 1 <= k <= n - 1:
        raise ValidationError(f"k must lie in 1..{n - 1} for leave-one-out, got {k}")
    dist = _pairwise_distances(Z, Z)
    np.fill_diagonal(dist, np.inf)
    n_classes = int(labels.max()) + 1
    hits = 0
    for i in range(n):
        nearest = np.argsort(dist[i], kind="stable")[:k]
        votes = np.bincount(labels[nearest], minlength=n_classes)
        hits += int(np.argmax(votes)) == int(labels[i])
    return hits / n


def directed_hausdorff(S1, S2) -> float:
    """max over S1's points of the distance to the closest point of S2.

    Asymmetric by design; callers wanting the symmetric variant take the
    max of both directions. Runs blockwise, so large sets never build the
    full pairwise matrix.
    """
    S1 = as_matrix(S1, "S1")
    S2 = as_matrix(S2, "S2")
    worst = 0.0
    for _, block in _distance_blocks(S1, S2):
        worst = max(worst, float(np.max(np.min(block, axis=1))))
    return worst


def class_scatter(Z) -> float:
    """Mean distance of a point set's columns to their own centroid.

    The centroid coordinates and the final mean both come from math.fsum,
    whose exactly rounded sums do not depend on point order.
    """
    Z = as_matrix(Z, "Z")
    n = Z.shape[1]
    centroid = np.array([math.fsum(row) / n for row in Z.tolist()])
    diff = Z - centroid[:, None]
    sq = diff[0] * diff[0]
    for c in range(1, diff.shape[0]):
        sq = sq + diff[c] * diff[c]
    dists = np.sqrt(sq)
    return math.fsum(dists.tolist()) / n


def mean_set_distance(Zi, Zj) -> float:
    """Mean of all cross-pair distances between two point sets.

    The pair distances accumulate through math.fsum, whose exactly
    rounded result is independent of summation order; the value is
    therefore exactly symmetric in the two arguments.
    """
    Zi = as_matrix(Zi, "Zi")
    Zj = as_matrix(Zj, "Zj")

    def pair_distances():
        for _, block in _distance_blocks(Zi, Zj):
            yield from block.ravel().tolist()

    return math.fsum(pair_distances()) / (Zi.shape[1] * Zj.shape[1])


@dataclass
class EvalReport:
    """Outcome of a repeated split/fit/score protocol.

    per_repeat_accuracy holds successful repeats in repeat order; the
    repeat indices of failed fits are in failed_repeats and partial is set
    when any failed. mean/std are over the sorted successful accuracies
    (std is the sample standard deviation, 0.0 for a single repeat).
    """

    protocol: dict
    per_repeat_accuracy: list
    mean_accuracy: float
    std_accuracy: float
    seeds: list
    failed_repeats: list = field(default_factory=list)
    partial: bool = False

    def to_dict(self) -> dict:
        return {
            "protocol": dict(self.protocol),
            "per_repeat_accuracy": list(self.per_repeat_accuracy),
            "mean_accuracy": self.mean_accuracy,
            "std_accuracy": self.std_accuracy,
            "seeds": list(self.seeds),
            "failed_repeats": list(self.failed_repeats),
            "partial": self.partial,
        }


def _aggregate(values: list) -> tuple[float, float]:
    ordered = sorted(values)
    mean = statistics.fmean(ordered)
    std = statistics.stdev(ordered) if len(ordered) > 1 else 0.0
    return mean, std


def fit_method(
    train: Dataset,
    method: str,
    p: int,
    seed: int,
    *,
    lambda_: float = 1.0,
    gamma: float = 1e-6,
    ridge: float | None = None,
    opt: OptimizerConfig | None = None,
) -> ProjectionModel:
    """Fit one of the supported embedding methods on a training set."""
    if method == "convexlda":
        base = opt or OptimizerConfig()
        return fit(train, ConvexLdaParams(p=p, lambda_=lambda_, gamma=gamma), with_seed(base, seed))
    if method == "fisher_lda":
        return fit_fisher(train, FisherLdaParams(p=p, ridge=ridge))
    raise ValidationError(f"unknown method {method!r}; use 'convexlda' or 'fisher_lda'")


def run_protocol(
    ds: Dataset,
    method: str,
    embedding_dim: int,
    split_fraction: float,
    k_nn: int,
    repeats: int,
    base_seed: int,
    *,
    lambda_: float = 1.0,
    gamma: float = 1e-6,
    ridge: float | None = None,
    opt: OptimizerConfig | None = None,
    pca_variance: float | None = None,
    threads: int = 1,
) -> EvalReport:
    """Repeated stratified split -> fit -> k-NN test accuracy.

    Repeat r uses seed base_seed + r for its split and its fit, so a run
    with R repeats scores exactly like R independent single-repeat runs
    with consecutive seeds. With pca_variance set, each repeat reduces its
    training partition by PCA and maps the test partition through the
    train-side model. Repeats whose fit raises a numeric error are
    recorded in failed_repeats; the report is then flagged partial.

    threads > 1 runs repeats concurrently; results are aggregated in
    repeat order, so the output is identical to the single-threaded run.
    """
    if repeats < 1:
        raise ValidationError(f"repeats must be >= 1, got {repeats}")
    if threads < 1:
        raise ValidationError(f"threads must be >= 1, got {threads}")

    def one_repeat(r: int):
        seed = base_seed + r
        plan = stratified_split(ds, split_fraction, seed)
        train, test = split_dataset(ds, plan)
        test_X = test.X
        if pca_variance is not None:
            train, pca_model = pca_reduce(train, pca_variance)
            test_X = transform(pca_model, test_X)
        model = fit_method(
            train, method, embedding_dim, seed,
            lambda_=lambda_, gamma=gamma, ridge=ridge, opt=opt,
        )
        train_emb = transform(model, train.X)
        test_emb = transform(model, test_X)
        pred = knn_predict(train_emb, train.labels, test_emb, k_nn)
        return accuracy(pred, test.labels)

    def guarded(r: int):
        try:
            return ("ok", one_repeat(r))
        except NumericError as exc:
            return ("failed", str(exc))

    if threads == 1:
        outcomes = [guarded(r) for r in range(repeats)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            outcomes = list(pool.map(guarded, range(repeats)))

    per_repeat = []
    failed = []
    for r, (status, value) in enumerate(outcomes):
        if status == "ok":
            per_repeat.append(value)
        else:
            failed.append(r)
    if not per_repeat:
        raise NumericError(f"all {repeats} repeats failed; last error: {outcomes[-1][1]}")
    mean, std = _aggregate(per_repeat)
    protocol = {
        "method": method,
        "embedding_dim": embedding_dim,
        "split_fraction": split_fraction,
        "k_nn": k_nn,
        "repeats": repeats,
        "base_seed": base_seed,
        "lambda": lambda_ if method == "convexlda" else None,
        "gamma": gamma if method == "convexlda" else None,
        "ridge": ridge if method == "fisher_lda" else None,
        "pca_variance": pca_variance,
    }
    return EvalReport(
        protocol=protocol,
        per_repeat_accuracy=per_repeat,
        mean_accuracy=mean,
        std_accuracy=std,
        seeds=list(range(base_seed, base_seed + repeats)),
        failed_repeats=failed,
        partial=bool(failed),
    )


def _cv_accuracy(
    train: Dataset,
    lambda_: float,
    p: int,
    plans,
    k_nn: int,
    gamma: float,
    opt: OptimizerConfig,
) -> float:
    scores = []
    for f, plan in enumerate(plans):
        fold_train, fold_test = split_dataset(train, plan)
        model = fit(
            fold_train,
            ConvexLdaParams(p=p, lambda_=lambda_, gamma=gamma),
            with_seed(opt, opt.seed + f),
        )
        pred = knn_predict(
            transform(model, fold_train.X), fold_train.labels,
            transform(model, fold_test.X), k_nn,
        )
        scores.append(accuracy(pred, fold_test.labels))
    return statistics.fmean(scores)


def tune_lambda(
    train: Dataset,
    p: int,
    folds: int,
    k_nn: int,
    log_grid=DEFAULT_LOG_GRID,
    refine_steps: int = 10,
    seed: int = 0,
    *,
    gamma: float = 1e-6,
    opt: OptimizerConfig | None = None,
) -> tuple[float, list]:
    """Two-phase cross-validated lambda search.

    Phase 1 scores every value of the (strictly increasing) log grid by
    stratified k-fold CV accuracy. Phase 2 lays refine_steps linear points
    across the interval between the best value's grid neighbors and scores
    those. Returns (best_lambda, curve) where curve is a lambda-sorted
    list of {"lambda", "cv_accuracy"} points covering everything
    evaluated; ties prefer the smaller lambda.
    """
    grid = [float(v) for v in log_grid]
    if len(grid) < 1:
        raise ValidationError("log_grid must contain at least one value")
    if any(not v > 0.0 for v in grid):
        raise ValidationError("lambda grid values must be > 0")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValidationError("log_grid must be strictly increasing")
    if refine_steps < 0:
        raise ValidationError(f"refine_steps must be >= 0, got {refine_steps}")
    base_opt = opt or OptimizerConfig(seed=seed)
    plans = kfold_indices(train.n_samples, train.labels, folds, seed)

    scores: dict[float, float] = {}

    def score(lam: float) -> float:
        if lam not in scores:
            scores[lam] = _cv_accuracy(train, lam, p, plans, k_nn, gamma, base_opt)
        return scores[lam]

    for lam in grid:
        score(lam)
    best = grid[0]
    for lam in grid[1:]:
        if scores[lam] > scores[best]:
            best = lam

    if len(grid) >= 2 and refine_steps >= 1:
        i = grid.index(best)
        lo = grid[i - 1] if i > 0 else grid[0]
        hi = grid[i + 1] if i < len(grid) - 1 else grid[-1]
        for lam in np.linspace(lo, hi, refine_steps):
            score(float(lam))

    evaluated = sorted(scores)
    best = evaluated[0]
    for lam in evaluated[1:]:
        if scores[lam] > scores[best]:
            best = lam
    curve = [{"lambda": lam, "cv_accuracy": scores[lam]} for lam in evaluated]
    return best, curve


@dataclass
class LambdaSweepReport:
    """Geometry metrics of the embedded training set across lambda values.

    One entry per lambda: the fitted cost split (L1, L2), per-class
    scatter, per-unordered-pair mean set distance, per-ordered-pair
    directed Hausdorff distance (plus the symmetric max per unordered
    pair, labeled separately). Failed fits keep their slot with
    failed=True and the error text.
    """

    p: int
    lambdas: list
    entries: list

    def to_dict(self) -> dict:
        return {"p": self.p, "lambdas": list(self.lambdas), "entries": list(self.entries)}

    def csv_rows(self) -> list:
        """Flat (lambda, metric, subject, value) rows for plotting."""
        rows = []
        for entry in self.entries:
            lam = entry["lambda"]
            if entry.get("failed"):
                rows.append((lam, "error", "", entry["error"]))
                continue
            rows.append((lam, "L1", "", entry["L1"]))
            rows.append((lam, "L2", "", entry["L2"]))
            for name, value in entry["class_scatter"].items():
                rows.append((lam, "class_scatter", name, value))
            for name, value in entry["mean_set_distance"].items():
                rows.append((lam, "mean_set_distance", name, value))
            for name, value in entry["directed_hausdorff"].items():
                rows.append((lam, "directed_hausdorff", name, value))
            for name, value in entry["symmetric_hausdorff"].items():
                rows.append((lam, "symmetric_hausdorff", name, value))
        return rows


def sweep_lambda(
    ds: Dataset,
    p: int,
    lambdas,
    *,
    gamma: float = 1e-6,
    opt: OptimizerConfig | None = None,
) -> LambdaSweepReport:
    """Fit the centroid objective at each lambda and measure the embedding.

    Lambdas must be strictly increasing. A fit failure records the error
    for that lambda and the sweep continues.
    """
    lams = [float(v) for v in lambdas]
    if not lams:
        raise ValidationError("lambdas must contain at least one value")
    if any(b <= a for a, b in zip(lams, lams[1:])):
        raise ValidationError("lambdas must be strictly increasing")
    base_opt = opt or OptimizerConfig()
    entries = []
    for lam in lams:
        try:
            model = fit(ds, ConvexLdaParams(p=p, lambda_=lam, gamma=gamma), base_opt)
        except NumericError as exc:
            entries.append({"lambda": lam, "failed": True, "error": str(exc)})
            continue
        Z = transform(model, ds.X)
        per_class = {}
        groups = []
        for j in range(ds.n_classes):
            Zj = Z[:, ds.labels == j]
            groups.append(Zj)
            per_class[ds.class_name(j)] = class_scatter(Zj)
        msd = {}
        haus = {}
        haus_sym = {}
        for i in range(ds.n_classes):
            for j in range(ds.n_classes):
                if i == j:
                    continue
                key = f"{ds.class_name(i)}->{ds.class_name(j)}"
                haus[key] = directed_hausdorff(groups[i], groups[j])
        for i in range(ds.n_classes):
            for j in range(i + 1, ds.n_classes):
                key = f"{ds.class_name(i)}|{ds.class_name(j)}"
                msd[key] = mean_set_distance(groups[i], groups[j])
                haus_sym[key] = max(
                    haus[f"{ds.class_name(i)}->{ds.class_name(j)}"],
                    haus[f"{ds.class_name(j)}->{ds.class_name(i)}"],
                )
        entries.append(
            {
                "lambda": lam,
                "failed": False,
                "L1": model.diagnostics["L1"],
                "L2": model.diagnostics["L2"],
                "final_cost": model.diagnostics["final_cost"],
                "converged": model.diagnostics["converged"],
                "class_scatter": per_class,
                "mean_set_distance": msd,
                "directed_hausdorff": haus,
                "symmetric_hausdorff": haus_sym,
            }
        )
    return LambdaSweepReport(p=p, lambdas=lams, entries=entries)
