"""Shared container for fitted linear projections.

Every fitting routine in the package (the convex centroid objective,
Fisher LDA, PCA) returns a ProjectionModel: a d x p matrix A applied as
A.T @ X, optionally after centering by a stored training mean. The JSON
form is the package's on-disk model format.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import FormatError, ShapeError, ValidationError
from .ioutil import canonical_json, atomic_write_text
from .linalg import as_matrix

KNOWN_METHODS = ("convexlda", "fisher_lda", "pca")

# Diagnostics entries that are useful in memory but too bulky for disk.
_TRANSIENT_DIAGNOSTICS = ("cost_trace",)


@dataclass
class ProjectionModel:
    """A fitted linear embedding.

    Attributes
    ----------
    method : str
        One of "convexlda", "fisher_lda", "pca".
    A : numpy.ndarray
        Projection matrix, shape (d, p); columns are embedding directions.
    params : dict
        Method parameters the fit actually used.
    train_mean : numpy.ndarray or None
        Per-feature training mean, shape (d,). When present, transform
        subtracts it before projecting (PCA models carry one).
    train_scale : numpy.ndarray or None
        Per-feature divisor applied after centering, shape (d,). Set when
        the model was fitted on standardized data; requires train_mean.
    diagnostics : dict
        Method-specific fit diagnostics.
    class_names : tuple of str or None
        Label names of the training data, index-aligned with labels.
    """

    method: str
    A: np.ndarray
    params: dict = field(default_factory=dict)
    train_mean: np.ndarray | None = None
    train_scale: np.ndarray | None = None
    diagnostics: dict = field(default_factory=dict)
    class_names: tuple | None = None

    def __post_init__(self):
        if self.method not in KNOWN_METHODS:
            raise ValidationError(
                f"unknown method {self.method!r}, expected one of {KNOWN_METHODS}"
            )
        self.A = as_matrix(self.A, "A")
        self.train_mean = self._feature_vector(self.train_mean, "train_mean")
        self.train_scale = self._feature_vector(self.train_scale, "train_scale")
        if self.train_scale is not None:
            if self.train_mean is None:
                raise ValidationError("train_scale requires train_mean")
            if np.any(self.train_scale == 0.0):
                raise ValidationError("train_scale entries must be non-zero")
        if self.class_names is not None:
            self.class_names = tuple(str(c) for c in self.class_names)

    def _feature_vector(self, values, name: str):
        if values is None:
            return None
        vec = np.ascontiguousarray(values, dtype=np.float64).ravel()
        if vec.size != self.A.shape[0]:
            raise ShapeError(f"{name} has {vec.size} entries, expected {self.A.shape[0]}")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"{name} contains NaN or infinite entries")
        return vec

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.A.shape[1]

    def transform(self, X) -> np.ndarray:
        return transform(self, X)


def transform(model: ProjectionModel, X) -> np.ndarray:
    """Embed samples-as-columns data X (d x n) into p dimensions.

    Replays the model's stored preprocessing first (centering by the
    training mean, then scaling when present), then applies A.T. Raises
    ShapeError if X's dimension does not match the model.
    """
    X = as_matrix(X, "X")
    if X.shape[0] != model.d:
        raise ShapeError(f"X has {X.shape[0]} features, model expects {model.d}")
    if model.train_mean is not None:
        X = X - model.train_mean[:, None]
        if model.train_scale is not None:
            X = X / model.train_scale[:, None]
    return model.A.T @ X


def model_to_dict(model: ProjectionModel) -> dict:
    """Plain-dict form of a model, ready for JSON serialization."""
    diagnostics = {
        k: v for k, v in model.diagnostics.items() if k not in _TRANSIENT_DIAGNOSTICS
    }
    if model.train_scale is not None:
        preprocessing = {
            "type": "standardize",
            "parameters": {
                "mean": model.train_mean.tolist(),
                "scale": model.train_scale.tolist(),
            },
        }
    elif model.train_mean is not None:
        preprocessing = {"type": "center", "parameters": {"mean": model.train_mean.tolist()}}
    else:
        preprocessing = {"type": "none", "parameters": {}}
    lam = model.params.get("lambda")
    gamma = model.params.get("gamma")
    return {
        "method": model.method,
        "d": model.d,
        "p": model.p,
        "lambda": None if lam is None else float(lam),
        "gamma": None if gamma is None else float(gamma),
        "A": [float(v) for v in model.A.ravel(order="C")],
        "class_names": None if model.class_names is None else list(model.class_names),
        "diagnostics": diagnostics,
        "preprocessing": preprocessing,
        "params": dict(model.params),
    }


def model_from_dict(doc: dict) -> ProjectionModel:
    """Rebuild a model from its dict form, validating shape and finiteness."""
    if not isinstance(doc, dict):
        raise FormatError("model document must be a JSON object")
    for key in ("method", "d", "p", "A"):
        if key not in doc:
            raise FormatError(f"model document is missing required key {key!r}")
    method = doc["method"]
    try:
        d = int(doc["d"])
        p = int(doc["p"])
    except (TypeError, ValueError) as exc:
        raise FormatError(f"model dimensions are not integers: {exc}") from exc
    flat = doc["A"]
    if not isinstance(flat, list) or len(flat) != d * p:
        raise FormatError(
            f"A must be a flat row-major list of {d}*{p}={d * p} numbers, "
            f"got length {len(flat) if isinstance(flat, list) else 'non-list'}"
        )
    A = np.asarray(flat, dtype=np.float64).reshape(d, p)
    params = dict(doc.get("params") or {})
    if doc.get("lambda") is not None:
        params.setdefault("lambda", float(doc["lambda"]))
    if doc.get("gamma") is not None:
        params.setdefault("gamma", float(doc["gamma"]))
    train_mean = None
    train_scale = None
    preprocessing = doc.get("preprocessing") or {}
    kind = preprocessing.get("type", "none")
    if kind in ("center", "standardize"):
        pp = preprocessing.get("parameters", {})
        mean = pp.get("mean")
        if mean is None:
            raise FormatError(f"{kind} preprocessing block is missing its mean")
        train_mean = np.asarray(mean, dtype=np.float64)
        if kind == "standardize":
            scale = pp.get("scale")
            if scale is None:
                raise FormatError("standardize preprocessing block is missing its scale")
            train_scale = np.asarray(scale, dtype=np.float64)
    elif kind != "none":
        raise FormatError(f"unknown preprocessing type {kind!r}")
    class_names = doc.get("class_names")
    return ProjectionModel(
        method=method,
        A=A,
        params=params,
        train_mean=train_mean,
        train_scale=train_scale,
        diagnostics=dict(doc.get("diagnostics") or {}),
        class_names=None if class_names is None else tuple(class_names),
    )


def model_json(model: ProjectionModel, extra: dict | None = None) -> str:
    """Canonical JSON text for a model; extra top-level keys (for example
    a provenance block) may be merged in."""
    doc = model_to_dict(model)
    if extra:
        doc.update(extra)
    return canonical_json(doc)


def save_model(model: ProjectionModel, path, extra: dict | None = None) -> None:
    atomic_write_text(path, model_json(model, extra))


def load_model(path) -> ProjectionModel:
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"model file {path} is not valid JSON: {exc}") from exc
    return model_from_dict(doc)
