"""Epsilon-insensitive support vector regression and the feature-set harness.

The regressor solves the standard eps-SVR dual quadratic program with a
Gaussian kernel by sequential minimal optimization on maximal-violating
pairs, stopping when the KKT gap (the spread between the tightest lower and
upper bounds on the bias multiplier) falls below a tolerance. Features are
always standardized on the training split; targets are not touched, so
shifting every target by a constant shifts only the bias.

The comparison harness trains one model per documented feature subset and
scores each by pooled leave-one-out predictions, mirroring how sparse
per-layer roughness data has to be evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .analytics import LayerFeatureRecord, PredictionMetrics, prediction_metrics
from .pgmio import dump_json, load_json


class ConvergenceError(RuntimeError):
    """Raised when SMO does not reach the KKT tolerance within the cap."""


class FeatureMismatchError(ValueError):
    """Raised when a record does not provide the model's feature set."""


@dataclass(frozen=True)
class SvrHyperparams:
    """Box constraint C, tube half-width epsilon, Gaussian kernel width gamma.

    ``gamma_kernel`` of None selects 1/d for d standardized features.
    """

    c: float = 10.0
    epsilon: float = 0.5
    gamma_kernel: float | None = None

    def __post_init__(self):
        if self.c <= 0:
            raise ValueError("C must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if self.gamma_kernel is not None and self.gamma_kernel <= 0:
            raise ValueError("gamma must be positive")


def epsilon_loss(y: float, y_hat: float, eps: float) -> float:
    """Tube loss: 0 inside the eps band, |error| - eps outside (0 at the edge)."""
    if eps < 0:
        raise ValueError("epsilon must be >= 0")
    err = abs(y - y_hat)
    if err < eps:
        return 0.0
    return err - eps


FEATURE_SETS = (
    "PVHS",
    "PVHS+angle",
    "PVHS+count",
    "VED",
    "VED+angle",
    "COUNT",
    "VED+count",
)

_FEATURE_COLUMNS = {
    "PVHS": ("power_w", "speed_mm_s", "hatch_space_mm"),
    "PVHS+angle": ("power_w", "speed_mm_s", "hatch_space_mm", "hatch_angle_deg"),
    "PVHS+count": ("power_w", "speed_mm_s", "hatch_space_mm", "mean_spatter_count"),
    "VED": ("ved",),
    "VED+angle": ("ved", "hatch_angle_deg"),
    "COUNT": ("mean_spatter_count",),
    "VED+count": ("ved", "mean_spatter_count"),
}


def extract_features(records: Sequence[LayerFeatureRecord], feature_set: str) -> np.ndarray:
    if feature_set not in _FEATURE_COLUMNS:
        raise FeatureMismatchError(f"unknown feature set {feature_set!r}")
    cols = _FEATURE_COLUMNS[feature_set]
    return np.array([[getattr(r, c) for c in cols] for r in records], dtype=float)


def _rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(axis=2)
    return np.exp(-gamma * d2)


@dataclass
class SvrModel:
    """Trained regressor: standardized support inputs and dual coefficients."""

    support_inputs: np.ndarray
    dual_coef: np.ndarray
    bias: float
    hyperparams: SvrHyperparams
    gamma: float
    feature_means: np.ndarray
    feature_scales: np.ndarray
    feature_set: str = ""

    def standardize(self, x: np.ndarray) -> np.ndarray:
        return (x - self.feature_means) / self.feature_scales

    def to_dict(self) -> dict:
        return {
            "schema_version": 1,
            "feature_set": self.feature_set,
            "c": self.hyperparams.c,
            "epsilon": self.hyperparams.epsilon,
            "gamma": self.gamma,
            "bias": self.bias,
            "dual_coef": [float(v) for v in self.dual_coef],
            "support_inputs": [[float(v) for v in row] for row in self.support_inputs],
            "feature_means": [float(v) for v in self.feature_means],
            "feature_scales": [float(v) for v in self.feature_scales],
        }

    @staticmethod
    def from_dict(data: dict) -> "SvrModel":
        if data.get("schema_version") != 1:
            raise ValueError("unsupported SVR model schema")
        return SvrModel(
            support_inputs=np.array(data["support_inputs"], dtype=float),
            dual_coef=np.array(data["dual_coef"], dtype=float),
            bias=float(data["bias"]),
            hyperparams=SvrHyperparams(
                c=data["c"], epsilon=data["epsilon"], gamma_kernel=data["gamma"]
            ),
            gamma=float(data["gamma"]),
            feature_means=np.array(data["feature_means"], dtype=float),
            feature_scales=np.array(data["feature_scales"], dtype=float),
            feature_set=data.get("feature_set", ""),
        )


def save_model(path: str | Path, model: SvrModel) -> None:
    dump_json(model.to_dict(), path)


def load_model(path: str | Path) -> SvrModel:
    return SvrModel.from_dict(load_json(path))


def train_svr(
    x: np.ndarray,
    y: Sequence[float],
    hp: SvrHyperparams = SvrHyperparams(),
    tol: float = 1e-6,
    max_iter: int = 200_000,
    feature_set: str = "",
) -> SvrModel:
    """Fit eps-SVR by SMO on the dual, to a KKT gap below ``tol``.

    Working pairs are the maximal violating pair over both dual blocks; the
    bias comes from averaging the KKT bias bound over margin support
    vectors, falling back to the midpoint of the bound interval when no
    coefficient is strictly inside the box.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(list(y), dtype=float)
    n, d = x.shape
    if n < 1 or n != y.size:
        raise ValueError("need matching, non-empty inputs and targets")

    means = x.mean(axis=0)
    scales = x.std(axis=0)
    scales[scales == 0.0] = 1.0
    xs = (x - means) / scales
    gamma = hp.gamma_kernel if hp.gamma_kernel is not None else 1.0 / d

    # Solve with centered targets; the bias absorbs the offset afterwards.
    # The optimal duals are unchanged by a target shift, and centering keeps
    # the solver's arithmetic independent of any large common offset.
    y_center = float(y.mean())
    y = y - y_center

    kernel = _rbf_kernel(xs, xs, gamma)
    c, eps = hp.c, hp.epsilon
    alpha = np.zeros(n)
    alpha_star = np.zeros(n)
    v = np.zeros(n)  # v = K @ (alpha - alpha_star)

    last_gap = math.inf
    for _ in range(max_iter):
        r = y - v
        f_up_a = np.where(alpha < c, r - eps, -np.inf)
        f_up_s = np.where(alpha_star > 0, r + eps, -np.inf)
        f_lo_a = np.where(alpha > 0, r - eps, np.inf)
        f_lo_s = np.where(alpha_star < c, r + eps, np.inf)

        up_a, up_s = int(np.argmax(f_up_a)), int(np.argmax(f_up_s))
        lo_a, lo_s = int(np.argmin(f_lo_a)), int(np.argmin(f_lo_s))
        if f_up_a[up_a] >= f_up_s[up_s]:
            b_lo, i_idx, i_star = f_up_a[up_a], up_a, False
        else:
            b_lo, i_idx, i_star = f_up_s[up_s], up_s, True
        if f_lo_a[lo_a] <= f_lo_s[lo_s]:
            b_hi, j_idx, j_star = f_lo_a[lo_a], lo_a, False
        else:
            b_hi, j_idx, j_star = f_lo_s[lo_s], lo_s, True

        last_gap = b_lo - b_hi
        if last_gap < tol:
            break

        eta = kernel[i_idx, i_idx] + kernel[j_idx, j_idx] - 2.0 * kernel[i_idx, j_idx]
        step = last_gap / eta if eta > 1e-12 else math.inf
        # Box room along the direction: beta_i grows by t, beta_j shrinks.
        room_i = (alpha_star[i_idx]) if i_star else (c - alpha[i_idx])
        room_j = (c - alpha_star[j_idx]) if j_star else (alpha[j_idx])
        t = min(step, room_i, room_j)
        if t <= 0:
            raise ConvergenceError(
                f"SMO stalled with KKT gap {last_gap:.3e} (eta {eta:.3e})"
            )
        if i_star:
            alpha_star[i_idx] -= t
        else:
            alpha[i_idx] += t
        if j_star:
            alpha_star[j_idx] += t
        else:
            alpha[j_idx] -= t
        v += t * (kernel[:, i_idx] - kernel[:, j_idx])
    else:
        raise ConvergenceError(
            f"no convergence after {max_iter} iterations; KKT gap {last_gap:.3e}"
        )

    beta = alpha - alpha_star
    r = y - v
    margin_bias: list[float] = []
    interior = 1e-8 * c
    for a_i, s_i, r_i in zip(alpha, alpha_star, r):
        if interior < a_i < c - interior:
            margin_bias.append(r_i - eps)
        elif interior < s_i < c - interior:
            margin_bias.append(r_i + eps)
    if margin_bias:
        bias = float(np.mean(margin_bias))
    else:
        f_up = np.maximum(
            np.where(alpha < c, r - eps, -np.inf), np.where(alpha_star > 0, r + eps, -np.inf)
        )
        f_lo = np.minimum(
            np.where(alpha > 0, r - eps, np.inf), np.where(alpha_star < c, r + eps, np.inf)
        )
        bias = float((f_up.max() + f_lo.min()) / 2.0)
    bias += y_center

    return SvrModel(
        support_inputs=xs,
        dual_coef=beta,
        bias=bias,
        hyperparams=hp,
        gamma=gamma,
        feature_means=means,
        feature_scales=scales,
        feature_set=feature_set,
    )


def predict(model: SvrModel, x: np.ndarray) -> np.ndarray:
    """Evaluate the regressor on raw-feature rows (standardized internally)."""
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.shape[1] != model.support_inputs.shape[1]:
        raise FeatureMismatchError(
            f"model expects {model.support_inputs.shape[1]} features, got {x.shape[1]}"
        )
    k = _rbf_kernel(model.standardize(x), model.support_inputs, model.gamma)
    out = k @ model.dual_coef + model.bias
    return out[0] if single else out


def predict_records(model: SvrModel, records: Sequence[LayerFeatureRecord]) -> np.ndarray:
    if not model.feature_set:
        raise FeatureMismatchError("model carries no feature-set id")
    return np.atleast_1d(predict(model, extract_features(records, model.feature_set)))


def loo_predictions(
    records: Sequence[LayerFeatureRecord],
    feature_set: str,
    hp: SvrHyperparams = SvrHyperparams(),
) -> np.ndarray:
    """Leave-one-out predictions over records sorted by (bar, layer)."""
    ordered = sorted(records, key=lambda r: (r.bar_id, r.layer_index))
    x = extract_features(ordered, feature_set)
    y = np.array([r.sa_um for r in ordered])
    n = len(ordered)
    preds = np.empty(n)
    for i in range(n):
        mask = np.arange(n) != i
        model = train_svr(x[mask], y[mask], hp, feature_set=feature_set)
        preds[i] = predict(model, x[i])
    return preds


@dataclass(frozen=True)
class ModelComparisonRow:
    feature_set: str
    metrics: PredictionMetrics


def compare_models(
    records: Sequence[LayerFeatureRecord],
    hp: SvrHyperparams = SvrHyperparams(),
    feature_sets: Sequence[str] = FEATURE_SETS,
) -> list[ModelComparisonRow]:
    """Score every feature subset by pooled leave-one-out prediction error.

    Records are ordered internally, so the table does not depend on input
    order. Requires at least 8 records for the folds to be meaningful.
    """
    if len(records) < 8:
        raise ValueError("model comparison needs at least 8 records")
    ordered = sorted(records, key=lambda r: (r.bar_id, r.layer_index))
    truth = [r.sa_um for r in ordered]
    rows = []
    for fs in feature_sets:
        preds = loo_predictions(ordered, fs, hp)
        rows.append(ModelComparisonRow(fs, prediction_metrics(preds, truth)))
    return rows


def write_comparison_csv(path: str | Path, rows: Sequence[ModelComparisonRow]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_input", "rmse_um", "mae_um", "mre_percent"])
        for row in rows:
            mre = "" if row.metrics.mre_percent is None else f"{row.metrics.mre_percent:.4f}"
            writer.writerow(
                [row.feature_set, f"{row.metrics.rmse:.4f}", f"{row.metrics.mae:.4f}", mre]
            )
