"""Exact mutual information on small discrete alphabets (ground truth for the estimator)."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

MAX_JOINT_CELLS = 1 << 16
SUM_TOL = 1e-12


def as_joint_table(p) -> np.ndarray:
    """Validate an nx x ny joint probability table."""
    t = np.asarray(p, dtype=np.float64)
    if t.ndim != 2 or t.size == 0:
        raise ValueError("joint table must be a nonempty 2-D array")
    if not np.isfinite(t).all() or (t < 0).any():
        raise ValueError("joint table entries must be finite and nonnegative")
    if abs(t.sum() - 1.0) > SUM_TOL:
        raise ValueError(f"joint table sums to {t.sum()!r}, not 1")
    return t


def exact_mi(p) -> float:
    """I(X;Y) in nats; zero cells contribute nothing."""
    t = as_joint_table(p)
    px = t.sum(axis=1, keepdims=True)
    py = t.sum(axis=0, keepdims=True)
    nz = t > 0
    ratio = t[nz] / (px @ py)[nz]
    return max(float(np.sum(t[nz] * np.log(ratio))), 0.0)


def entropy(p) -> float:
    p = np.asarray(p, dtype=np.float64).ravel()
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


def joint_counts(xs, ys) -> np.ndarray:
    xs = np.asarray(xs).ravel()
    ys = np.asarray(ys).ravel()
    if xs.shape != ys.shape:
        raise ValueError(f"length mismatch: {xs.size} vs {ys.size}")
    if xs.size == 0:
        raise ValueError("need at least one sample")
    xv, xi = np.unique(xs, return_inverse=True)
    yv, yi = np.unique(ys, return_inverse=True)
    if xv.size * yv.size > MAX_JOINT_CELLS:
        raise ValueError(
            f"alphabets too large: {xv.size} x {yv.size} exceeds {MAX_JOINT_CELLS} cells"
        )
    counts = np.zeros((xv.size, yv.size))
    np.add.at(counts, (xi, yi), 1.0)
    return counts


def plugin_mi_from_samples(xs, ys) -> float:
    """Exact MI of the empirical joint distribution of paired symbols."""
    counts = joint_counts(xs, ys)
    t = counts / counts.sum()
    # renormalize rounding so the table passes the sum check
    return exact_mi(t / t.sum())


def miller_madow_bias(nx: int, ny: int, n: int) -> float:
    """Leading-order upward bias of plug-in MI under independence: (nx-1)(ny-1)/(2n)."""
    return (nx - 1) * (ny - 1) / (2.0 * n)


def load_table(path: str | Path) -> np.ndarray:
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or set(data) != {"p"}:
        raise ValueError('table file must be a JSON object {"p": [[...], ...]}')
    return as_joint_table(data["p"])
