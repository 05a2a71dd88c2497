"""Multi-attribute ranking of candidate legs (SAW and TOPSIS)."""

from __future__ import annotations

import numpy as np

BENEFIT = "benefit"
COST = "cost"


def _prepare(matrix, weights, kinds):
    m = np.asarray(matrix, dtype=float)
    if m.ndim != 2 or m.size == 0:
        raise ValueError("decision matrix must be a non-empty 2-D array")
    w = np.asarray(weights, dtype=float)
    if w.shape != (m.shape[1],):
        raise ValueError(f"expected {m.shape[1]} weights, got {w.shape}")
    if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
        raise ValueError("weights must be non-negative and sum to 1")
    if len(kinds) != m.shape[1] or any(k not in (BENEFIT, COST) for k in kinds):
        raise ValueError(f"criteria kinds must be {BENEFIT!r} or {COST!r}, one per column")
    if np.any(m <= 0) or not np.all(np.isfinite(m)):
        raise ValueError("matrix entries must be finite and > 0")
    benefit = np.array([k == BENEFIT for k in kinds])
    return m, w, benefit


def _rank(scores) -> list[int]:
    # descending score, lower index first on ties
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def saw_scores(matrix, weights, kinds) -> np.ndarray:
    m, w, benefit = _prepare(matrix, weights, kinds)
    norm = np.where(benefit, m / m.max(axis=0), m.min(axis=0) / m)
    return norm @ w


def saw_rank(matrix, weights, kinds) -> list[int]:
    return _rank(list(saw_scores(matrix, weights, kinds)))


def topsis_closeness(matrix, weights, kinds) -> np.ndarray:
    m, w, benefit = _prepare(matrix, weights, kinds)
    v = m / np.sqrt((m**2).sum(axis=0)) * w
    ideal = np.where(benefit, v.max(axis=0), v.min(axis=0))
    anti = np.where(benefit, v.min(axis=0), v.max(axis=0))
    d_plus = np.sqrt(((v - ideal) ** 2).sum(axis=1))
    d_minus = np.sqrt(((v - anti) ** 2).sum(axis=1))
    total = d_plus + d_minus
    with np.errstate(invalid="ignore", divide="ignore"):
        closeness = np.where(total > 0, d_minus / total, 0.5)
    return closeness


def topsis_rank(matrix, weights, kinds) -> list[int]:
    return _rank(list(topsis_closeness(matrix, weights, kinds)))
