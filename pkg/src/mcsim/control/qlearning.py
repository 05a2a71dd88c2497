"""Tabular Q-learning: table, epsilon-greedy selection, one-step update, checkpoints."""

from __future__ import annotations

import math
from pathlib import Path

BUCKET_SCHEME = "thr4-admin2-v1"


class CheckpointError(ValueError):
    pass


class QTable:
    def __init__(self, n_actions: int, alpha: float = 0.1, gamma: float = 0.9, epsilon: float = 0.1,
                 bucket_scheme: str = BUCKET_SCHEME, r_max: float | None = None):
        if n_actions < 1:
            raise ValueError("action set must be non-empty")
        if not 0 < alpha <= 1:
            raise ValueError(f"alpha={alpha} outside (0, 1]")
        if not 0 <= gamma < 1:
            raise ValueError(f"gamma={gamma} outside [0, 1)")
        if not 0 <= epsilon <= 1:
            raise ValueError(f"epsilon={epsilon} outside [0, 1]")
        self.n_actions = n_actions
        self.alpha = alpha
        self.gamma = gamma
        self.epsilon = epsilon
        self.bucket_scheme = bucket_scheme
        # when set, every update asserts the bound r_max / (1 - gamma)
        self.r_max = r_max
        self.values: dict[str, list[float]] = {}

    def row(self, state: str) -> list[float]:
        r = self.values.get(state)
        if r is None:
            r = self.values[state] = [0.0] * self.n_actions
        return r

    def greedy(self, state: str) -> int:
        r = self.values.get(state)
        if r is None:
            return 0
        best = 0
        for a in range(1, len(r)):
            if r[a] > r[best]:
                best = a
        return best

    def __eq__(self, other):
        if not isinstance(other, QTable):
            return NotImplemented
        return (self.n_actions, self.alpha, self.gamma, self.epsilon, self.bucket_scheme, self.values) == (
            other.n_actions, other.alpha, other.gamma, other.epsilon, other.bucket_scheme, other.values)


def q_select(q: QTable, state: str, epsilon: float, rng) -> int:
    """Epsilon-greedy: one draw for the coin, a second only when exploring."""
    if not 0 <= epsilon <= 1:
        raise ValueError(f"epsilon={epsilon} outside [0, 1]")
    if rng.random() < epsilon:
        return int(rng.random() * q.n_actions) % q.n_actions
    return q.greedy(state)


def q_update(q: QTable, s: str, a: int, r: float, s_next: str) -> float:
    row = q.row(s)
    nxt = q.values.get(s_next)
    future = max(nxt) if nxt else 0.0
    row[a] += q.alpha * (r + q.gamma * future - row[a])
    if q.r_max is not None:
        bound = q.r_max / (1 - q.gamma) + 1e-9
        assert math.isfinite(row[a]) and abs(row[a]) <= bound, (s, a, row[a], bound)
    return row[a]


def save_checkpoint(q: QTable, path) -> None:
    path = Path(path)
    lines = [
        f"# qtable alpha={q.alpha!r} gamma={q.gamma!r} epsilon={q.epsilon!r} "
        f"buckets={q.bucket_scheme} actions={q.n_actions}"
    ]
    for state in sorted(q.values):
        for a, v in enumerate(q.values[state]):
            lines.append(f"{state}\t{a}\t{v!r}")
    try:
        path.write_text("\n".join(lines) + "\n")
    except OSError as e:
        raise OSError(f"cannot write checkpoint {path}: {e.strerror}") from e


def load_checkpoint(path, bucket_scheme: str = BUCKET_SCHEME) -> QTable:
    path = Path(path)
    text = path.read_text().splitlines()
    if not text or not text[0].startswith("# qtable "):
        raise CheckpointError(f"{path}: missing qtable header line")
    header = dict(tok.split("=", 1) for tok in text[0][len("# qtable "):].split())
    try:
        if header["buckets"] != bucket_scheme:
            raise CheckpointError(
                f"{path}: bucket scheme {header['buckets']!r} does not match {bucket_scheme!r}")
        q = QTable(int(header["actions"]), float(header["alpha"]), float(header["gamma"]),
                   float(header["epsilon"]), header["buckets"])
    except KeyError as e:
        raise CheckpointError(f"{path}: header missing {e.args[0]!r}") from None
    for lineno, line in enumerate(text[1:], start=2):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CheckpointError(f"{path}:{lineno}: expected state<TAB>action<TAB>value")
        state, a, v = parts[0], int(parts[1]), float(parts[2])
        if not 0 <= a < q.n_actions or not math.isfinite(v):
            raise CheckpointError(f"{path}:{lineno}: bad action or value")
        q.row(state)[a] = v
    return q
