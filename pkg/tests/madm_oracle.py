"""Loop-based SAW/TOPSIS used as an oracle for the vectorized versions."""

import math


def saw(matrix, weights, kinds):
    cols = list(zip(*matrix))
    out = []
    for row in matrix:
        s = 0.0
        for j, x in enumerate(row):
            if kinds[j] == "benefit":
                s += weights[j] * x / max(cols[j])
            else:
                s += weights[j] * min(cols[j]) / x
        out.append(s)
    return out


def topsis(matrix, weights, kinds):
    cols = list(zip(*matrix))
    norms = [math.sqrt(sum(x * x for x in c)) for c in cols]
    v = [[weights[j] * x / norms[j] for j, x in enumerate(row)] for row in matrix]
    vcols = list(zip(*v))
    ideal = [max(c) if k == "benefit" else min(c) for c, k in zip(vcols, kinds)]
    anti = [min(c) if k == "benefit" else max(c) for c, k in zip(vcols, kinds)]
    out = []
    for row in v:
        dp = math.sqrt(sum((a - b) ** 2 for a, b in zip(row, ideal)))
        dm = math.sqrt(sum((a - b) ** 2 for a, b in zip(row, anti)))
        out.append(0.5 if dp + dm == 0 else dm / (dp + dm))
    return out


def rank(scores):
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


def min_gap(scores):
    s = sorted(scores)
    return min((b - a for a, b in zip(s, s[1:])), default=math.inf)
