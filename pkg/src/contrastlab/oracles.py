"""Brute-force reference implementations used to verify the fast paths.

Everything here is written as plain double loops over Python floats, on
purpose: these are the independent second route for the vectorized losses and
metrics, and they must not share code with what they check. Only ever run on
small inputs.
"""

from __future__ import annotations

import math


def dot(u, v) -> float:
    total = 0.0
    for x, y in zip(u, v):
        total += float(x) * float(y)
    return total


def norm(u) -> float:
    return math.sqrt(dot(u, u))


def cosine(u, v) -> float:
    return dot(u, v) / (norm(u) * norm(v))


def matmul(a, b) -> list[list[float]]:
    m, k, n = len(a), len(a[0]), len(b[0])
    out = [[0.0] * n for _ in range(m)]
    for i in range(m):
        for j in range(n):
            s = 0.0
            for t in range(k):
                s += float(a[i][t]) * float(b[t][j])
            out[i][j] = s
    return out


def softmax_row(row) -> list[float]:
    exps = [math.exp(float(x)) for x in row]
    total = sum(exps)
    return [e / total for e in exps]


def text_unsup_terms(h, h2, tau: float) -> list[float]:
    n = len(h)
    terms = []
    for i in range(n):
        num = math.exp(cosine(h[i], h2[i]) / tau)
        den = 0.0
        for j in range(n):
            den += math.exp(cosine(h[i], h2[j]) / tau)
        terms.append(-math.log(num / den))
    return terms


def text_unsup_loss(h, h2, tau: float) -> float:
    return sum(text_unsup_terms(h, h2, tau))


def text_sup_terms(h, hp, hn, tau: float) -> list[float]:
    n = len(h)
    terms = []
    for i in range(n):
        num = math.exp(cosine(h[i], hp[i]) / tau)
        den = 0.0
        for j in range(n):
            den += math.exp(cosine(h[i], hp[j]) / tau)
            den += math.exp(cosine(h[i], hn[j]) / tau)
        terms.append(-math.log(num / den))
    return terms


def text_sup_loss(h, hp, hn, tau: float) -> float:
    return sum(text_sup_terms(h, hp, hn, tau))


def modal_supcon_terms(f1, f2, labels, tau: float) -> list[float]:
    n = len(f1)
    terms = []
    for i in range(n):
        num = math.exp(cosine(f1[i], f2[i]) / tau)
        den = 0.0
        for j in range(n):
            if j != i and labels[j] == labels[i]:
                num += math.exp(cosine(f1[i], f2[j]) / tau)
            if labels[j] != labels[i]:
                den += math.exp(cosine(f1[i], f2[j]) / tau)
        terms.append(-math.log(num / den))
    return terms


def modal_supcon_loss(f1, f2, labels, tau: float) -> float:
    return sum(modal_supcon_terms(f1, f2, labels, tau))


def modal_simclr_terms(f1, f2, tau: float) -> list[float]:
    return text_unsup_terms(f1, f2, tau)


def modal_simclr_loss(f1, f2, tau: float) -> float:
    return sum(modal_simclr_terms(f1, f2, tau))


def _unit(u) -> list[float]:
    n = norm(u)
    return [float(x) / n for x in u]


def alignment(pairs) -> float:
    total = 0.0
    for u, v in pairs:
        uu, vv = _unit(u), _unit(v)
        d2 = 0.0
        for x, y in zip(uu, vv):
            d2 += (x - y) ** 2
        total += d2
    return total / len(pairs)


def uniformity_raw(reps) -> float:
    n = len(reps)
    units = [_unit(r) for r in reps]
    total = 0.0
    count = 0
    for i in range(n):
        for j in range(i + 1, n):
            d2 = 0.0
            for x, y in zip(units[i], units[j]):
                d2 += (x - y) ** 2
            total += math.exp(-2.0 * d2)
            count += 1
    return total / count


def _average_ranks(values) -> list[float]:
    n = len(values)
    order = sorted(range(n), key=lambda i: values[i])
    ranks = [0.0] * n
    i = 0
    while i < n:
        j = i
        while j + 1 < n and values[order[j + 1]] == values[order[i]]:
            j += 1
        avg = (i + j) / 2.0 + 1.0
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def spearman(pred, gold) -> float:
    rp = _average_ranks([float(x) for x in pred])
    rg = _average_ranks([float(x) for x in gold])
    n = len(rp)
    mp = sum(rp) / n
    mg = sum(rg) / n
    cov = sum((a - mp) * (b - mg) for a, b in zip(rp, rg))
    vp = sum((a - mp) ** 2 for a in rp)
    vg = sum((b - mg) ** 2 for b in rg)
    return cov / math.sqrt(vp * vg)


def retrieve_topk(query, corpus, k: int) -> list[int]:
    scored = [(-cosine(query, row), i) for i, row in enumerate(corpus)]
    scored.sort()
    return [i for _, i in scored[:k]]


def mean_std(values) -> tuple[float, float]:
    n = len(values)
    mean = sum(float(v) for v in values) / n
    var = sum((float(v) - mean) ** 2 for v in values) / (n - 1)
    return mean, math.sqrt(var)
