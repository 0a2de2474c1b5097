"""Evaluation: rank correlation, alignment/uniformity, retrieval, aggregation.

Everything here is measurement-only (plain numpy, no gradient tracking).
Representations are L2-normalized before alignment and uniformity, which the
hypersphere framing of those metrics presupposes; Spearman works on raw
cosine scores.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .encoder import SharedEncoder, TokenBatch
from .errors import InvalidArgumentError, UndefinedCorrelationError

# Gold STS scores live on a 0..5 scale; pairs in the top quartile count as
# positives for the alignment metric.
GOLD_SCALE = 5.0
DEFAULT_POSITIVE_THRESHOLD = 3.75


@dataclass
class ScoredPair:
    tokens_a: list[int]
    tokens_b: list[int]
    gold: float


@dataclass
class MetricsReport:
    spearman: float
    alignment: float
    uniformity_log: float
    uniformity_raw: float
    retrieval: list[dict] | None = None
    aggregate: dict[str, dict[str, float]] | None = None
    metadata: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "spearman": self.spearman,
            "alignment": self.alignment,
            "uniformity_log": self.uniformity_log,
            "uniformity_raw": self.uniformity_raw,
            "retrieval": self.retrieval,
            "aggregate": self.aggregate,
            "metadata": self.metadata,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def average_ranks(values: np.ndarray) -> np.ndarray:
    """Fractional ranks (1-based); tied values share the mean of their ranks."""
    values = np.asarray(values, dtype=np.float64)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values))
    i = 0
    while i < len(values):
        j = i
        while j + 1 < len(values) and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def spearman(pred: Sequence[float], gold: Sequence[float]) -> float:
    """Pearson correlation of fractional ranks with average-rank ties."""
    pred = np.asarray(pred, dtype=np.float64)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape or pred.ndim != 1:
        raise InvalidArgumentError(
            f"spearman needs two equal-length vectors, got {pred.shape}, {gold.shape}"
        )
    if len(pred) < 2:
        raise InvalidArgumentError("spearman needs at least 2 observations")
    rp = average_ranks(pred)
    rg = average_ranks(gold)
    rp = rp - rp.mean()
    rg = rg - rg.mean()
    vp = float(rp @ rp)
    vg = float(rg @ rg)
    if vp == 0.0 or vg == 0.0:
        raise UndefinedCorrelationError(
            "rank correlation undefined: an input has zero rank variance"
        )
    return float(rp @ rg) / math.sqrt(vp * vg)


def _unit_rows(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    if np.any(norms == 0.0):
        raise InvalidArgumentError("cannot normalize zero-norm representation rows")
    return x / norms


def alignment(pairs: Sequence[tuple[np.ndarray, np.ndarray]]) -> float:
    """Mean squared distance between unit-normalized positive pairs (lower = better)."""
    if len(pairs) == 0:
        raise InvalidArgumentError("alignment needs at least one positive pair")
    a = _unit_rows(np.stack([p[0] for p in pairs]))
    b = _unit_rows(np.stack([p[1] for p in pairs]))
    return float(((a - b) ** 2).sum(axis=1).mean())


def uniformity(reps: np.ndarray) -> tuple[float, float]:
    """(raw, log) of mean exp(-2 ||f_i - f_j||^2) over unordered distinct pairs."""
    reps = np.asarray(reps, dtype=np.float64)
    if reps.ndim != 2 or reps.shape[0] < 2:
        raise InvalidArgumentError("uniformity needs at least 2 representations")
    u = _unit_rows(reps)
    sq = ((u[:, None, :] - u[None, :, :]) ** 2).sum(axis=2)
    iu = np.triu_indices(len(u), k=1)
    raw = float(np.exp(-2.0 * sq[iu]).mean())
    return raw, math.log(raw)


def retrieve_topk(query: np.ndarray, corpus: np.ndarray, k: int) -> list[int]:
    """Indices of the k most cosine-similar corpus rows; ties go to the lower index."""
    corpus = np.asarray(corpus, dtype=np.float64)
    if k > corpus.shape[0]:
        raise InvalidArgumentError(
            f"k={k} exceeds corpus size {corpus.shape[0]}"
        )
    q = _unit_rows(np.asarray(query, dtype=np.float64)[None, :])[0]
    scores = _unit_rows(corpus) @ q
    order = np.argsort(-scores, kind="stable")
    return order[:k].tolist()


def encode_sentences(
    encoder: SharedEncoder, sentences: Sequence[Sequence[int]], batch_size: int = 64
) -> np.ndarray:
    """Eval-mode CLS embeddings for raw token lists (CLS slot added here)."""
    out = []
    for start in range(0, len(sentences), batch_size):
        chunk = [list(s) for s in sentences[start : start + batch_size]]
        width = 1 + max(len(s) for s in chunk)
        ids = np.zeros((len(chunk), width), dtype=np.int64)
        lengths = []
        for r, s in enumerate(chunk):
            ids[r, 1 : 1 + len(s)] = s
            lengths.append(1 + len(s))
        batch = TokenBatch(ids, lengths)
        rep = encoder.encode(encoder.embed_text(batch), lengths, None)
        out.append(rep.numpy())
    return np.concatenate(out, axis=0)


def eval_sts(
    encoder: SharedEncoder,
    pairs: Sequence[ScoredPair],
    positive_threshold: float = DEFAULT_POSITIVE_THRESHOLD,
    metadata: dict | None = None,
) -> MetricsReport:
    """Score sentence pairs by cosine and report Spearman vs gold.

    Alignment is computed over pairs whose gold score reaches
    ``positive_threshold``; uniformity over all embeddings of the set.
    """
    if len(pairs) == 0:
        raise InvalidArgumentError("eval_sts needs a nonempty pair set")
    emb_a = encode_sentences(encoder, [p.tokens_a for p in pairs])
    emb_b = encode_sentences(encoder, [p.tokens_b for p in pairs])
    ua, ub = _unit_rows(emb_a), _unit_rows(emb_b)
    pred = (ua * ub).sum(axis=1)
    gold = np.array([p.gold for p in pairs])
    rho = spearman(pred, gold)
    positive = gold >= positive_threshold
    if positive.any():
        align = float(((ua[positive] - ub[positive]) ** 2).sum(axis=1).mean())
    else:
        align = float("nan")
    raw, logu = uniformity(np.concatenate([emb_a, emb_b], axis=0))
    return MetricsReport(
        spearman=rho,
        alignment=align,
        uniformity_log=logu,
        uniformity_raw=raw,
        metadata=metadata or {},
    )


AGGREGATE_FIELDS = ("spearman", "alignment", "uniformity_log", "uniformity_raw")


def aggregate(reports: Sequence[MetricsReport]) -> dict[str, dict[str, float]]:
    """Per-field mean and sample standard deviation (n-1) over reports."""
    if len(reports) < 2:
        raise InvalidArgumentError("aggregate needs at least 2 reports")
    out: dict[str, dict[str, float]] = {}
    for name in AGGREGATE_FIELDS:
        vals = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        out[name] = {
            "mean": float(vals.mean()),
            "std": float(vals.std(ddof=1)),
        }
    return out


def config_hash(text: str) -> str:
    """Short stable fingerprint of an effective-config text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:12]
