"""Contrastive objectives over CLS representations.

All losses share one similarity backbone: rows are L2-normalized, the full
pairwise cosine matrix is divided by a temperature, and per-anchor terms are
assembled with stable row-wise log-sum-exp (the row max is treated as a
constant shift, so a single-example batch gives exactly zero where the math
says zero).

Reductions are batch sums by default; a mean option exists and only changes
the learning-rate interpretation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd as ag
from .autograd import Tensor
from .encoder import Representation
from .errors import (
    DegenerateInputError,
    EmptyDenominatorError,
    InvalidArgumentError,
    ShapeMismatchError,
)

MODAL_VARIANTS = ("supcon", "simclr")


@dataclass(frozen=True)
class LossConfig:
    tau_text: float = 0.05
    tau_modal: float = 0.07
    modal_variant: str = "supcon"
    omega_modal: float = 1.0
    reduction: str = "sum"

    def __post_init__(self):
        if self.tau_text <= 0 or self.tau_modal <= 0:
            raise InvalidArgumentError("temperatures must be strictly positive")
        if self.modal_variant not in MODAL_VARIANTS:
            raise InvalidArgumentError(
                f"modal_variant must be one of {MODAL_VARIANTS}, "
                f"got {self.modal_variant!r}"
            )
        if self.omega_modal < 0:
            raise InvalidArgumentError("omega_modal must be nonnegative")
        if self.reduction not in ("sum", "mean"):
            raise InvalidArgumentError("reduction must be 'sum' or 'mean'")


def _as_matrix(x) -> Tensor:
    if isinstance(x, Representation):
        x = x.vectors
    if not isinstance(x, Tensor):
        x = Tensor(np.asarray(x, dtype=np.float64))
    if x.ndim != 2:
        raise ShapeMismatchError(f"expected a 2-d batch of rows, got {x.shape}")
    return x


def _check_rows(name: str, x: Tensor) -> None:
    norms = np.linalg.norm(x.data, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError(f"{name} contains a zero-norm row")


def _scaled_cosine(a: Tensor, b: Tensor, tau: float) -> Tensor:
    """Pairwise cosine similarities divided by tau, shape N x N."""
    an = ag.l2_normalize_rows(a)
    bn = ag.l2_normalize_rows(b)
    return ag.mul(ag.matmul(an, ag.transpose(bn, (1, 0))), 1.0 / tau)


def _masked_logsumexp_rows(s: Tensor, mask: np.ndarray, shift: np.ndarray) -> Tensor:
    """log(sum_j mask_ij * exp(s_ij)) computed as shifted sums.

    ``shift`` is a detached per-row constant (the row max over the union of
    masks in play), keeping every exponent <= 0.
    """
    e = ag.exp(ag.sub(s, Tensor(shift[:, None])))
    total = ag.tsum(ag.mul(e, Tensor(mask.astype(np.float64))), axis=1)
    return ag.add(ag.log(total), Tensor(shift))


def _reduce(terms: Tensor, reduction: str) -> Tensor:
    if reduction == "sum":
        return ag.tsum(terms)
    if reduction == "mean":
        return ag.tmean(terms)
    raise InvalidArgumentError(f"unknown reduction {reduction!r}")


def _diag(s: Tensor) -> Tensor:
    n = s.shape[0]
    eye = np.eye(n)
    return ag.tsum(ag.mul(s, Tensor(eye)), axis=1)


# ---------------------------------------------------------------------------
# Text losses
# ---------------------------------------------------------------------------


def text_unsup_terms(views_a, views_b, tau: float) -> Tensor:
    """Per-anchor InfoNCE over two dropout views of the same batch.

    term_i = -log( exp(sim(a_i, b_i)/tau) / sum_j exp(sim(a_i, b_j)/tau) )
    """
    a = _as_matrix(views_a)
    b = _as_matrix(views_b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"view shapes disagree: {a.shape} vs {b.shape}")
    _check_rows("views_a", a)
    _check_rows("views_b", b)
    s = _scaled_cosine(a, b, tau)
    n = s.shape[0]
    shift = s.data.max(axis=1)
    lse = _masked_logsumexp_rows(s, np.ones((n, n)), shift)
    return ag.sub(lse, _diag(s))


def text_unsup_loss(views_a, views_b, tau: float, reduction: str = "sum") -> Tensor:
    return _reduce(text_unsup_terms(views_a, views_b, tau), reduction)


def text_sup_terms(anchors, positives, negatives, tau: float) -> Tensor:
    """Per-anchor supervised triplet-batch loss.

    term_i = -log( exp(sim(h_i, p_i)/tau)
                   / sum_j [exp(sim(h_i, p_j)/tau) + exp(sim(h_i, n_j)/tau)] )

    The j = i negative term stays in the denominator: every contradiction in
    the batch, including the anchor's own, is a hard negative.
    """
    h = _as_matrix(anchors)
    p = _as_matrix(positives)
    n = _as_matrix(negatives)
    if not (h.shape == p.shape == n.shape):
        raise ShapeMismatchError(
            f"triplet batches misaligned: {h.shape}, {p.shape}, {n.shape}"
        )
    for name, m in (("anchors", h), ("positives", p), ("negatives", n)):
        _check_rows(name, m)
    sp = _scaled_cosine(h, p, tau)
    sn = _scaled_cosine(h, n, tau)
    shift = np.maximum(sp.data.max(axis=1), sn.data.max(axis=1))
    ep = ag.exp(ag.sub(sp, Tensor(shift[:, None])))
    en = ag.exp(ag.sub(sn, Tensor(shift[:, None])))
    total = ag.add(ag.tsum(ep, axis=1), ag.tsum(en, axis=1))
    lse = ag.add(ag.log(total), Tensor(shift))
    return ag.sub(lse, _diag(sp))


def text_sup_loss(anchors, positives, negatives, tau: float, reduction: str = "sum") -> Tensor:
    return _reduce(text_sup_terms(anchors, positives, negatives, tau), reduction)


# ---------------------------------------------------------------------------
# Modal losses
# ---------------------------------------------------------------------------


def modal_supcon_terms(views_a, views_b, labels, tau: float) -> Tensor:
    """Per-anchor label-aware contrastive terms, exactly as this variant is defined.

    term_i = -log( [exp(sim(a_i, b_i)/tau) + sum_{j!=i, same class} exp(sim(a_i, b_j)/tau)]
                   / sum_{different class} exp(sim(a_i, b_j)/tau) )

    The denominator holds cross-class terms only, so individual terms (and the
    batch total) can be negative. A batch whose labels are all equal leaves the
    denominator empty and is rejected.
    """
    a = _as_matrix(views_a)
    b = _as_matrix(views_b)
    if a.shape != b.shape:
        raise ShapeMismatchError(f"view shapes disagree: {a.shape} vs {b.shape}")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.shape != (a.shape[0],):
        raise ShapeMismatchError(
            f"labels shape {labels.shape} does not match batch size {a.shape[0]}"
        )
    _check_rows("views_a", a)
    _check_rows("views_b", b)

    same = labels[:, None] == labels[None, :]
    n = a.shape[0]
    eye = np.eye(n, dtype=bool)
    numerator_mask = (same & ~eye) | eye
    denominator_mask = ~same
    empty = ~denominator_mask.any(axis=1)
    if empty.any():
        bad = np.flatnonzero(empty).tolist()
        raise EmptyDenominatorError(
            f"anchors {bad} have no cross-class pair in the batch "
            f"(labels={labels.tolist()}); the loss is undefined"
        )

    s = _scaled_cosine(a, b, tau)
    shift = s.data.max(axis=1)
    log_num = _masked_logsumexp_rows(s, numerator_mask, shift)
    log_den = _masked_logsumexp_rows(s, denominator_mask, shift)
    return ag.sub(log_den, log_num)


def modal_supcon_loss(views_a, views_b, labels, tau: float, reduction: str = "sum") -> Tensor:
    return _reduce(modal_supcon_terms(views_a, views_b, labels, tau), reduction)


def modal_simclr_terms(views_a, views_b, tau: float) -> Tensor:
    """Label-free modal terms; same functional form as the unsupervised text loss."""
    return text_unsup_terms(views_a, views_b, tau)


def modal_simclr_loss(views_a, views_b, tau: float, reduction: str = "sum") -> Tensor:
    return _reduce(modal_simclr_terms(views_a, views_b, tau), reduction)


def combine(loss_text: Tensor, loss_modal: Tensor, omega: float) -> Tensor:
    """Weighted multi-task total: loss_text + omega * loss_modal."""
    if not np.isfinite(loss_text.data) or not np.isfinite(loss_modal.data):
        raise InvalidArgumentError("combine requires finite loss values")
    return ag.add(loss_text, ag.mul(loss_modal, omega))
