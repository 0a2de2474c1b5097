"""Finite-difference verification of recorded gradients.

The check is the independent second route for every analytic gradient in the
package: central differences (f(x+e) - f(x-e)) / 2e per parameter entry,
compared elementwise against what backward() accumulated.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .autograd import Parameter, Tensor, backward, zero_grads
from .errors import DeterminismError

# Relative error uses max(|analytic|, |numeric|, REL_FLOOR) as denominator so
# near-zero entries are judged on absolute error.
REL_FLOOR = 1e-6


@dataclass
class GradCheckReport:
    """Per-parameter worst relative error between analytic and numeric grads."""

    step: float
    tol: float
    per_param: dict[str, float] = field(default_factory=dict)
    failures: list[tuple[str, int, float]] = field(default_factory=list)

    @property
    def max_rel_error(self) -> float:
        return max(self.per_param.values(), default=0.0)

    @property
    def ok(self) -> bool:
        return not self.failures

    def summary(self) -> str:
        lines = [f"grad_check step={self.step:g} tol={self.tol:g}"]
        for name, err in sorted(self.per_param.items()):
            mark = "ok" if err < self.tol else "FAIL"
            lines.append(f"  {name}: max_rel_err={err:.3e} [{mark}]")
        return "\n".join(lines)


def grad_check(
    loss_fn: Callable[[], Tensor],
    params: Sequence[Parameter],
    step: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckReport:
    """Compare backward() gradients of ``loss_fn`` against central differences.

    ``loss_fn`` must be pure and deterministic given fixed seeds; it is
    evaluated twice up front and a mismatch raises ``DeterminismError``.
    """
    first = float(loss_fn().data)
    second = float(loss_fn().data)
    if first != second:
        raise DeterminismError(
            f"loss_fn returned {first!r} then {second!r}; gradients cannot be "
            "checked against a non-deterministic function"
        )

    zero_grads(params)
    backward(loss_fn())
    analytic = {p.name: p.grad.copy() for p in params}

    report = GradCheckReport(step=step, tol=tol)
    for p in params:
        base = p.data.copy()
        numeric = np.zeros_like(base)
        flat_num = numeric.reshape(-1)
        flat_base = base.reshape(-1)
        for i in range(base.size):
            bumped = flat_base.copy()
            bumped[i] = flat_base[i] + step
            p.assign(bumped.reshape(base.shape))
            f_plus = float(loss_fn().data)
            bumped[i] = flat_base[i] - step
            p.assign(bumped.reshape(base.shape))
            f_minus = float(loss_fn().data)
            flat_num[i] = (f_plus - f_minus) / (2.0 * step)
        p.assign(base)

        a = analytic[p.name].reshape(-1)
        denom = np.maximum(np.maximum(np.abs(a), np.abs(flat_num)), REL_FLOOR)
        rel = np.abs(a - flat_num) / denom
        report.per_param[p.name] = float(rel.max()) if rel.size else 0.0
        for i in np.flatnonzero(rel >= tol):
            report.failures.append((p.name, int(i), float(rel[i])))

    zero_grads(params)
    return report
