"""Central finite-difference checking of tape gradients."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import ContractError
from .tensor import Tensor, backward, no_grad


@dataclass
class GradCheckResult:
    h: float
    tol: float
    per_param: dict[str, float] = field(default_factory=dict)
    max_rel_err: float = 0.0
    worst_param: str = ""
    passed: bool = True

    def __str__(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        lines = [f"grad check h={self.h:g} tol={self.tol:g} -> {status} "
                 f"(max {self.max_rel_err:.3e} at {self.worst_param})"]
        for name, err in sorted(self.per_param.items()):
            lines.append(f"  {name}: {err:.3e}")
        return "\n".join(lines)


def grad_check(
    f: Callable[[], Tensor],
    params: dict[str, Tensor],
    h: float = 1e-5,
    tol: float = 1e-4,
) -> GradCheckResult:
    """Compare analytic gradients of the scalar `f()` against central differences.

    `f` must be deterministic: it is run twice up front and a bitwise
    difference in the loss raises ContractError. Relative error uses
    |a - b| / max(|a|, |b|, 1e-4); the floor keeps finite-difference noise on
    near-zero entries from drowning the report.
    """
    for p in params.values():
        p.zero_grad()
    loss = f()
    ref = loss.data.copy()
    check = f()
    if check.data.tobytes() != ref.tobytes():
        raise ContractError(
            f"f is not deterministic: {ref!r} vs {check.data!r} on repeated forward passes"
        )
    backward(loss)
    analytic = {name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
                for name, p in params.items()}

    result = GradCheckResult(h=h, tol=tol)
    with no_grad():
        for name, p in params.items():
            flat = p.data.reshape(-1)
            a_flat = analytic[name].reshape(-1)
            worst = 0.0
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + h
                fp = f().item()
                flat[i] = orig - h
                fm = f().item()
                flat[i] = orig
                fd = (fp - fm) / (2.0 * h)
                a = a_flat[i]
                err = abs(a - fd) / max(abs(a), abs(fd), 1e-4)
                if err > worst:
                    worst = err
            result.per_param[name] = worst
            if worst > result.max_rel_err:
                result.max_rel_err = worst
                result.worst_param = name
    result.passed = result.max_rel_err < tol
    return result
