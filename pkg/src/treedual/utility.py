"""Utility stochastic fields and their convex conjugates.

Two families are shipped, both strictly concave, increasing, smooth on
(0, inf) with infinite marginal utility at zero and vanishing marginal
utility at infinity:

  * log:            u(x) = w * log(x)
  * power (rra R):  u(x) = w * x^(1-R) / (1-R),   R > 0, R != 1

``w`` is a strictly positive per-node weight (default 1), which is how the
field depends on the node.  The conjugate v(y) = sup_x (u(x) - x*y) is
closed form for both families, so duality tests isolate solver error from
utility error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import DomainError

FAMILIES = ("log", "power")


@dataclass(frozen=True)
class UtilityField:
    family: str = "log"
    rra: float = 1.0  # relative risk aversion, power family only
    weights: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise DomainError(f"unknown utility family {self.family!r}")
        if self.family == "power" and (self.rra <= 0.0 or self.rra == 1.0):
            raise DomainError(f"power family needs rra > 0, != 1, got {self.rra}")
        bad = {k: w for k, w in self.weights.items() if w <= 0.0}
        if bad:
            raise DomainError(f"non-positive utility weights: {bad}")

    def weight(self, node: str | None) -> float:
        return self.weights.get(node, 1.0) if node is not None else 1.0

    # -- primal side -------------------------------------------------------

    def u(self, node: str | None, x: float) -> float:
        if x < 0.0:
            raise DomainError(f"utility argument must be >= 0, got {x}")
        w = self.weight(node)
        if self.family == "log":
            return w * math.log(x) if x > 0.0 else -math.inf
        R = self.rra
        if x == 0.0:
            return 0.0 if R < 1.0 else -math.inf
        return w * x ** (1.0 - R) / (1.0 - R)

    def u_prime(self, node: str | None, x: float) -> float:
        if x <= 0.0:
            raise DomainError(f"marginal utility needs x > 0, got {x}")
        w = self.weight(node)
        if self.family == "log":
            return w / x
        return w * x ** (-self.rra)

    def u_prime_inv(self, node: str | None, y: float) -> float:
        if y <= 0.0:
            raise DomainError(f"inverse marginal utility needs y > 0, got {y}")
        w = self.weight(node)
        if self.family == "log":
            return w / y
        return (y / w) ** (-1.0 / self.rra)

    # -- dual side ---------------------------------------------------------

    def v(self, node: str | None, y: float) -> float:
        """Convex conjugate sup_x (u(x) - x*y), closed form."""
        if y <= 0.0:
            raise DomainError(f"conjugate needs y > 0, got {y}")
        w = self.weight(node)
        if self.family == "log":
            return w * math.log(w / y) - w
        R = self.rra
        return w * (y / w) ** ((R - 1.0) / R) * R / (1.0 - R)

    def v_prime(self, node: str | None, y: float) -> float:
        # v'(y) = -(u')^{-1}(y) for smooth conjugate pairs
        return -self.u_prime_inv(node, y)

    def v_second(self, node: str | None, y: float) -> float:
        if y <= 0.0:
            raise DomainError(f"conjugate curvature needs y > 0, got {y}")
        w = self.weight(node)
        if self.family == "log":
            return w / (y * y)
        R = self.rra
        return (1.0 / (R * w)) * (y / w) ** (-1.0 / R - 1.0)

    def u_second(self, node: str | None, x: float) -> float:
        if x <= 0.0:
            raise DomainError(f"utility curvature needs x > 0, got {x}")
        w = self.weight(node)
        if self.family == "log":
            return -w / (x * x)
        return -w * self.rra * x ** (-self.rra - 1.0)

    def conjugate(self) -> "ConjugateField":
        return ConjugateField(self)


@dataclass(frozen=True)
class ConjugateField:
    """View of the conjugate y -> v(t, y); convex, decreasing on (0, inf)."""

    base: UtilityField

    def v(self, node: str | None, y: float) -> float:
        return self.base.v(node, y)

    def v_prime(self, node: str | None, y: float) -> float:
        return self.base.v_prime(node, y)


def utility_bundle(field: UtilityField, nodes):
    """Vectorized (value, marginal, curvature) evaluator over fixed nodes.

    Solver inner loops call this once per Newton step on the whole
    consumption vector; the per-node closed forms reduce to elementwise
    numpy expressions with a weight vector.
    """
    import numpy as np

    w = np.array([field.weight(nid) for nid in nodes])
    if field.family == "log":
        def evaluate(x):
            return w * np.log(x), w / x, -w / (x * x)
        return evaluate
    R = field.rra

    def evaluate(x):
        val = w * x ** (1.0 - R) / (1.0 - R)
        grad = w * x ** (-R)
        curv = -R * w * x ** (-R - 1.0)
        return val, grad, curv

    return evaluate


def conjugate_bundle(field: UtilityField, nodes):
    """Vectorized (value, derivative, curvature) of the conjugate."""
    import numpy as np

    w = np.array([field.weight(nid) for nid in nodes])
    if field.family == "log":
        def evaluate(y):
            return w * np.log(w / y) - w, -w / y, w / (y * y)
        return evaluate
    R = field.rra

    def evaluate(y):
        ratio = y / w
        val = w * ratio ** ((R - 1.0) / R) * R / (1.0 - R)
        grad = -ratio ** (-1.0 / R)
        curv = (1.0 / (R * w)) * ratio ** (-1.0 / R - 1.0)
        return val, grad, curv

    return evaluate


def conjugate_numeric(field: UtilityField, node: str | None, y: float,
                      grid: int = 4001, span: float = 12.0) -> float:
    """Numeric sup over a log-spaced x grid; independent check of closed forms.

    The grid is centered at the analytic maximizer, which keeps the check
    honest about the conjugate value without chasing the unbounded tails.
    """
    if y <= 0.0:
        raise DomainError(f"conjugate needs y > 0, got {y}")
    x_star = field.u_prime_inv(node, y)
    lo, hi = math.log(x_star) - span, math.log(x_star) + span
    best = -math.inf
    for i in range(grid):
        x = math.exp(lo + (hi - lo) * i / (grid - 1))
        best = max(best, field.u(node, x) - x * y)
    return best
