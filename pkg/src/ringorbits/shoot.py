"""Symmetry-residual shooting for periodic solutions.

A solution launched from the symmetric initial condition (f, fdot, r, rdot)
= (0, b, r0, 0) closes into a periodic orbit of the reduced system when it
hits another symmetric configuration:

  odd       F(a,b,T) = 0 and R_t(a,b,T) = 0   -> period 2T
  odd/even  F_t(a,b,T) = 0 and R_t(a,b,T) = 0 -> period 4T

Both first residuals vanish identically in b on the circular family, so the
corrector works with the desingularized forms F/b and F_t/b.  These extend
smoothly across b = 0, where they become the b-sensitivities F_b and F_tb
of the flow; parity in b removes their b-derivative there, and the explicit
step _FD_DB recovers the remaining mixed derivative by one-sided
differencing.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from .integrate import FlowError, IntegratorConfig, eval_at
from .model import SystemParams

__all__ = [
    "SymmetryKind",
    "SeedPoint",
    "ConvergenceError",
    "residual",
    "residual_desing",
    "desing_eval",
    "DesingPoint",
    "newton_correct",
    "newton_correct_full",
]

# One-sided step used for d/da of the desingularized residual at b = 0;
# the integrand is odd in b so the quotient is accurate to O(step^2).
_FD_DB = 1e-5

_MAX_HALVINGS = 8


class ConvergenceError(RuntimeError):
    """The Newton corrector failed to reach the requested tolerance."""


class SymmetryKind(enum.Enum):
    ODD = "odd"
    ODD_EVEN = "odd_even"

    @property
    def period_multiple(self) -> int:
        """Full period in units of the residual time T."""
        return 2 if self is SymmetryKind.ODD else 4

    @classmethod
    def parse(cls, text: str) -> "SymmetryKind":
        key = text.strip().lower().replace("-", "_").replace("/", "_")
        for kind in cls:
            if kind.value == key:
                return kind
        raise ValueError(f"unknown symmetry kind {text!r}; expected 'odd' or 'odd_even'")


@dataclass(frozen=True)
class SeedPoint:
    """One member of a symmetric periodic family: parameters (a, b, T).

    `residual` stores the max-norm of the desingularized residual pair at
    the point, `theta` the accumulated ring phase over [0, T].  Both are
    NaN for points that have not been evaluated.
    """

    a: float
    b: float
    T: float
    kind: SymmetryKind = SymmetryKind.ODD
    residual: float = math.nan
    theta: float = math.nan

    def __post_init__(self):
        if not (self.a > 0):
            raise ValueError(f"angular parameter a must be positive, got {self.a!r}")
        if not (self.T > 0):
            raise ValueError(f"return time T must be positive, got {self.T!r}")

    def vector(self) -> np.ndarray:
        return np.array([self.a, self.b, self.T])

    @property
    def period(self) -> float:
        return self.kind.period_multiple * self.T

    def to_dict(self) -> dict:
        return {
            "a": self.a,
            "b": self.b,
            "T": self.T,
            "kind": self.kind.value,
            "residual": self.residual,
            "theta": self.theta,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SeedPoint":
        return cls(
            a=float(d["a"]),
            b=float(d["b"]),
            T=float(d["T"]),
            kind=SymmetryKind.parse(d.get("kind", "odd")),
            residual=float(d.get("residual", math.nan)),
            theta=float(d.get("theta", math.nan)),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "SeedPoint":
        return cls.from_dict(json.loads(text))


def residual(point: SeedPoint, params: SystemParams, config: IntegratorConfig | None = None):
    """Raw residual pair: (F, R_t) for odd, (F_t, R_t) for odd/even."""
    e = eval_at(point.a, point.b, point.T, params, config)
    first = e.F if point.kind is SymmetryKind.ODD else e.Ft
    return first, e.Rt


@dataclass(frozen=True)
class DesingPoint:
    """Desingularized residual data at (a, b, T).

    value is F/b (odd) or F_t/b (odd/even), continued across b = 0 by the
    flow sensitivities; rt is R_t.  Gradients are w.r.t. (a, b, T) and are
    None unless requested.
    """

    value: float
    rt: float
    theta: float
    grad_value: np.ndarray | None = None
    grad_rt: np.ndarray | None = None


def desing_eval(
    a: float,
    b: float,
    T: float,
    kind: SymmetryKind,
    params: SystemParams,
    config: IntegratorConfig | None = None,
    grad: bool = False,
) -> DesingPoint:
    odd = kind is SymmetryKind.ODD
    mu = params.M + params.m * params.n
    if b == 0.0:
        e = eval_at(a, 0.0, T, params, config, augmented=True)
        ftil = e.Fb
        value = ftil if odd else e.Ftb
        if not grad:
            return DesingPoint(value, e.Rt, e.Theta)
        # d(value)/da at b = 0 from a one-sided quotient; the numerator is
        # odd in b, so the O(step) term cancels.
        e2 = eval_at(a, _FD_DB, T, params, config, augmented=True)
        va = (e2.Fa if odd else e2.Fta) / _FD_DB
        vb = 0.0  # parity: the desingularized residual is even in b
        vt = e.Ftb if odd else -mu * ftil / params.h(e.F, e.R) ** 3
        return DesingPoint(
            value,
            e.Rt,
            e.Theta,
            grad_value=np.array([va, vb, vt]),
            grad_rt=np.array([e.Rta, e.Rtb, e.Rtt]),
        )
    e = eval_at(a, b, T, params, config, augmented=grad)
    ftil = e.F / b
    value = ftil if odd else e.Ft / b
    if not grad:
        return DesingPoint(value, e.Rt, e.Theta)
    va = (e.Fa if odd else e.Fta) / b
    vb = ((e.Fb if odd else e.Ftb) - value) / b
    # For odd/even the T-derivative of F_t/b is F_tt/b, which the axial
    # equation turns into -mu*(F/b)/h^3: stable as b -> 0.
    vt = e.Ft / b if odd else -mu * ftil / params.h(e.F, e.R) ** 3
    return DesingPoint(
        value,
        e.Rt,
        e.Theta,
        grad_value=np.array([va, vb, vt]),
        grad_rt=np.array([e.Rta, e.Rtb, e.Rtt]),
    )


def residual_desing(point: SeedPoint, params: SystemParams, config: IntegratorConfig | None = None):
    """Desingularized residual pair; smooth across the circular family b = 0."""
    d = desing_eval(point.a, point.b, point.T, point.kind, params, config)
    return d.value, d.rt


def _too_ill_conditioned(J: np.ndarray) -> bool:
    try:
        return np.linalg.cond(J) > 1e12
    except np.linalg.LinAlgError:
        return True


def newton_correct(
    guess: SeedPoint,
    params: SystemParams,
    config: IntegratorConfig | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 25,
    hyperplane: tuple[np.ndarray, np.ndarray] | None = None,
) -> SeedPoint:
    """Newton-correct a seed onto the symmetric-periodicity conditions.

    Without a hyperplane, b stays fixed and (a, T) are corrected.  With
    hyperplane=(x_ref, normal) all of (a, b, T) move subject to
    <x - x_ref, normal> = 0, the constraint used by arclength continuation.

    Each update is damped by a line search on the residual max-norm (at
    most 8 halvings).  A guess that already meets `tol` is returned after
    the initial evaluation, so max_iter=0 asserts convergence.

    Raises ConvergenceError when the iteration stalls, the Jacobian is
    numerically singular, or max_iter is exhausted; integration failures
    (e.g. a trial driven into collision) propagate as FlowError.
    """
    point, _ = newton_correct_full(
        guess, params, config, tol=tol, max_iter=max_iter, hyperplane=hyperplane
    )
    return point


def newton_correct_full(
    guess: SeedPoint,
    params: SystemParams,
    config: IntegratorConfig | None = None,
    *,
    tol: float = 1e-10,
    max_iter: int = 25,
    hyperplane: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[SeedPoint, DesingPoint]:
    """Like `newton_correct` but also returns the residual data (with
    gradients) at the corrected point, so callers can reuse them."""
    kind = guess.kind
    x = np.array([guess.a, guess.b, guess.T])

    def with_constraint(d, xv):
        res = [d.value, d.rt]
        if hyperplane is not None:
            x_ref, normal = hyperplane
            res.append(float(np.dot(xv - x_ref, normal)))
        return np.array(res)

    d = desing_eval(x[0], x[1], x[2], kind, params, config, grad=True)
    res = with_constraint(d, x)
    it = 0
    while float(np.max(np.abs(res))) > tol:
        if it >= max_iter:
            raise ConvergenceError(
                f"no convergence after {max_iter} iterations; residual {float(np.max(np.abs(res))):.3e}"
            )
        it += 1
        if hyperplane is None:
            J = np.array(
                [
                    [d.grad_value[0], d.grad_value[2]],
                    [d.grad_rt[0], d.grad_rt[2]],
                ]
            )
            rhs = -np.array([d.value, d.rt])
        else:
            _, normal = hyperplane
            J = np.array([d.grad_value, d.grad_rt, np.asarray(normal, dtype=float)])
            rhs = -res
        if _too_ill_conditioned(J):
            raise ConvergenceError("corrector Jacobian is numerically singular")
        step_red = np.linalg.solve(J, rhs)
        step = np.array([step_red[0], 0.0, step_red[1]]) if hyperplane is None else step_red

        old = float(np.max(np.abs(res)))
        lam = 1.0
        accepted = False
        for _ in range(_MAX_HALVINGS + 1):
            trial = x + lam * step
            if trial[0] > 0 and trial[2] > 0:
                try:
                    d_new = desing_eval(trial[0], trial[1], trial[2], kind, params, config, grad=True)
                except FlowError:
                    pass  # trial stepped into a collision: damp further
                else:
                    res_new = with_constraint(d_new, trial)
                    new = float(np.max(np.abs(res_new)))
                    if new < old or new <= tol:
                        x, d, res = trial, d_new, res_new
                        accepted = True
                        break
            lam *= 0.5
        if not accepted:
            raise ConvergenceError(
                f"line search stalled after {_MAX_HALVINGS} halvings; residual {old:.3e}"
            )
    point = SeedPoint(
        a=float(x[0]),
        b=float(x[1]),
        T=float(x[2]),
        kind=kind,
        residual=float(max(abs(d.value), abs(d.rt))),
        theta=d.theta,
    )
    return point, d
