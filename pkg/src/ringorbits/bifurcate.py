"""Bifurcation points of the circular family and their nondegeneracy.

The circular solution r = r0 with a = a0 carries two linear modes whose
frequencies set where symmetric families branch off: the axial mode with
frequency sqrt((M + n*m)/r0^3) and the radial mode with frequency
sqrt((lam*m + M)/r0^3).  Their ratio

    s = sqrt((lam*m + M)/(n*m + M))

controls everything here: the odd family branches at T* = T0 (half the
axial period), the odd/even family at T* = T0/2, and the branching is
nondegenerate as long as s is not a positive integer (odd), or not a
positive even integer (odd/even).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .model import SystemParams
from .shoot import SymmetryKind

__all__ = [
    "BifurcationReport",
    "resonance_ratio",
    "degeneracy_margin",
    "bifurcation_point",
    "nondegeneracy",
    "xi_second_derivative",
]

# |s - round(s)| below this counts as resonant/degenerate.
INTEGER_TOL = 1e-9


def resonance_ratio(params: SystemParams) -> float:
    """Radial-to-axial frequency ratio s of the circular solution."""
    return math.sqrt((params.lam * params.m + params.M) / (params.n * params.m + params.M))


def degeneracy_margin(s: float, kind: SymmetryKind) -> float:
    """Distance-from-resonance margin: |2 sin(pi s)| (odd) or |2 sin(pi s/2)|."""
    if kind is SymmetryKind.ODD:
        return abs(2.0 * math.sin(math.pi * s))
    return abs(2.0 * math.sin(math.pi * s / 2.0))


def _near_integer(s: float) -> tuple[bool, int]:
    p = round(s)
    return (abs(s - p) < INTEGER_TOL and p >= 1), int(p)


def nondegeneracy(params: SystemParams, kind: SymmetryKind) -> tuple[bool, float]:
    """Whether the branching at the seed of `kind` is nondegenerate, with margin.

    Degeneracy means the frequency ratio s sits (within 1e-9) on a positive
    integer (odd kind) or a positive even integer (odd/even kind); there
    the transversality margin 2*sin(pi*s) resp. 2*sin(pi*s/2) vanishes.
    """
    s = resonance_ratio(params)
    near, p = _near_integer(s)
    if kind is SymmetryKind.ODD:
        degenerate = near
    else:
        degenerate = near and p % 2 == 0
    return (not degenerate), degeneracy_margin(s, kind)


def _fmt_number(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(x)


@dataclass(frozen=True)
class BifurcationReport:
    """Seed of a symmetric family on the circular solution.

    T_star is T0 for the odd family and T0/2 for the odd/even family;
    theta0 = a0*T_star/r0 is the ring phase accumulated over [0, T_star].
    xi2 is the branch curvature of the phase along the odd family (None
    for odd/even, where no closed form is carried).
    """

    kind: SymmetryKind
    a0: float
    b: float
    T_star: float
    s: float
    nondegenerate: bool
    margin: float
    theta0: float
    T_exact: str
    xi2: float | None = None

    def point_vector(self):
        return (self.a0, self.b, self.T_star)


def bifurcation_point(params: SystemParams, kind: SymmetryKind = SymmetryKind.ODD) -> BifurcationReport:
    """Closed-form bifurcation data for the requested symmetry kind."""
    a0 = params.a0
    T0 = params.T0
    T_star = T0 if kind is SymmetryKind.ODD else T0 / 2.0
    s = resonance_ratio(params)
    ok, margin = nondegeneracy(params, kind)
    theta0 = a0 * T_star / params.r0
    # T0 = pi*sqrt(r0^3/(n*m+M)) written with r0 factored out of the root.
    root = f"{_fmt_number(params.r0)}*sqrt({_fmt_number(params.r0)}/{_fmt_number(params.n * params.m + params.M)})*pi"
    T_exact = root if kind is SymmetryKind.ODD else f"(1/2)*{root}"
    xi2 = None
    if kind is SymmetryKind.ODD:
        try:
            xi2 = xi_second_derivative(params)
        except ValueError:
            xi2 = None
    return BifurcationReport(
        kind=kind,
        a0=a0,
        b=0.0,
        T_star=T_star,
        s=s,
        nondegenerate=ok,
        margin=margin,
        theta0=theta0,
        T_exact=T_exact,
        xi2=xi2,
    )


def xi_second_derivative(params: SystemParams) -> float:
    """Second derivative of the ring phase along the odd family at its seed.

    Evaluates the closed-form curvature (A + B*R)*R^2 with
    R = 2*sin(pi*s), transcribed term for term; see the A and B
    expressions below.  Raises ValueError when a denominator factor
    vanishes (which requires lam >= 4n and so cannot happen for any
    practical body count).
    """
    n, m, M, r0 = params.n, params.m, params.M, params.r0
    lam = params.lam
    denom_factor = lam * m - 3.0 * M - 4.0 * m * n
    if denom_factor == 0.0:
        raise ValueError("curvature denominators vanish: lam*m - 3M - 4mn = 0 (shared by A and B)")
    sq = math.sqrt((lam * m + M) / r0**3)
    R = 2.0 * math.sin(math.pi * resonance_ratio(params))
    A = (
        3.0
        * r0**2.5
        * math.pi
        * (
            9.0 * (lam * m + M) * (lam * m + 24.0 * M - 4.0 * m * n + 16.0 * M * sq)
            - 8.0 * M * (M + m * n) * (9.0 + 8.0 * sq)
        )
    ) / (16.0 * m**2 * n**2 * (-lam * m + 4.0 * m * n + 3.0 * M) * math.sqrt(lam * m + M))
    B = (9.0 * M * r0**2.5 * (M + m * n) ** 2.5 * (3.0 + 2.0 * sq)) / (
        m**2 * n**2 * (lam * m + M) * denom_factor**2
    )
    return (A + B * R) * R * R
