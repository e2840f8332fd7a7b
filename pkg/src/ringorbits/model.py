"""Reduced model of a rotating ring of equal masses coupled to an axial body.

n bodies of mass m sit at the vertices of a regular n-gon whose plane stays
perpendicular to the z-axis, and one body of mass M moves on the axis.  With
G = 1 and the center of mass pinned at the origin, the motion reduces to the
axial separation f, the ring radius r and the ring phase theta.  The phase
decouples through the angular momentum integral r^2 * thetadot = r0 * a, so
the dynamical core is the (f, r) system plus a quadrature for theta.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "SingularityError",
    "CollisionError",
    "lambda_n",
    "SystemParams",
    "ReducedState",
    "AugmentedState",
    "CartesianState",
    "reduced_initial",
    "augmented_initial",
    "make_reduced_rhs",
    "make_variational_rhs",
    "reduced_rhs",
    "variational_rhs",
    "reduced_energy",
    "cartesian_lift",
    "full_rhs",
    "cartesian_energy",
    "center_of_mass",
    "total_momentum",
    "total_angular_momentum",
]

# Collision guard: the reduced equations blow up as the ring radius
# approaches zero.  Flows abort once r drops below this fraction of r0.
R_FLOOR_FRACTION = 1e-8


class SingularityError(RuntimeError):
    """The reduced dynamics reached a (near-)collision configuration."""

    def __init__(self, message: str, t: float | None = None):
        super().__init__(message)
        self.t = t


class CollisionError(RuntimeError):
    """Two point masses coincide in the full cartesian system."""


@lru_cache(maxsize=None)
def lambda_n(n: int) -> float:
    """Ring interaction constant (1/4) * sum_{k=1..n-1} csc(k*pi/n).

    Collects the mutual attraction of the n ring bodies into a single
    coefficient of 1/r^2.  Strictly increasing in n; lambda_n(2) = 1/4.
    """
    if n != int(n) or n < 2:
        raise ValueError(f"need an integer number of ring bodies >= 2, got n={n!r}")
    n = int(n)
    return 0.25 * math.fsum(1.0 / math.sin(k * math.pi / n) for k in range(1, n))


@dataclass(frozen=True)
class SystemParams:
    """Masses and seed radius of the configuration, with derived constants.

    Attributes
    ----------
    n : number of ring bodies (>= 2)
    m : mass of each ring body (> 0)
    M : mass of the axial body (>= 0)
    r0 : radius of the seeding circular solution (> 0)

    Derived properties (G = 1 throughout):
    lam      ring constant lambda_n
    a0       angular parameter of the circular solution, sqrt((lam*m + M)/r0)
    T0       half-period of the axial linearization, pi*sqrt(r0^3/(n*m + M))
    kappa    (M + n*m)/(m*n), stretch factor in the center-to-ring distance
    z_factor M/(m*n), ring-plane offset per unit of axial separation f
    """

    n: int
    m: float
    M: float
    r0: float

    def __post_init__(self):
        if self.n != int(self.n) or self.n < 2:
            raise ValueError(f"n must be an integer >= 2, got {self.n!r}")
        for name in ("m", "M", "r0"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v!r}")
        if self.m <= 0:
            raise ValueError(f"ring mass m must be positive, got {self.m!r}")
        if self.M < 0:
            raise ValueError(f"axial mass M must be nonnegative, got {self.M!r}")
        if self.r0 <= 0:
            raise ValueError(f"seed radius r0 must be positive, got {self.r0!r}")

    @property
    def lam(self) -> float:
        return lambda_n(self.n)

    @property
    def mass_sum(self) -> float:
        """Total mass M + n*m."""
        return self.M + self.n * self.m

    @property
    def kappa(self) -> float:
        return (self.M + self.n * self.m) / (self.m * self.n)

    @property
    def z_factor(self) -> float:
        return self.M / (self.m * self.n)

    @property
    def a0(self) -> float:
        return math.sqrt((self.lam * self.m + self.M) / self.r0)

    @property
    def T0(self) -> float:
        return math.pi * math.sqrt(self.r0**3 / (self.n * self.m + self.M))

    def h(self, f: float, r: float) -> float:
        """Distance between the axial body and any ring body."""
        return math.sqrt(r * r + self.kappa**2 * f * f)

    def to_dict(self) -> dict:
        return {"n": self.n, "m": self.m, "M": self.M, "r0": self.r0}

    @classmethod
    def from_dict(cls, d: dict) -> "SystemParams":
        missing = {"n", "m", "M", "r0"} - set(d)
        if missing:
            raise ValueError(f"missing parameter keys: {sorted(missing)}")
        return cls(n=int(d["n"]), m=float(d["m"]), M=float(d["M"]), r0=float(d["r0"]))


@dataclass(frozen=True)
class ReducedState:
    """Point of the reduced phase space at a given time."""

    t: float
    f: float
    fdot: float
    r: float
    rdot: float
    theta: float

    def to_array(self) -> np.ndarray:
        return np.array([self.f, self.fdot, self.r, self.rdot, self.theta])

    @classmethod
    def from_array(cls, t: float, y) -> "ReducedState":
        f, fdot, r, rdot, theta = (float(v) for v in y)
        return cls(t=t, f=f, fdot=fdot, r=r, rdot=rdot, theta=theta)


@dataclass(frozen=True)
class AugmentedState:
    """Reduced state plus first-order sensitivities w.r.t. a and b.

    The sensitivity columns propagate the derivative of the flow with
    respect to the angular parameter a and the initial axial velocity b.
    """

    t: float
    f: float
    fdot: float
    r: float
    rdot: float
    theta: float
    dfa: float
    dfdota: float
    dra: float
    drdota: float
    dtha: float
    dfb: float
    dfdotb: float
    drb: float
    drdotb: float
    dthb: float

    @classmethod
    def from_array(cls, t: float, y) -> "AugmentedState":
        vals = [float(v) for v in y]
        if len(vals) != 15:
            raise ValueError(f"augmented state needs 15 components, got {len(vals)}")
        return cls(t, *vals)

    def to_array(self) -> np.ndarray:
        return np.array(
            [
                self.f, self.fdot, self.r, self.rdot, self.theta,
                self.dfa, self.dfdota, self.dra, self.drdota, self.dtha,
                self.dfb, self.dfdotb, self.drb, self.drdotb, self.dthb,
            ]
        )


def reduced_initial(b: float, params: SystemParams) -> np.ndarray:
    """Symmetric initial condition: on the x-axis crossing with f = 0."""
    return np.array([0.0, float(b), params.r0, 0.0, 0.0])


def augmented_initial(b: float, params: SystemParams) -> np.ndarray:
    y = np.zeros(15)
    y[:5] = reduced_initial(b, params)
    y[11] = 1.0  # d fdot / d b
    return y


def make_reduced_rhs(params: SystemParams, C: float):
    """Return rhs(t, y) for the 5-component reduced state, y = (f, fdot, r, rdot, theta).

    C is the angular momentum r^2 * thetadot = r0 * a.  Raises
    SingularityError when the ring radius falls below the collision floor.
    """
    lam_m = params.lam * params.m
    mu = params.M + params.m * params.n
    kap2 = params.kappa**2
    M = params.M
    C2 = C * C
    r_floor = R_FLOOR_FRACTION * params.r0
    sqrt = math.sqrt

    def rhs(t, y):
        f, fdot, r, rdot, _ = y.tolist() if isinstance(y, np.ndarray) else y
        if r <= r_floor:
            raise SingularityError(f"ring radius {r!r} below collision floor at t={t!r}", t=t)
        h2 = r * r + kap2 * f * f
        h3 = h2 * sqrt(h2)
        r2 = r * r
        return np.array(
            [
                fdot,
                -mu * f / h3,
                rdot,
                C2 / (r2 * r) - lam_m / r2 - M * r / h3,
                C / r2,
            ]
        )

    return rhs


def make_variational_rhs(params: SystemParams, C: float):
    """Return rhs(t, y) for the 15-component state of `augmented_initial`.

    Layout: base reduced state (5), then the a-sensitivity column (5), then
    the b-sensitivity column (5).  The a-column carries the explicit
    dependence of the equations on a through C = r0*a.
    """
    lam_m = params.lam * params.m
    mu = params.M + params.m * params.n
    kap2 = params.kappa**2
    M = params.M
    r0 = params.r0
    C2 = C * C
    r_floor = R_FLOOR_FRACTION * params.r0
    sqrt = math.sqrt

    def rhs(t, y):
        (f, fdot, r, rdot, _th,
         fa, ga, ra, sa, _tha,
         fb, gb, rb, sb, _thb) = y.tolist() if isinstance(y, np.ndarray) else y
        if r <= r_floor:
            raise SingularityError(f"ring radius {r!r} below collision floor at t={t!r}", t=t)
        r2 = r * r
        r3 = r2 * r
        r4 = r2 * r2
        h2 = r2 + kap2 * f * f
        h = sqrt(h2)
        h3 = h2 * h
        h5 = h3 * h2
        # Jacobian of the (fdot, rdot) equations w.r.t. (f, r).
        Gf = -mu * (h2 - 3.0 * kap2 * f * f) / h5
        Gr = 3.0 * mu * f * r / h5
        Sf = 3.0 * M * kap2 * f * r / h5
        Sr = -3.0 * C2 / r4 + 2.0 * lam_m / r3 - M * (h2 - 3.0 * r2) / h5
        # Explicit a-derivatives through C = r0*a.
        Sa = 2.0 * r0 * C / r3
        Qr = -2.0 * C / r3
        Qa = r0 / r2
        return np.array(
            [
                fdot,
                -mu * f / h3,
                rdot,
                C2 / r3 - lam_m / r2 - M * r / h3,
                C / r2,
                ga,
                Gf * fa + Gr * ra,
                sa,
                Sf * fa + Sr * ra + Sa,
                Qr * ra + Qa,
                gb,
                Gf * fb + Gr * rb,
                sb,
                Sf * fb + Sr * rb,
                Qr * rb,
            ]
        )

    return rhs


def reduced_rhs(t: float, y, params: SystemParams, C: float) -> np.ndarray:
    """Single evaluation of the reduced vector field (convenience wrapper)."""
    return make_reduced_rhs(params, C)(t, np.asarray(y, dtype=float))


def variational_rhs(t: float, y, params: SystemParams, C: float) -> np.ndarray:
    return make_variational_rhs(params, C)(t, np.asarray(y, dtype=float))


def reduced_energy(state, params: SystemParams, C: float) -> float:
    """Total mechanical energy of the configuration, expressed in reduced variables.

    Constant along solutions of the reduced equations for any fixed C.
    """
    y = state.to_array() if isinstance(state, ReducedState) else np.asarray(state, dtype=float)
    f, fdot, r, rdot = (float(v) for v in y[:4])
    if r <= 0:
        raise SingularityError(f"ring radius {r!r} is not positive")
    n, m, M = params.n, params.m, params.M
    h = params.h(f, r)
    kinetic = (M * (m * n + M) / (2.0 * m * n)) * fdot**2 + 0.5 * n * m * (rdot**2 + (C / r) ** 2)
    potential = -n * m * m * params.lam / r - n * m * M / h
    return kinetic + potential


@dataclass(frozen=True)
class CartesianState:
    """Positions and velocities of all n+1 bodies; the axial body comes first."""

    masses: np.ndarray      # (n+1,)
    positions: np.ndarray   # (n+1, 3)
    velocities: np.ndarray  # (n+1, 3)

    @property
    def n_bodies(self) -> int:
        return len(self.masses)


def cartesian_lift(state: ReducedState, params: SystemParams, C: float) -> CartesianState:
    """Rebuild the full (n+1)-body configuration from a reduced state.

    The axial body sits at (0, 0, f); ring body k sits at phase
    theta + 2*pi*k/n in the plane z = -(M/(m*n))*f, so the center of mass
    stays at the origin.  Velocities follow by the chain rule with
    thetadot = C/r^2.
    """
    n, m, M = params.n, params.m, params.M
    f, fdot, r, rdot, theta = state.f, state.fdot, state.r, state.rdot, state.theta
    thetadot = C / (r * r)
    zf = params.z_factor

    phases = theta + 2.0 * math.pi * np.arange(n) / n
    cos_p = np.cos(phases)
    sin_p = np.sin(phases)

    positions = np.empty((n + 1, 3))
    velocities = np.empty((n + 1, 3))
    positions[0] = (0.0, 0.0, f)
    velocities[0] = (0.0, 0.0, fdot)
    positions[1:, 0] = r * cos_p
    positions[1:, 1] = r * sin_p
    positions[1:, 2] = -zf * f
    velocities[1:, 0] = rdot * cos_p - r * thetadot * sin_p
    velocities[1:, 1] = rdot * sin_p + r * thetadot * cos_p
    velocities[1:, 2] = -zf * fdot

    masses = np.concatenate(([M], np.full(n, m)))
    return CartesianState(masses=masses, positions=positions, velocities=velocities)


def full_rhs(state: CartesianState):
    """Pairwise Newtonian accelerations of the full system (G = 1).

    Returns (velocities, accelerations): the time derivative of the
    (positions, velocities) pair.  Used to cross-check the reduced
    equations, not to integrate.
    """
    pos = state.positions
    mass = state.masses
    nb = len(mass)
    acc = np.zeros_like(pos)
    for i in range(nb):
        for j in range(i + 1, nb):
            d = pos[j] - pos[i]
            dist2 = float(d @ d)
            if dist2 == 0.0:
                raise CollisionError(f"bodies {i} and {j} coincide")
            w = dist2**-1.5
            acc[i] += mass[j] * w * d
            acc[j] -= mass[i] * w * d
    return state.velocities, acc


def cartesian_energy(state: CartesianState) -> float:
    """Kinetic plus pairwise gravitational potential energy."""
    kinetic = 0.5 * float(np.sum(state.masses * np.sum(state.velocities**2, axis=1)))
    potential = 0.0
    pos = state.positions
    mass = state.masses
    nb = len(mass)
    for i in range(nb):
        for j in range(i + 1, nb):
            d = pos[j] - pos[i]
            potential -= mass[i] * mass[j] / math.sqrt(float(d @ d))
    return kinetic + potential


def center_of_mass(state: CartesianState) -> np.ndarray:
    return state.masses @ state.positions / float(np.sum(state.masses))


def total_momentum(state: CartesianState) -> np.ndarray:
    return state.masses @ state.velocities


def total_angular_momentum(state: CartesianState) -> np.ndarray:
    return np.sum(state.masses[:, None] * np.cross(state.positions, state.velocities), axis=0)
