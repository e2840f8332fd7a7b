"""Resonant orbit selection, full-space reconstruction and export.

A corrected family member closes in the reduced variables after one
period, but the lifted configuration also rotates by twice the phase
accumulated over [0, T] per reduced period.  When that phase is a rational
angle n1*pi/n2 the lifted orbit is periodic too: after n2 reduced periods
exactly, or earlier up to relabeling of the identical ring bodies.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np

from .continuation import Branch
from .integrate import IntegratorConfig, flow
from .model import (
    ReducedState,
    SystemParams,
    cartesian_energy,
    cartesian_lift,
    center_of_mass,
    make_reduced_rhs,
    reduced_initial,
    total_angular_momentum,
    total_momentum,
)
from .shoot import ConvergenceError, SeedPoint, newton_correct

__all__ = [
    "ResonanceNotFound",
    "ResonanceTarget",
    "closure_order",
    "find_resonance",
    "Trajectory",
    "reconstruct",
    "export",
    "load_trajectory",
    "trajectory_filename",
]


class ResonanceNotFound(RuntimeError):
    """The requested phase angle is not bracketed by the branch."""


@dataclass(frozen=True)
class ResonanceTarget:
    """Rational phase target theta = n1*pi/n2 in lowest terms."""

    n1: int
    n2: int

    def __post_init__(self):
        if self.n1 < 1 or self.n2 < 1:
            raise ValueError(f"resonance integers must be positive, got {self.n1}/{self.n2}")
        if math.gcd(self.n1, self.n2) != 1:
            raise ValueError(f"resonance fraction {self.n1}/{self.n2} is not in lowest terms")

    @property
    def angle(self) -> float:
        return self.n1 * math.pi / self.n2

    @property
    def tag(self) -> str:
        return f"{self.n1}pi{self.n2}"


def closure_order(target: ResonanceTarget, n: int) -> tuple[int, int]:
    """Reduced periods until the lifted orbit closes: (strict, up to relabeling).

    Each reduced period rotates the ring by 2*theta = 2*n1*pi/n2.  Strict
    closure needs k*2*n1/n2 to be an even integer multiple of 1; with the
    n identical ring bodies relabeled, a rotation by any multiple of
    2*pi/n also closes.
    """
    if n < 2:
        raise ValueError(f"need at least two ring bodies, got n={n}")
    frac = Fraction(target.n1, target.n2)  # already lowest terms
    k_strict = frac.denominator
    k_relabel = frac.denominator // math.gcd(frac.denominator, n)
    return k_strict, k_relabel


def find_resonance(
    branch: Branch,
    target: ResonanceTarget,
    config: IntegratorConfig | None = None,
    theta_tol: float = 1e-8,
    corrector_tol: float = 1e-10,
    max_iter: int = 80,
) -> SeedPoint:
    """Locate the branch point whose phase equals the target angle.

    Scans the stored points for a bracket, then closes in with an
    Illinois-damped regula falsi on the chord between the bracketing
    points; every trial is corrected back onto the family in the
    hyperplane orthogonal to the chord before its phase is read off.
    """
    params = branch.params
    angle = target.angle
    pts = branch.points
    if len(pts) < 2:
        raise ResonanceNotFound("branch carries fewer than two points")

    gap = [bp.point.theta - angle for bp in pts]
    for g, bp in zip(gap, pts):
        if abs(g) <= theta_tol:
            return bp.point
    idx = None
    for i in range(len(pts) - 1):
        if gap[i] * gap[i + 1] < 0.0:
            idx = i
            break
    if idx is None:
        lo, hi = min(gap), max(gap)
        raise ResonanceNotFound(
            f"phase {angle!r} not bracketed: branch covers offsets [{lo:.3e}, {hi:.3e}]"
        )

    x_lo = pts[idx].point.vector()
    x_hi = pts[idx + 1].point.vector()
    g_lo = gap[idx]
    g_hi = gap[idx + 1]
    chord = x_hi - x_lo
    normal = chord / np.linalg.norm(chord)
    kind = branch.kind

    w_lo, w_hi = 0.0, 1.0
    side = 0
    for _ in range(max_iter):
        w = (w_lo * g_hi - w_hi * g_lo) / (g_hi - g_lo)
        if not (w_lo < w < w_hi):
            w = 0.5 * (w_lo + w_hi)
        x_t = x_lo + w * chord
        guess = SeedPoint(a=float(x_t[0]), b=float(x_t[1]), T=float(x_t[2]), kind=kind)
        pt = newton_correct(guess, params, config, tol=corrector_tol, hyperplane=(x_t, normal))
        g_t = pt.theta - angle
        if abs(g_t) <= theta_tol:
            return pt
        if g_t * g_lo < 0.0:
            w_hi, g_hi = w, g_t
            if side == -1:
                g_lo *= 0.5  # Illinois: stop the stale end from sticking
            side = -1
        else:
            w_lo, g_lo = w, g_t
            if side == +1:
                g_hi *= 0.5
            side = +1
    raise ConvergenceError(f"resonance refinement did not reach {theta_tol!r} in {max_iter} iterations")


@dataclass
class Trajectory:
    """Sampled full-space orbit with conservation diagnostics.

    positions/velocities have shape (n_samples, n+1, 3) with the axial
    body first.  diagnostics holds scalar maxima over the samples (see
    `reconstruct`).
    """

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    masses: np.ndarray
    params: SystemParams
    source: SeedPoint
    periods: int
    diagnostics: dict


def _closure_error(traj: Trajectory) -> float:
    dp = np.linalg.norm(traj.positions[-1] - traj.positions[0], axis=1)
    dv = np.linalg.norm(traj.velocities[-1] - traj.velocities[0], axis=1)
    return float(np.max(dp + dv))


def _closure_error_relabel(traj: Trajectory, n: int) -> float:
    """Closure error minimized over cyclic relabelings of the ring bodies."""
    best = math.inf
    p0, v0 = traj.positions[0], traj.velocities[0]
    p1, v1 = traj.positions[-1], traj.velocities[-1]
    for shift in range(n):
        ring = 1 + (np.arange(n) + shift) % n
        order = np.concatenate(([0], ring))
        err = np.max(
            np.linalg.norm(p1[order] - p0, axis=1) + np.linalg.norm(v1[order] - v0, axis=1)
        )
        best = min(best, float(err))
    return best


def reconstruct(
    point: SeedPoint,
    params: SystemParams,
    periods: int = 1,
    samples_per_period: int = 512,
    config: IntegratorConfig | None = None,
) -> Trajectory:
    """Flow a corrected point over whole periods and lift every sample.

    The reduced period is 2T (odd) or 4T (odd/even).  Diagnostics, all
    maxima over the samples:
      energy_drift     relative spread of the full-system energy
      momentum_max     largest |total momentum| component
      com_max          center-of-mass distance from the origin over r0
      lz_drift         relative drift of the z angular momentum
      closure_error    max over bodies of |dx| + |dv| between endpoints
      closure_error_relabel  same, minimized over ring relabelings
    """
    if periods < 1:
        raise ValueError(f"periods must be a positive integer, got {periods!r}")
    if samples_per_period < 2:
        raise ValueError("need at least two samples per period")
    config = config or IntegratorConfig()
    t_end = periods * point.period
    cfg = replace(config, dense=True, h_max=config.h_max if config.h_max is not None else point.T / 16.0)
    C = params.r0 * point.a
    rhs = make_reduced_rhs(params, C)
    res = flow(rhs, reduced_initial(point.b, params), t_end, cfg).require_ok()

    n_samples = periods * samples_per_period + 1
    times = np.linspace(0.0, t_end, n_samples)
    times[-1] = t_end  # exact endpoint, bit for bit
    reduced = res.dense.sample(times)

    n = params.n
    positions = np.empty((n_samples, n + 1, 3))
    velocities = np.empty((n_samples, n + 1, 3))
    masses = None
    energies = np.empty(n_samples)
    momenta = np.empty((n_samples, 3))
    coms = np.empty((n_samples, 3))
    lzs = np.empty(n_samples)
    for i, (t, y) in enumerate(zip(times, reduced)):
        state = cartesian_lift(ReducedState.from_array(float(t), y), params, C)
        positions[i] = state.positions
        velocities[i] = state.velocities
        if masses is None:
            masses = state.masses
        energies[i] = cartesian_energy(state)
        momenta[i] = total_momentum(state)
        coms[i] = center_of_mass(state)
        lzs[i] = total_angular_momentum(state)[2]

    e_scale = max(abs(float(np.max(energies))), abs(float(np.min(energies))), 1e-300)
    lz_scale = max(float(np.max(np.abs(lzs))), 1e-300)
    traj = Trajectory(
        times=times,
        positions=positions,
        velocities=velocities,
        masses=masses,
        params=params,
        source=point,
        periods=periods,
        diagnostics={},
    )
    traj.diagnostics = {
        "energy_drift": float((np.max(energies) - np.min(energies)) / e_scale),
        "momentum_max": float(np.max(np.abs(momenta))),
        "com_max": float(np.max(np.linalg.norm(coms, axis=1)) / params.r0),
        "lz_drift": float((np.max(lzs) - np.min(lzs)) / lz_scale),
        "closure_error": _closure_error(traj),
        "closure_error_relabel": _closure_error_relabel(traj, n),
    }
    return traj


def export(traj: Trajectory, fmt: str, path) -> None:
    """Write a trajectory as 'csv' (flat body rows) or 'json' (full record).

    Floats are written with repr, so a JSON export re-imports bit for bit.
    """
    if fmt == "csv":
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("t,body,x,y,z,vx,vy,vz\n")
            for i, t in enumerate(traj.times):
                for body in range(traj.positions.shape[1]):
                    p = traj.positions[i, body]
                    v = traj.velocities[i, body]
                    row = (float(t), *map(float, p), *map(float, v))
                    fh.write(f"{row[0]!r},{body}," + ",".join(repr(x) for x in row[1:]) + "\n")
    elif fmt == "json":
        payload = {
            "params": traj.params.to_dict(),
            "source": traj.source.to_dict(),
            "periods": traj.periods,
            "masses": [float(v) for v in traj.masses],
            "times": [float(v) for v in traj.times],
            "positions": traj.positions.tolist(),
            "velocities": traj.velocities.tolist(),
            "diagnostics": traj.diagnostics,
        }
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
    else:
        raise ValueError(f"unknown export format {fmt!r}; expected 'csv' or 'json'")


def load_trajectory(path) -> Trajectory:
    """Re-import a JSON export; floats round-trip exactly."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return Trajectory(
        times=np.array(payload["times"]),
        positions=np.array(payload["positions"]),
        velocities=np.array(payload["velocities"]),
        masses=np.array(payload["masses"]),
        params=SystemParams.from_dict(payload["params"]),
        source=SeedPoint.from_dict(payload["source"]),
        periods=int(payload["periods"]),
        diagnostics=dict(payload["diagnostics"]),
    )


def trajectory_filename(point: SeedPoint, target: ResonanceTarget, ext: str = "csv") -> str:
    """Deterministic name <kind>_<n1>pi<n2>_<hash>.<ext> from the seed values."""
    digest = hashlib.sha256(
        json.dumps(point.to_dict(), sort_keys=True).encode("utf-8")
    ).hexdigest()[:8]
    return f"{point.kind.value}_{target.tag}_{digest}.{ext}"
