"""Implicit midpoint flows of time-dependent Hamiltonians.

All flows run on batches: ``z`` may have any number of leading axes.  Inside
a step angular slots stay in their unwrapped lift so the midpoint average
never straddles a branch cut; results are wrapped afterwards.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DomainError, IntegrationError
from .hamiltonians import FourierPoly, Hamiltonian, Quadratic
from .phase_space import PhaseSpace, chart_distance

RESIDUAL_TOL = 1e-13
MAX_ITER = 50
# fixed-point sweeps before switching the unconverged rows to Newton
FIXED_POINT_SWEEPS = 25


def hamiltonian_vector_field(H: Hamiltonian, z, t: float = 0.0) -> np.ndarray:
    """``X_H`` with ``omega(X_H, .) = dH``; equals ``Omega @ grad H`` because ``Omega^2 = -I``."""
    perm, sign = H.space.omega_perm
    return H.gradient(z, t)[..., perm] * sign


def _midpoint_solve(H, z, t, h, tol, max_iter, on_fail):
    """Solve ``z1 = z + h X((z + z1)/2, t + h/2)`` for every batch row.

    Returns the unwrapped solution.  Rows that do not converge raise, or are
    set to NaN when ``on_fail == "nan"``.
    """
    tm = t + 0.5 * h
    lead = z.shape[:-1]
    n = z.shape[-1]
    H = _row_view(H, lead, slice(None))
    z = z.reshape(-1, n)
    scale = tol * np.maximum(1.0, np.max(np.abs(z), axis=-1, initial=0.0))
    z1 = z + h * hamiltonian_vector_field(H, z, tm)
    res = np.full(z.shape[0], np.inf)
    # sweep only the rows still moving; rows whose residual stops shrinking go to Newton
    dead = ~np.all(np.isfinite(z), axis=-1)
    active = ~dead
    stuck = np.zeros(z.shape[0], dtype=bool)
    sweeps = min(FIXED_POINT_SWEEPS, max_iter)
    sweep = 0
    for sweep in range(sweeps if np.any(active) else 0):
        idx = np.nonzero(active)[0]
        sub = H if idx.size == active.size else _row_view(H, lead, idx)
        zz = z[idx]
        nxt = zz + h * hamiltonian_vector_field(sub, 0.5 * (zz + z1[idx]), tm)
        r = np.max(np.abs(nxt - z1[idx]), axis=-1)
        if sweep >= 3:
            stuck[idx] = ~(r < 0.5 * res[idx])
        res[idx] = r
        z1[idx] = nxt
        active = ~(res < scale) & ~stuck
        if not np.any(active):
            break
    bad = ~(res < scale)
    if np.any(bad & ~dead) and max_iter > sweep + 1:
        z1, res = _newton_rows(H, z, z1, tm, h, bad & ~dead, scale, res, max_iter - sweep - 1, lead)
        bad = ~(res < scale)
    if np.any(bad):
        worst = float(np.max(np.where(bad & np.isfinite(res), res, -np.inf)))
        if on_fail != "nan":
            raise IntegrationError(f"midpoint equation did not converge in {max_iter} iterations at t={t:.6g}",
                                   worst)
        z1[bad] = np.nan
    return z1.reshape(lead + (n,))


def _newton_rows(H, z, z1, tm, h, rows, scale, res, iters, lead):
    # Newton on F(w) = w - z - h X((z+w)/2); Jacobian of X by forward differences
    z1, res = z1.copy(), res.copy()
    idx = np.nonzero(rows)[0]
    zz, ww, sc = z[idx], z1[idx], scale[idx]
    sub = _row_view(H, lead, idx)
    n = z.shape[-1]
    r = np.full(idx.size, np.inf)
    for _ in range(iters):
        mid = 0.5 * (zz + ww)
        X = hamiltonian_vector_field(sub, mid, tm)
        F = ww - zz - h * X
        r = np.max(np.abs(F), axis=-1)
        if np.all(r < sc):
            break
        eps = 1e-7 * np.maximum(1.0, np.abs(mid))
        jac = np.empty(mid.shape + (n,))
        for j in range(n):
            m2 = mid.copy()
            m2[:, j] += eps[:, j]
            jac[:, :, j] = (hamiltonian_vector_field(sub, m2, tm) - X) / eps[:, j, None]
        A = np.eye(n) - 0.5 * h * jac
        with np.errstate(all="ignore"):
            try:
                ww = ww - np.linalg.solve(A, F[..., None])[..., 0]
            except np.linalg.LinAlgError:
                break
    res[idx] = r
    z1[idx] = ww
    return z1, res


def _row_view(H, lead_shape, rows):
    # batched Fourier coefficients follow the flattened rows of z
    if isinstance(H, FourierPoly) and H.coeffs.ndim > 1:
        coeffs = H.coeffs
        if coeffs.ndim != 2 or coeffs.shape[0] != int(np.prod(lead_shape)):
            coeffs = np.broadcast_to(coeffs, tuple(lead_shape) + coeffs.shape[-1:]).reshape(-1, coeffs.shape[-1])
        return H.with_coeffs(coeffs[rows])
    return H


def step_implicit_midpoint(H: Hamiltonian, z, t: float, h: float, tol: float = RESIDUAL_TOL,
                           max_iter: int = MAX_ITER) -> np.ndarray:
    """One implicit midpoint step; the result is wrapped."""
    z = H.space.check(z)
    if h == 0:
        return H.space.wrap(z)
    return H.space.wrap(_midpoint_solve(H, z, t, h, tol, max_iter, "raise"))


def time_grid(t0: float, t1: float, h: float) -> np.ndarray:
    """Step boundaries ``t0, t0 + h, ...`` ending exactly at ``t1``; the last step may be shorter."""
    if h <= 0:
        raise DomainError("step size must be positive")
    span = t1 - t0
    if span == 0:
        return np.array([t0])
    n = max(1, int(np.ceil(abs(span) / h - 1e-9)))
    direction = 1.0 if span > 0 else -1.0
    grid = t0 + direction * h * np.arange(n + 1)
    grid[-1] = t1
    return grid


def flow_map(H: Hamiltonian, z, t0: float, t1: float, h: float, tol: float = RESIDUAL_TOL,
             max_iter: int = MAX_ITER, on_fail: str = "raise") -> np.ndarray:
    """Endpoint ``Phi_{t0 -> t1}(z)`` of the midpoint flow (batched, wrapped).

    ``t1 < t0`` integrates backwards on the mirrored grid, which makes
    forward-then-backward round trips reversible.
    """
    z = H.space.check(z)
    # in "nan" mode rows that already failed upstream simply stay failed
    if on_fail != "nan" and not np.all(np.isfinite(z)):
        raise DomainError("flow needs finite start points")
    grid = time_grid(t0, t1, h)
    w = np.array(z, dtype=float)
    for a, b in zip(grid[:-1], grid[1:]):
        w = _midpoint_solve(H, w, a, b - a, tol, max_iter, on_fail)
    return H.space.wrap(w)


@dataclass(frozen=True)
class Trajectory:
    space: PhaseSpace
    times: np.ndarray
    points: np.ndarray
    h: float
    integrator: str = "implicit_midpoint"

    @property
    def endpoint(self) -> np.ndarray:
        return self.points[-1]

    def to_csv(self, path) -> None:
        """Write columns ``t, coord_0, ..., coord_{n-1}``; batch axes are flattened."""
        pts = self.points.reshape(len(self.times), -1)
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"coord_{i}" for i in range(pts.shape[1])])
            for t, row in zip(self.times, pts):
                writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def flow(H: Hamiltonian, z, t0: float, t1: float, h: float, tol: float = RESIDUAL_TOL,
         max_iter: int = MAX_ITER) -> Trajectory:
    z = H.space.check(z)
    grid = time_grid(t0, t1, h)
    pts = [H.space.wrap(z)]
    w = np.array(z, dtype=float)
    for a, b in zip(grid[:-1], grid[1:]):
        w = _midpoint_solve(H, w, a, b - a, tol, max_iter, "raise")
        pts.append(H.space.wrap(w))
    return Trajectory(H.space, grid, np.array(pts), h)


def flow_jacobian(H: Hamiltonian, z, t0: float, t1: float, h: float, delta: float = 1e-5) -> np.ndarray:
    """Central finite-difference Jacobian of the flow map.

    ``z`` is one point or a batch ``(..., n)``; the result has shape ``(..., n, n)``.
    All probe points share a single flow call.
    """
    if delta <= 0:
        raise DomainError("finite-difference offset must be positive")
    space = H.space
    z = space.check(z)
    n = space.dim
    lead = z.shape[:-1]
    pts = z.reshape(-1, n)
    eye = delta * np.eye(n)
    probes = np.concatenate([pts[:, None, :] + eye, pts[:, None, :] - eye], axis=1)
    out = flow_map(H, probes.reshape(-1, n), t0, t1, h).reshape(-1, 2 * n, n)
    jm = np.swapaxes(space.displacement(out[:, n:], out[:, :n]), -1, -2) / (2.0 * delta)
    return jm.reshape(lead + (n, n))


def symplecticity_residual(space: PhaseSpace, jm) -> float:
    """``max |Jm^T Omega Jm - Omega|``."""
    jm = np.asarray(jm, dtype=float)
    if jm.shape != (space.dim, space.dim):
        raise DomainError(f"Jacobian shape {jm.shape} does not match dimension {space.dim}")
    om = space.omega
    return float(np.max(np.abs(jm.T @ om @ jm - om)))


def energy_drift(H: Hamiltonian, z0, t1: float, h: float) -> float:
    """Largest ``|H(z_t) - H(z_0)|`` along the stepped trajectory of an autonomous ``H``."""
    if not H.is_autonomous:
        raise DomainError("energy drift is only meaningful for autonomous Hamiltonians")
    traj = flow(H, z0, 0.0, t1, h)
    e = H.value(traj.points)
    return float(np.max(np.abs(e - e[0])))


def round_trip_error(H: Hamiltonian, z0, t1: float, h: float) -> float:
    """Chart distance between ``z0`` and its image after flowing to ``t1`` and back."""
    there = flow_map(H, z0, 0.0, t1, h)
    back = flow_map(H, there, t1, 0.0, h)
    return float(np.max(chart_distance(H.space, back, H.space.check(z0))))


def cayley_step_matrix(A: np.ndarray, h: float) -> np.ndarray:
    """Exact midpoint step of the linear field ``z' = A z``: ``(I - hA/2)^{-1}(I + hA/2)``."""
    n = A.shape[-1]
    eye = np.eye(n)
    return np.linalg.solve(eye - 0.5 * h * A, eye + 0.5 * h * A)


def step_groups(t0: float, t1: float, h: float):
    """Runs of equal step lengths on the grid, as ``[(step, count), ...]``."""
    steps = np.diff(time_grid(t0, t1, h))
    groups = []
    for st in steps:
        if groups and abs(st - groups[-1][0]) <= 1e-12 * abs(h):
            groups[-1][1] += 1
        else:
            groups.append([float(st), 1])
    return [(st, n) for st, n in groups]


def linear_propagator(H: Quadratic, t0: float, t1: float, h: float) -> np.ndarray:
    """Matrix of the midpoint flow map of a quadratic Hamiltonian.

    Runs of steps that share a coefficient matrix are combined by repeated
    squaring, so the result agrees with stepping :func:`flow_map` up to
    rounding.
    """
    if not isinstance(H, Quadratic):
        raise DomainError("linear_propagator needs a quadratic Hamiltonian")
    om = H.space.omega
    grid = time_grid(t0, t1, h)
    prop = np.eye(H.space.dim)
    if H.mode == "linear":
        for a, b in zip(grid[:-1], grid[1:]):
            prop = cayley_step_matrix(om @ H.matrix(0.5 * (a + b)), b - a) @ prop
        return prop
    runs = []
    for a, b in zip(grid[:-1], grid[1:]):
        key = (H.piece_index(0.5 * (a + b)), b - a)
        if runs and runs[-1][0] == key[0] and abs(runs[-1][1] - key[1]) <= 1e-12 * h:
            runs[-1][2] += 1
        else:
            runs.append([key[0], key[1], 1])
    for piece, step, count in runs:
        C = cayley_step_matrix(om @ H.matrices[piece], step)
        prop = np.linalg.matrix_power(C, count) @ prop
    return prop


@dataclass(frozen=True)
class Isotopy:
    """Composition of flows: stage ``k`` flows ``H_k`` over ``[0, duration_k]``.

    Every stage is a Hamiltonian flow, so the composite is connected to the
    identity through the family of partial flows.
    """

    stages: tuple[tuple[Hamiltonian, float], ...]
    label: str = "isotopy"
    space: PhaseSpace | None = field(default=None, compare=False)

    def __post_init__(self):
        stages = tuple((H, float(d)) for H, d in self.stages)
        spaces = {H.space for H, _ in stages}
        if len(spaces) > 1:
            raise DomainError("all isotopy stages must live on one phase space")
        if any(d <= 0 for _, d in stages):
            raise DomainError("isotopy durations must be positive")
        space = self.space if not stages else stages[0][0].space
        if space is None:
            raise DomainError("an empty isotopy needs an explicit space")
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "space", space)

    @classmethod
    def identity(cls, space: PhaseSpace, label: str = "identity") -> Isotopy:
        return cls((), label, space)

    def __call__(self, z, h: float = 1e-3, **kw) -> np.ndarray:
        return self.apply(z, h, **kw)

    def apply(self, z, h: float = 1e-3, **kw) -> np.ndarray:
        z = self.space.wrap(self.space.check(z))
        for H, d in self.stages:
            z = flow_map(H, z, 0.0, d, h, **kw)
        return z

    def jacobian(self, z, h: float = 1e-3, delta: float = 1e-5) -> np.ndarray:
        n = self.space.dim
        z = self.space.check(z)
        probes = np.concatenate([z + delta * np.eye(n), z - delta * np.eye(n)])
        out = self.apply(probes, h)
        return self.space.displacement(out[n:], out[:n]).T / (2.0 * delta)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "space": self.space.to_dict(),
            "stages": [{"hamiltonian": H.to_dict(), "duration": d} for H, d in self.stages],
        }
