"""Hamiltonian isotopies that move finitely many points to prescribed targets.

Each move is a chain of short straight segments.  A segment is realised by
a compactly supported Hamiltonian: a ball of radius ``rho`` rides along the
segment with the moving point, inside it the Hamiltonian is the linear one
whose flow is the translation along the segment, and a smooth radial cutoff
switches it off at the ball boundary.  Points the ball never reaches never
move, so moving one point at a time, along paths that keep clear of all the
others, sends any finite configuration to any other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Isotopy, flow_map, symplecticity_residual
from .errors import DomainError, ExecutionError, PlanningError
from .hamiltonians import Hamiltonian
from .phase_space import PhaseSpace, chart_distance

MAX_POINTS = 16
MAX_DETOURS = 100
# clearance between a path and any other point, in units of the tube radius
CLEARANCE = 1.5
# angular extent of one segment; with rho <= pi/4 the tube stays inside one chart sheet
MAX_SEGMENT_ANGLE = 0.5 * math.pi
MAX_ANGULAR_RHO = 0.25 * math.pi
# a bump drags the points just outside its core along; short pieces keep that shear small
SEGMENT_LENGTH = 1.0
ENDPOINT_TOL = 1e-6
INTERFERENCE_TOL = 1e-9
SYMPLECTIC_TOL = 1e-5


def smoothstep_cutoff(d, rho: float):
    """Quintic-smoothstep cutoff: 1 for ``d <= rho/2``, 0 for ``d >= rho``.

    Returns ``(chi, dchi/dd)``; both are C^2 across the two switch radii.
    """
    half = 0.5 * rho
    u = np.clip((np.asarray(d, dtype=float) - half) / half, 0.0, 1.0)
    chi = 1.0 - u ** 3 * (10.0 - 15.0 * u + 6.0 * u ** 2)
    dchi = -30.0 * u ** 2 * (1.0 - u) ** 2 / half
    return chi, dchi


@dataclass(frozen=True, eq=False)
class BumpPath(Hamiltonian):
    """A translating bump: ``H(z, t) = chi(|z - c(t)|) * l(z, t)`` with centre ``c(t) = a + t v``.

    ``l = -(Omega v) . (z - c(t))`` in the chart lift around ``a`` has the
    constant field ``X_l = v``, and ``chi`` equals 1 within ``rho/2`` of the
    centre and 0 beyond ``rho``.  The point at the centre therefore rides
    along exactly, reaching ``a + v`` at ``t = 1``, while everything farther
    than ``rho`` from the segment ``[a, a + v]`` never moves.  Riding with
    the point keeps the shear of the flow bounded however long the segment.
    """

    space: PhaseSpace
    start: np.ndarray
    shift: np.ndarray
    rho: float
    kind = "bump_path"

    def __post_init__(self):
        a = self.space.point(self.start)
        v = np.array(self.space.check(self.shift), dtype=float)
        if a.ndim != 1 or v.ndim != 1:
            raise DomainError("a bump path takes one start point and one shift vector")
        if not np.all(np.isfinite(v)):
            raise DomainError("segment shift must be finite")
        if not (self.rho > 0 and math.isfinite(self.rho)):
            raise DomainError("bump radius must be positive")
        if self.space.has_angles:
            reach = float(np.max(np.abs(v[self.space.angular_mask]))) + self.rho
            if reach >= math.pi:
                raise DomainError(f"segment plus tube spans {reach:.3f} rad of an angle; split the segment")
        a.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "start", a)
        object.__setattr__(self, "shift", v)
        object.__setattr__(self, "rho", float(self.rho))

    @property
    def is_autonomous(self) -> bool:
        return not np.any(self.shift)

    @property
    def end(self) -> np.ndarray:
        return self.space.wrap(self.start + self.shift)

    def _centred(self, z, t):
        # lift displacement of z from the bump centre a + t v, and its length
        rel = self.space.check(z) - self.start
        if self.space.has_angles:
            mask = self.space.angular_mask
            rel[..., mask] = math.pi - np.mod(math.pi - rel[..., mask], 2.0 * math.pi)
        rel -= t * self.shift
        return rel, np.sqrt(np.einsum("...i,...i->...", rel, rel))

    def _linear(self, rel):
        u = -(self.space.omega @ self.shift)  # grad of l; Omega u = v because Omega^2 = -I
        return rel @ u, u

    def value(self, z, t: float = 0.0):
        rel, r = self._centred(z, t)
        chi, _ = smoothstep_cutoff(r, self.rho)
        return chi * self._linear(rel)[0]

    def gradient(self, z, t: float = 0.0):
        rel, r = self._centred(z, t)
        chi, dchi = smoothstep_cutoff(r, self.rho)
        ell, u = self._linear(rel)
        with np.errstate(invalid="ignore", divide="ignore"):
            grad_r = np.where(r[..., None] > 0, rel / r[..., None], 0.0)
        return chi[..., None] * u + (ell * dchi)[..., None] * grad_r

    def to_dict(self):
        return {"kind": self.kind, "space": self.space.to_dict(), "start": self.start.tolist(),
                "shift": self.shift.tolist(), "rho": self.rho}

    @classmethod
    def from_dict(cls, data: dict) -> BumpPath:
        return cls(PhaseSpace.from_dict(data["space"]), np.array(data["start"]), np.array(data["shift"]),
                   float(data["rho"]))


def bump_translation_hamiltonian(space: PhaseSpace, a, c, rho: float) -> BumpPath:
    """Bump Hamiltonian whose time-1 flow moves ``a`` to ``c`` along the shortest chart segment."""
    return BumpPath(space, a, space.displacement(space.point(a), space.point(c)), rho)


@dataclass(frozen=True)
class Stage:
    """One point's move along a polyline; ``path`` is given in the chart lift of its start."""

    point: int
    path: np.ndarray
    rho: float
    purpose: str = "move"  # or "park"

    def to_dict(self) -> dict:
        return {"point": self.point, "path": self.path.tolist(), "rho": self.rho, "purpose": self.purpose}


@dataclass(frozen=True)
class PointTransportPlan:
    space: PhaseSpace
    sources: np.ndarray
    targets: np.ndarray
    rho: float
    stages: tuple = ()

    def segments(self, stage: Stage) -> list:
        """The stage polyline cut into pieces short enough for one bump each."""
        out = []
        for p, q in zip(stage.path[:-1], stage.path[1:]):
            out.extend(_pieces(self.space, p, q, SEGMENT_LENGTH * stage.rho))
        return [(a, v) for a, v in out if np.any(v != 0)]

    def hamiltonians(self) -> list:
        """``(stage index, BumpPath)`` for every segment, in execution order."""
        out = []
        for i, stage in enumerate(self.stages):
            for a, v in self.segments(stage):
                out.append((i, BumpPath(self.space, a, v, stage.rho)))
        return out

    def to_dict(self) -> dict:
        return {"space": self.space.to_dict(), "sources": self.sources.tolist(),
                "targets": self.targets.tolist(), "rho": self.rho,
                "stages": [s.to_dict() for s in self.stages]}


def _segment_distance(space: PhaseSpace, p, q, o):
    """Distance from ``o`` to the chart segment ``[p, q]`` (``q`` in the lift of ``p``)."""
    rel = space.displacement(p, o)
    v = q - p
    vv = float(v @ v)
    s = float(np.clip(rel @ v / vv, 0.0, 1.0)) if vv > 0 else 0.0
    off = rel - s * v
    return float(np.linalg.norm(off)), p + s * v, rel


def _pairwise_min(space: PhaseSpace, pts) -> float:
    n = len(pts)
    best = math.inf
    for i in range(n):
        for j in range(i + 1, n):
            best = min(best, float(chart_distance(space, pts[i], pts[j])))
    return best


def _pieces(space: PhaseSpace, p, q, max_length: float = math.inf) -> list:
    """``[p, q]`` cut so no piece turns an angle by more than ``MAX_SEGMENT_ANGLE``
    or is longer than ``max_length``."""
    v = q - p
    ang = np.abs(v[space.angular_mask]) if space.has_angles else np.zeros(0)
    count = max(1, int(math.ceil(float(ang.max(initial=0.0)) / MAX_SEGMENT_ANGLE - 1e-12)),
                int(math.ceil(float(np.linalg.norm(v)) / max_length - 1e-12)))
    return [(p + v * k / count, v / count) for k in range(count)]


def _first_clash(space, path, obstacles, names, need):
    for p, q in zip(path[:-1], path[1:]):
        for a, v in _pieces(space, p, q):
            for j, o in zip(names, obstacles):
                d, foot, rel = _segment_distance(space, a, a + v, o)
                if d < need:
                    return j, foot, a + rel
    return None


def _normal(v, away, rng, random_dir):
    """Unit vector normal to ``v``: along ``away`` unless a random direction is asked for."""
    vn = v / np.linalg.norm(v) if np.any(v) else np.zeros_like(v)
    n = rng.standard_normal(v.shape) if random_dir else away
    n = n - (n @ vn) * vn
    if np.linalg.norm(n) < 1e-12:
        n = np.zeros_like(v)
        n[int(np.argmin(np.abs(vn)))] = 1.0
        n = n - (n @ vn) * vn
    return n / np.linalg.norm(n)


def _route(space: PhaseSpace, start, goal, obstacles, rho, point, names, rng):
    """Polyline from ``start`` to ``goal`` keeping ``CLEARANCE * rho`` from every obstacle.

    A blocked straight segment gets one detour waypoint, offset perpendicular
    to it from the blocking point; successive attempts alternate sides, push
    further out, and later try random perpendicular directions.
    """
    start = np.array(start, dtype=float)
    end = start + space.displacement(start, goal)
    need = CLEARANCE * rho
    clash = _first_clash(space, [start, end], obstacles, names, need)
    if clash is None:
        return np.array([start, end])
    first = clash
    for attempt in range(MAX_DETOURS):
        j, foot, o_lift = first
        side = 1.0 if attempt % 2 == 0 else -1.0
        n = side * _normal(end - start, foot - o_lift, rng, random_dir=attempt >= 20)
        offset = need * (1.5 + 0.5 * (attempt // 2 % 10))
        path = [start, o_lift + n * offset, end]
        clash = _first_clash(space, path, obstacles, names, need)
        if clash is None:
            return np.array(path)
    raise PlanningError(f"no clear path for point {point}: blocked by point {first[0]} after {MAX_DETOURS} detours")


def plan_transport(space: PhaseSpace, sources, targets, rng: np.random.Generator | None = None) -> PointTransportPlan:
    """Greedy one-point-at-a-time transport plan.

    Points already at their targets get no stage.  A point moves once its
    target is free; when every remaining target is occupied (a swap or a
    longer cycle) one point is first parked at a free spot.
    """
    src = space.point(np.atleast_2d(sources))
    tgt = space.point(np.atleast_2d(targets))
    if src.shape != tgt.shape or src.ndim != 2:
        raise DomainError("sources and targets must be equal-length point lists")
    n = src.shape[0]
    if n > MAX_POINTS:
        raise DomainError(f"at most {MAX_POINTS} points can be planned")
    if n > 1 and (_pairwise_min(space, src) == 0 or _pairwise_min(space, tgt) == 0):
        raise DomainError("sources and targets must be pairwise distinct")
    every = np.vstack([src, tgt])
    dists = [float(chart_distance(space, every[i], every[j]))
             for i in range(len(every)) for j in range(i + 1, len(every))]
    dists = [d for d in dists if d > 0]
    d_min = min(dists) if dists else 1.0
    rho = d_min / 3.0
    if space.has_angles:
        rho = min(rho, MAX_ANGULAR_RHO)
    rng = np.random.default_rng(0) if rng is None else rng

    current = src.copy()
    pending = [i for i in range(n) if chart_distance(space, src[i], tgt[i]) > 0]
    stages = []
    parked = set()

    def occupied(q, mover):
        return any(j != mover and chart_distance(space, current[j], q) < d_min for j in range(n))

    def move(i, goal, purpose):
        others = [j for j in range(n) if j != i]
        path = _route(space, current[i], goal, current[others], rho, i, others, rng)
        stages.append(Stage(i, path, rho, purpose))
        current[i] = space.wrap(path[-1])

    while pending:
        free = [i for i in pending if not occupied(tgt[i], i)]
        if free:
            i = free[0]
            move(i, tgt[i], "move")
            pending.remove(i)
            continue
        i = next(i for i in pending if i not in parked)
        move(i, _parking_spot(space, current, every, i, d_min, rng), "park")
        parked.add(i)
    return PointTransportPlan(space, src, tgt, rho, tuple(stages))


def _parking_spot(space, current, every, i, d_min, rng):
    dim = space.dim
    for attempt in range(MAX_DETOURS):
        if attempt < 2 * dim:
            direction = np.zeros(dim)
            direction[attempt // 2] = 1.0 if attempt % 2 == 0 else -1.0
        else:
            direction = rng.standard_normal(dim)
            direction /= np.linalg.norm(direction)
        radius = d_min * (1.0 + attempt // (2 * dim))
        spot = space.wrap(current[i] + radius * direction)
        others = np.vstack([np.delete(current, i, axis=0), every])
        if np.all(chart_distance(space, others, spot) >= d_min):
            return spot
    raise PlanningError(f"no parking spot found for point {i}")


@dataclass(frozen=True)
class VerificationRecord:
    endpoint_errors: tuple
    non_interference: tuple  # per stage: largest motion of any other tracked point
    symplecticity: tuple  # per stage: largest Jacobian residual over the probe points
    final_positions: np.ndarray = field(compare=False)

    @property
    def max_endpoint_error(self) -> float:
        return max(self.endpoint_errors, default=0.0)

    @property
    def max_non_interference(self) -> float:
        return max(self.non_interference, default=0.0)

    @property
    def max_symplecticity(self) -> float:
        return max(self.symplecticity, default=0.0)

    def to_dict(self) -> dict:
        return {
            "endpoint_errors": list(self.endpoint_errors),
            "max_endpoint_error": self.max_endpoint_error,
            "non_interference": list(self.non_interference),
            "max_non_interference": self.max_non_interference,
            "symplecticity": list(self.symplecticity),
            "max_symplecticity": self.max_symplecticity,
            "final_positions": self.final_positions.tolist(),
            "tolerances": {"endpoint": ENDPOINT_TOL, "non_interference": INTERFERENCE_TOL,
                           "symplecticity": SYMPLECTIC_TOL},
        }


def execute_plan(plan: PointTransportPlan, h: float = 1e-3, probes: int = 5,
                 rng: np.random.Generator | None = None, check: bool = True, delta: float = 1e-6):
    """Concatenate the stage Hamiltonians into one isotopy and verify it.

    Every tracked point is flowed through every segment.  The record holds
    per-point endpoint errors, the largest motion of the non-moving points in
    each stage, and per stage the worst symplecticity residual of the
    central-difference Jacobian (offset ``delta``) of a segment flow, taken
    at ``probes`` random points spread over the tubes of the stage's
    segments.  The probes ride in the same batch
    as the tracked points.
    """
    space, n = plan.space, plan.space.dim
    rng = np.random.default_rng(0) if rng is None else rng
    parts = plan.hamiltonians()
    iso = Isotopy(tuple((H, 1.0) for _, H in parts), "point-transport", space)
    z = plan.sources.copy()
    count = len(z)
    interference = [0.0] * len(plan.stages)
    sympl = [0.0] * len(plan.stages)
    eye = delta * np.eye(n)
    # probes per stage, each assigned to one of the stage's segments
    owners = {}
    for k in range(len(plan.stages)):
        seg_ids = [i for i, (kk, _) in enumerate(parts) if kk == k]
        if probes and seg_ids:
            for i in rng.choice(seg_ids, size=probes):
                owners[int(i)] = owners.get(int(i), 0) + 1
    for i, (k, H) in enumerate(parts):
        nprobe = owners.get(i, 0)
        batch = z
        if nprobe:
            centres = _tube_samples(space, H, nprobe, rng)
            fd = np.concatenate([centres[:, None, :] + eye, centres[:, None, :] - eye], axis=1).reshape(-1, n)
            batch = np.vstack([z, space.wrap(fd)])
        out = flow_map(H, batch, 0.0, 1.0, h)
        others = [j for j in range(count) if j != plan.stages[k].point]
        if others:
            moved = float(np.max(chart_distance(space, out[others], z[others])))
            interference[k] = max(interference[k], moved)
        z = out[:count]
        if nprobe:
            ends = out[count:].reshape(nprobe, 2 * n, n)
            jms = np.swapaxes(space.displacement(ends[:, n:], ends[:, :n]), -1, -2) / (2.0 * delta)
            sympl[k] = max(sympl[k], max(symplecticity_residual(space, jm) for jm in jms))
    errors = tuple(float(e) for e in np.atleast_1d(chart_distance(space, z, plan.targets))) if count else ()
    record = VerificationRecord(errors, tuple(interference), tuple(sympl), z)
    if check:
        if record.max_endpoint_error >= ENDPOINT_TOL:
            worst = int(np.argmax(errors))
            raise ExecutionError(f"point {worst} ends {errors[worst]:.3e} from its target")
        if record.max_non_interference >= INTERFERENCE_TOL:
            worst = int(np.argmax(interference))
            raise ExecutionError(f"stage {worst} moved another point by {interference[worst]:.3e}")
        if record.max_symplecticity >= SYMPLECTIC_TOL:
            worst = int(np.argmax(sympl))
            raise ExecutionError(f"stage {worst} flow has symplecticity residual {sympl[worst]:.3e}")
    return iso, record


def _tube_samples(space: PhaseSpace, H: BumpPath, count: int, rng) -> np.ndarray:
    # random points within rho of random points of the segment
    s = rng.uniform(0.0, 1.0, (count, 1))
    jitter = rng.standard_normal((count, space.dim))
    jitter *= (rng.uniform(0.0, H.rho, count) / np.linalg.norm(jitter, axis=1))[:, None]
    return space.wrap(H.start + s * H.shift + jitter)


def coin_example(space: PhaseSpace | None = None):
    """Copy a coin: ``(A, B) = (tails, heads)`` goes to ``(tails, tails)``, ``(heads, heads)`` stays.

    Heads is ``(0, 0)`` and tails ``(pi, 0)`` on each coin's cylinder.
    """
    from .phase_space import cylinder

    space = PhaseSpace.of(cylinder(), cylinder()) if space is None else space
    heads, tails = [0.0, 0.0], [math.pi, 0.0]
    sources = np.array([heads + heads, tails + heads])
    targets = np.array([heads + heads, tails + tails])
    return space, sources, targets


def random_configuration(space: PhaseSpace, n: int, rng: np.random.Generator, min_spacing: float = 1.0,
                         momentum_range: float = 3.0, max_tries: int = 10000):
    """``n`` sources and ``n`` targets, all pairwise at least ``min_spacing`` apart (rejection sampling)."""
    lo = np.where(space.angular_mask, 0.0, -momentum_range)
    hi = np.where(space.angular_mask, 2.0 * math.pi, momentum_range)
    pts = []
    for _ in range(max_tries):
        cand = space.point(rng.uniform(lo, hi))
        if all(chart_distance(space, cand, p) >= min_spacing for p in pts):
            pts.append(cand)
            if len(pts) == 2 * n:
                arr = np.array(pts)
                return arr[:n], arr[n:]
    raise DomainError("could not place the requested points with the given spacing")
