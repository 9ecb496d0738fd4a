"""Derivative-free search for approximate cloning maps.

Candidates are flows of parametrised Hamiltonians on ``M x M x N``, so every
candidate is connected to the identity by construction.  The objective is
the mean squared chart distance of the two system outputs from the input.
On (R^2, omega0) the search can drive this to zero; on the cylinder the
second output cannot follow a non-contractible probe loop, which leaves an
angular error of at least pi somewhere on the loop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .cloning_linear import CloneSetup
from .dynamics import Isotopy, cayley_step_matrix, flow_map, step_groups
from .errors import DomainError, IntegrationError
from .es import cma_es_many
from .hamiltonians import FourierPoly, Quadratic, fourier_basis
from .loop_topology import Loop, circle_loop, transport_pair, winding_vector
from .phase_space import PhaseSpace, chart_distance, signed_angle

FLOOR_RESOLUTION = 0.05
MAX_FLOOR_DOUBLINGS = 4


@dataclass(frozen=True)
class CandidateFamily:
    """Parametrised Hamiltonians, one per stage, flowed over ``durations``.

    ``kind="quadratic"`` uses a free symmetric matrix per stage (Euclidean
    spaces only); ``kind="fourier"`` uses the Fourier-polynomial basis with
    frequency cap ``max_freq``, power cap ``max_power`` and total degree cap
    ``max_total`` (cross terms between factors included).
    """

    space: PhaseSpace
    kind: str = "fourier"
    durations: tuple = (0.5, 0.5)
    max_freq: int = 1
    max_power: int = 2
    max_total: int = 2
    h: float = 1e-3
    params: np.ndarray | None = None
    basis: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if self.kind == "quadratic":
            if self.space.has_angles:
                raise DomainError("quadratic families need a Euclidean space")
        elif self.kind == "fourier":
            if max(self.max_freq, self.max_power, self.max_total) > 6:
                raise DomainError("Fourier family caps are limited to 6")
            object.__setattr__(self, "basis", fourier_basis(self.space, self.max_freq, self.max_power, self.max_total))
        else:
            raise DomainError(f"unknown family kind {self.kind!r}")
        if any(d <= 0 for d in self.durations):
            raise DomainError("stage durations must be positive")
        object.__setattr__(self, "durations", tuple(float(d) for d in self.durations))
        params = np.zeros(self.n_params) if self.params is None else np.asarray(self.params, dtype=float)
        if params.shape != (self.n_params,):
            raise DomainError(f"family has {self.n_params} parameters, got shape {params.shape}")
        object.__setattr__(self, "params", params)

    @property
    def per_stage(self) -> int:
        if self.kind == "quadratic":
            n = self.space.dim
            return n * (n + 1) // 2
        return len(self.basis[2])

    @property
    def n_params(self) -> int:
        return self.per_stage * len(self.durations)

    def with_params(self, params) -> CandidateFamily:
        return replace(self, params=np.asarray(params, dtype=float))

    def _stage_arrays(self, params):
        """Per-stage coefficient arrays for a batch of parameter rows."""
        params = np.atleast_2d(params)
        stages = params.reshape(params.shape[0], len(self.durations), self.per_stage)
        if self.kind == "fourier":
            return [stages[:, k, :] for k in range(len(self.durations))]
        n = self.space.dim
        iu = np.triu_indices(n)
        mats = np.zeros(stages.shape[:2] + (n, n))
        mats[..., iu[0], iu[1]] = stages
        mats = mats + np.swapaxes(mats, -1, -2) * (1 - np.eye(n))
        return [mats[:, k] for k in range(len(self.durations))]

    def hamiltonians(self, params=None):
        params = self.params if params is None else params
        out = []
        for arr in self._stage_arrays(params):
            if self.kind == "fourier":
                f, p, s = self.basis
                out.append(FourierPoly(self.space, f, p, s, arr[0]))
            else:
                out.append(Quadratic.constant(self.space, arr[0]))
        return out

    def isotopy(self, params=None, label: str = "candidate") -> Isotopy:
        return Isotopy(tuple(zip(self.hamiltonians(params), self.durations)), label)

    def propagate(self, params, points) -> np.ndarray:
        """Image of ``points`` (S, dim) under every candidate row: shape (B, S, dim).

        Candidates whose midpoint solve fails come back as NaN rows.
        """
        points = self.space.check(points)
        stages = self._stage_arrays(params)
        nb = stages[0].shape[0]
        if self.kind == "quadratic":
            om = self.space.omega
            prop = np.broadcast_to(np.eye(self.space.dim), (nb, self.space.dim, self.space.dim))
            for mats, d in zip(stages, self.durations):
                A = om @ mats
                stage = np.broadcast_to(np.eye(self.space.dim), A.shape)
                for hs, count in step_groups(0.0, d, self.h):
                    stage = np.linalg.matrix_power(cayley_step_matrix(A, hs), count) @ stage
                prop = stage @ prop
            with np.errstate(all="ignore"):
                return np.einsum("bij,sj->bsi", prop, points)
        f, p, s = self.basis
        z = np.broadcast_to(points, (nb,) + points.shape)
        for coeffs, d in zip(stages, self.durations):
            H = FourierPoly(self.space, f, p, s, coeffs[:, None, :])
            with np.errstate(all="ignore"):
                z = flow_map(H, z, 0.0, d, self.h, on_fail="nan")
        return z


def _objective_from_images(setup: CloneSetup, images, x) -> np.ndarray:
    out1, out2, _ = setup.split(images)
    d1 = chart_distance(setup.system, out1, x)
    d2 = chart_distance(setup.system, out2, x)
    vals = np.mean(d1 ** 2 + d2 ** 2, axis=-1)
    return np.where(np.isfinite(vals), vals, np.inf)


def cloning_objective(cand: CandidateFamily, setup: CloneSetup, sample) -> float:
    """Mean over the sample of ``d(out1, x)^2 + d(out2, x)^2``; failed flows give +inf."""
    x = setup.system.point(np.atleast_2d(sample))
    try:
        images = cand.propagate(cand.params[None], setup.lift(x))
    except IntegrationError:
        return math.inf
    return float(_objective_from_images(setup, images, x)[0])


@dataclass(frozen=True)
class FloorMeasurement:
    value: float
    resolution: float
    samples: int
    per_slot: tuple

    def to_dict(self) -> dict:
        return {"value": self.value, "resolution": self.resolution, "samples": self.samples,
                "per_slot": list(self.per_slot)}


def angular_error_floor(cand: CandidateFamily, setup: CloneSetup, probe: Loop) -> FloorMeasurement:
    """Largest shortest-arc gap between the angles of output 2 and of the probe.

    The sampled maximum underestimates the continuous supremum by at most
    half the largest step of the lifted gap, reported as ``resolution``; the
    probe is refined until that is below ``FLOOR_RESOLUTION`` when possible.
    """
    m = setup.system
    if not m.has_angles:
        raise DomainError("angular error floor needs a system space with angular slots")
    if probe.space != m:
        raise DomainError("probe loop must live in the system space")
    w = winding_vector(probe)
    slots = [i for i, wi in zip(m.angular_slots, w) if wi]
    if not slots:
        raise DomainError("probe loop must be non-contractible")
    gen = None if probe.generator is None else (lambda s: setup.lift(probe.generator(s)))
    lifted = Loop(setup.product, setup.lift(probe.points), probe.params, gen)
    iso = cand.isotopy()
    src, img = transport_pair(iso, lifted, cand.h)
    offset = m.dim  # output 2 occupies the second copy of M
    for doubling in range(MAX_FLOOR_DOUBLINGS + 1):
        gaps = signed_angle(img.points[:, [offset + i for i in slots]] - src.points[:, slots])
        gaps = np.atleast_2d(gaps.T).T
        steps = signed_angle(np.diff(np.vstack([gaps, gaps[:1]]), axis=0))
        resolution = 0.5 * float(np.max(np.abs(steps)))
        if resolution <= FLOOR_RESOLUTION or doubling == MAX_FLOOR_DOUBLINGS:
            break
        src, img = transport_pair(iso, src.refined(), cand.h)
    per_slot = tuple(float(v) for v in np.max(np.abs(gaps), axis=0))
    return FloorMeasurement(max(per_slot), resolution, img.n_samples, per_slot)


@dataclass(frozen=True)
class ApproxReport:
    family: str
    space: str
    best_params: np.ndarray
    best_objective: float
    trace: tuple
    deviations: dict
    floor: FloorMeasurement | None
    sample: dict
    evaluations: int
    restarts: int
    seed: int

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "space": self.space,
            "best_params": self.best_params.tolist(),
            "best_objective": self.best_objective,
            "trace": [list(t) for t in self.trace],
            "deviations": dict(self.deviations),
            "floor": None if self.floor is None else self.floor.to_dict(),
            "sample": dict(self.sample),
            "evaluations": self.evaluations,
            "restarts": self.restarts,
            "seed": self.seed,
        }


def _deviations(setup, cand, x):
    out1, out2, _ = setup.evaluate(x, cand.isotopy())
    d1 = np.atleast_1d(chart_distance(setup.system, out1, x))
    d2 = np.atleast_1d(chart_distance(setup.system, out2, x))
    return {"h1_max": float(d1.max()), "h1_mean": float(d1.mean()),
            "h2_max": float(d2.max()), "h2_mean": float(d2.mean())}


def optimize(family: CandidateFamily, setup: CloneSetup, sample, budget: int, seed: int = 0,
             sigma0: float = 0.5, popsize: int = 16, stagnation: int = 50, f_target: float = 1e-8,
             param_bound: float | None = 5.0, probe: Loop | None = None) -> ApproxReport:
    """Seeded CMA-ES over the family parameters.

    ``budget == 0`` returns the identity candidate.  For systems with angular
    slots the floor of the best candidate is measured on ``probe`` (default:
    a 512-sample loop once around the first angular slot through ``b``).
    """
    return optimize_seeds(family, setup, sample, budget, (seed,), sigma0, popsize, stagnation,
                          f_target, param_bound, probe)[0]


def optimize_seeds(family: CandidateFamily, setup: CloneSetup, sample, budget: int, seeds,
                   sigma0: float = 0.5, popsize: int = 16, stagnation: int = 50, f_target: float = 1e-8,
                   param_bound: float | None = 5.0, probe: Loop | None = None) -> list:
    """One :func:`optimize` report per seed; the runs share objective calls."""
    if budget != 0 and budget < 100:
        raise DomainError("optimisation budget must be 0 or at least 100 evaluations")
    if family.space != setup.product:
        raise DomainError("family must act on M x M x N")
    seeds = [int(s) for s in seeds]
    x = setup.system.point(np.atleast_2d(sample))
    lifted = setup.lift(x)

    def batch_objective(P):
        return _objective_from_images(setup, family.propagate(P, lifted), x)

    x0 = np.zeros(family.n_params)
    if budget == 0:
        fbest = float(batch_objective(x0[None])[0])
        results = [(x0, fbest, ((1, fbest),), 1, 0) for _ in seeds]
    else:
        rngs = [np.random.default_rng(s) for s in seeds]
        results = [(r.x_best, r.f_best, tuple(r.trace), r.evaluations, r.restarts)
                   for r in cma_es_many(batch_objective, x0, sigma0, budget, rngs, popsize, stagnation,
                                        f_target, param_bound)]
    if setup.system.has_angles and probe is None:
        probe = circle_loop(setup.system, {setup.system.angular_slots[0]: 1}, base=setup.blank, n=512)
    reports = []
    for seed, (best, fbest, trace, evals, restarts) in zip(seeds, results):
        cand = family.with_params(best)
        floor = angular_error_floor(cand, setup, probe) if setup.system.has_angles else None
        reports.append(ApproxReport(
            family=family.kind,
            space=str(setup.product),
            best_params=best,
            best_objective=float(fbest),
            trace=trace,
            deviations=_deviations(setup, cand, x),
            floor=floor,
            sample={"size": int(x.shape[0]), "points": x.tolist()},
            evaluations=int(evals),
            restarts=int(restarts),
            seed=seed,
        ))
    return reports
