"""Winding invariants of sampled loops and no-go certificates for cloning.

Free homotopy classes of loops in products of cylinders and tori are
classified by the winding number of each angular slot.  A Hamiltonian
isotopy is homotopic to the identity, so transporting a loop through it
leaves every winding number unchanged.  A cloning map would have to send the
loop ``(g, b, r)`` (windings ``(w, 0, *)``) to ``(g, g, f(g))`` (windings
``(w, w, *)``); the certificate records that the transported class keeps the
second slot at 0.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .cloning_linear import CloneSetup
from .dynamics import Isotopy
from .errors import ConsistencyError, DomainError, ResolutionError
from .hamiltonians import random_fourier
from .phase_space import PhaseSpace, signed_angle

ADEQUACY_STEP = 0.5 * math.pi
MAX_DOUBLINGS = 4
MIN_SAMPLES = 8


def winding_number(angles) -> int:
    """Total turning of a cyclic sequence of angles, in units of 2pi."""
    a = np.asarray(angles, dtype=float)
    if a.ndim != 1 or a.size == 0:
        raise DomainError("winding_number takes a non-empty 1-d sequence")
    inc = signed_angle(np.diff(np.append(a, a[0])))
    inc = np.atleast_1d(inc)
    if np.any(np.abs(inc) >= math.pi):
        raise ResolutionError(f"angular step {np.max(np.abs(inc)):.3f} >= pi; refine the sampling")
    total = float(np.sum(inc)) / (2.0 * math.pi)
    w = int(round(total))
    if abs(total - w) >= 0.05:
        raise ConsistencyError(f"winding sum {total:.4f} is not close to an integer")
    return w


@dataclass(frozen=True)
class Loop:
    """Cyclically ordered samples of a closed curve.

    ``params`` are the curve parameters in [0, 1) of the samples.  When a
    ``generator`` (parameter array -> points) is attached, refinement
    resamples the curve itself; otherwise it interpolates along shortest
    arcs between neighbouring samples.
    """

    space: PhaseSpace
    points: np.ndarray
    params: np.ndarray
    generator: Optional[Callable] = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        pts = self.space.wrap(self.space.check(self.points))
        if pts.ndim != 2 or pts.shape[0] < MIN_SAMPLES:
            raise DomainError(f"a loop needs at least {MIN_SAMPLES} samples")
        if not np.all(np.isfinite(pts)):
            raise DomainError("loop samples must be finite")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "params", np.asarray(self.params, dtype=float))

    @classmethod
    def from_function(cls, space: PhaseSpace, fn: Callable, n: int = 64) -> Loop:
        s = np.arange(n) / n
        return cls(space, fn(s), s, fn)

    @property
    def n_samples(self) -> int:
        return self.points.shape[0]

    def max_angular_steps(self) -> np.ndarray:
        """Largest cyclic step of each angular slot."""
        ang = self.points[:, list(self.space.angular_slots)]
        steps = signed_angle(np.diff(np.vstack([ang, ang[:1]]), axis=0))
        return np.max(np.abs(np.atleast_2d(steps)), axis=0) if ang.shape[1] else np.zeros(0)

    @property
    def adequate(self) -> bool:
        return bool(np.all(self.max_angular_steps() < ADEQUACY_STEP))

    def refined(self) -> Loop:
        """Loop with twice the samples, the new ones at parameter midpoints."""
        s = self.params
        s_next = np.append(s[1:], s[0] + 1.0)
        mid = 0.5 * (s + s_next)
        params = np.empty(2 * len(s))
        params[0::2], params[1::2] = s, np.mod(mid, 1.0)
        if self.generator is not None:
            new = self.space.check(self.generator(params[1::2]))
        else:
            nxt = np.roll(self.points, -1, axis=0)
            new = self.points + 0.5 * self.space.displacement(self.points, nxt)
        pts = np.empty((2 * len(s), self.space.dim))
        pts[0::2], pts[1::2] = self.points, new
        return Loop(self.space, pts, params, self.generator)

    def with_points(self, points) -> Loop:
        return Loop(self.space, points, self.params, None)

    def to_csv(self, path) -> None:
        """Columns ``loop_s``, angular slots ``theta_i``, then the other slots ``y_j``."""
        ang, lin = list(self.space.angular_slots), list(self.space.linear_slots)
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["loop_s"] + [f"theta_{i}" for i in ang] + [f"y_{j}" for j in lin])
            for s, p in zip(self.params, self.points):
                writer.writerow([repr(float(s))] + [repr(float(p[i])) for i in ang] + [repr(float(p[j])) for j in lin])


WindingVector = tuple  # one integer per angular slot


def winding_vector(loop: Loop) -> WindingVector:
    if not loop.adequate:
        raise ResolutionError(f"loop is not adequate (max angular steps {loop.max_angular_steps()})")
    return tuple(winding_number(loop.points[:, i]) for i in loop.space.angular_slots)


def _map_points(mapping, pts, h):
    if isinstance(mapping, Isotopy):
        return mapping.apply(pts, h)
    return mapping(pts)


def transport_pair(mapping, loop: Loop, h: float = 1e-3, require_adequate: bool = True):
    """Map every sample, doubling the sampling until the image is adequate.

    Returns ``(source, image)`` with matching parameters.  ``mapping`` is an
    :class:`Isotopy` or any callable on batches of points.
    """
    if not loop.adequate:
        raise ResolutionError("input loop is not adequate")
    src = loop
    for doubling in range(MAX_DOUBLINGS + 1):
        image = Loop(loop.space, _map_points(mapping, src.points, h), src.params, None)
        if image.adequate or not require_adequate:
            return src, image
        if doubling < MAX_DOUBLINGS:
            src = src.refined()
    raise ResolutionError(f"transported loop still inadequate after {MAX_DOUBLINGS} doublings "
                          f"(max steps {image.max_angular_steps()})")


def transport_loop(iso: Isotopy, loop: Loop, h: float = 1e-3) -> Loop:
    if iso.space != loop.space:
        raise DomainError("isotopy and loop live on different spaces")
    return transport_pair(iso, loop, h)[1]


@dataclass(frozen=True)
class NoGoCertificate:
    probe_winding: WindingVector
    input_winding: WindingVector
    transported_winding: WindingVector
    required_winding: tuple  # None marks an unconstrained slot
    verdict: str
    isotopy_id: str
    samples: int
    tolerances: dict

    def to_dict(self) -> dict:
        return {
            "probe_winding": list(self.probe_winding),
            "input_winding": list(self.input_winding),
            "transported_winding": list(self.transported_winding),
            "required_winding": ["*" if w is None else w for w in self.required_winding],
            "verdict": self.verdict,
            "isotopy_id": self.isotopy_id,
            "samples": self.samples,
            "tolerances": dict(self.tolerances),
        }


def no_go_certificate(setup: CloneSetup, iso, probe: Loop, h: float = 1e-3, label: str | None = None):
    """Transport ``(g, b, r)`` through ``iso`` and compare with the class a clone needs.

    ``iso`` is normally an :class:`Isotopy`; any other callable is evaluated
    directly, which is how maps outside the identity component are checked.
    Returns ``(certificate, source_loop, transported_loop)``.
    """
    if probe.space != setup.system:
        raise DomainError("probe loop must live in the system space")
    probe_w = winding_vector(probe)
    if not any(probe_w):
        raise DomainError("probe loop must be non-contractible")
    product = setup.product
    if isinstance(iso, Isotopy) and iso.space != product:
        raise DomainError("isotopy must act on M x M x N")
    gen = None
    if probe.generator is not None:
        gen = lambda s: setup.lift(probe.generator(s))  # noqa: E731
    lifted = Loop(product, setup.lift(probe.points), probe.params, gen)
    source, image = transport_pair(iso, lifted, h)
    w_in = winding_vector(source)
    w_out = winding_vector(image)
    na = len(setup.system.angular_slots)
    required = tuple(probe_w) + tuple(probe_w) + (None,) * (len(w_out) - 2 * na)
    obstructed = tuple(w_out[na:2 * na]) != tuple(probe_w)
    cert = NoGoCertificate(
        probe_winding=tuple(probe_w),
        input_winding=w_in,
        transported_winding=w_out,
        required_winding=required,
        verdict="OBSTRUCTED" if obstructed else "CONSISTENT",
        isotopy_id=label or getattr(iso, "label", type(iso).__name__),
        samples=image.n_samples,
        tolerances={"h": h, "adequacy_step": ADEQUACY_STEP, "max_doublings": MAX_DOUBLINGS,
                    "winding_residual": 0.05},
    )
    return cert, source, image


def random_isotopy(space: PhaseSpace, rng: np.random.Generator, n_stages: int = 2, max_freq: int = 2,
                   max_power: int = 2, max_total: int = 3, scale: float = 0.5, label: str = "random") -> Isotopy:
    """Seeded random Fourier-polynomial isotopy with ``n_stages`` stages of equal length."""
    stages = [(random_fourier(space, rng, max_freq, max_power, max_total, scale), 1.0 / n_stages)
              for _ in range(n_stages)]
    return Isotopy(tuple(stages), label)


def cheat_clone_map(setup: CloneSetup) -> Callable:
    """Pointwise copy ``(x, y, z) -> (x, x, z)``: clones, but is no symplectomorphism."""
    m = setup.system.dim

    def cheat(w):
        w = np.array(w, dtype=float)
        w[..., m:2 * m] = w[..., :m]
        return w

    return cheat


def circle_loop(space: PhaseSpace, slot_windings: dict, base=None, n: int = 64) -> Loop:
    """Loop whose angular slot ``i`` turns ``slot_windings[i]`` times, other slots fixed at ``base``."""
    base = np.zeros(space.dim) if base is None else np.asarray(base, dtype=float)

    def fn(s):
        s = np.asarray(s, dtype=float)
        pts = np.tile(base, (len(s), 1))
        for i, w in slot_windings.items():
            pts[:, i] = base[i] + 2.0 * math.pi * w * s
        return pts

    return Loop.from_function(space, fn, n)


@dataclass(frozen=True)
class TorusExperiment:
    red_winding: WindingVector
    blue_winding: WindingVector
    transported: tuple
    any_match: bool
    loops: tuple = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "red_winding": list(self.red_winding),
            "blue_winding": list(self.blue_winding),
            "transported_red_windings": [{"isotopy": lab, "winding": list(w)} for lab, w in self.transported],
            "red_deformed_to_blue": self.any_match,
        }


def torus_experiment(isotopies, h: float = 1e-3, n: int = 64) -> TorusExperiment:
    """The red curve ``(2 pi s, 0)`` against the blue curve ``(2 pi s, 2 pi s)`` on the 2-torus."""
    from .phase_space import torus2

    space = PhaseSpace.of(torus2())
    red = circle_loop(space, {0: 1}, n=n)
    blue = circle_loop(space, {0: 1, 1: 1}, n=n)
    w_red, w_blue = winding_vector(red), winding_vector(blue)
    out, loops = [], [("red", red), ("blue", blue)]
    for iso in isotopies:
        image = transport_loop(iso, red, h)
        out.append((iso.label, winding_vector(image)))
        loops.append((iso.label, image))
    return TorusExperiment(w_red, w_blue, tuple(out), any(w == w_blue for _, w in out), tuple(loops))
