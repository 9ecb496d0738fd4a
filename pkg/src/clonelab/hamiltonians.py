"""Closed-form time-dependent Hamiltonians.

Every Hamiltonian exposes ``value(z, t)`` and ``gradient(z, t)`` on batches of
chart points (trailing axis = coordinates).  Gradients are analytic; the flow
code never differentiates numerically to obtain a vector field.
"""

from __future__ import annotations

import itertools
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .phase_space import PhaseSpace


class Hamiltonian(ABC):
    space: PhaseSpace
    kind: str = "abstract"

    @abstractmethod
    def value(self, z, t: float = 0.0) -> np.ndarray: ...

    @abstractmethod
    def gradient(self, z, t: float = 0.0) -> np.ndarray: ...

    @abstractmethod
    def to_dict(self) -> dict: ...

    @property
    def is_autonomous(self) -> bool:
        return False


@dataclass(frozen=True, eq=False)
class Quadratic(Hamiltonian):
    """``H = 1/2 z^T Q(t) z`` with ``Q(t)`` from a table of symmetric matrices.

    ``times[k]`` is where matrix ``k`` takes over.  With ``mode="piecewise"``
    the table is piecewise constant (right-continuous); with ``mode="linear"``
    it is linearly interpolated and clamped outside the table.
    """

    space: PhaseSpace
    times: tuple[float, ...]
    matrices: np.ndarray
    mode: str = "piecewise"
    kind = "quadratic"

    def __post_init__(self):
        if self.space.has_angles:
            raise DomainError("quadratic Hamiltonians need a space without angular slots")
        mats = np.array(self.matrices, dtype=float)
        if mats.ndim == 2:
            mats = mats[None]
        times = tuple(float(t) for t in self.times)
        n = self.space.dim
        if mats.shape[1:] != (n, n) or len(times) != mats.shape[0]:
            raise DomainError(f"need {len(times)} matrices of shape {(n, n)}, got {mats.shape}")
        if not np.all(np.isfinite(mats)):
            raise DomainError("quadratic coefficients must be finite")
        if np.max(np.abs(mats - mats.transpose(0, 2, 1)), initial=0.0) > 1e-12 * max(1.0, np.abs(mats).max()):
            raise DomainError("quadratic coefficient matrices must be symmetric")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise DomainError("table times must be strictly increasing")
        if self.mode not in ("piecewise", "linear"):
            raise DomainError(f"unknown interpolation mode {self.mode!r}")
        mats = 0.5 * (mats + mats.transpose(0, 2, 1))
        mats.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "times", times)

    @classmethod
    def constant(cls, space: PhaseSpace, q) -> Quadratic:
        return cls(space, (0.0,), np.asarray(q, dtype=float)[None])

    @property
    def is_autonomous(self) -> bool:
        return len(self.times) == 1

    def piece_index(self, t: float) -> int:
        return max(0, int(np.searchsorted(self.times, t, side="right")) - 1)

    def matrix(self, t: float) -> np.ndarray:
        k = self.piece_index(t)
        if self.mode == "piecewise" or k == len(self.times) - 1 or t <= self.times[0]:
            return self.matrices[k]
        t0, t1 = self.times[k], self.times[k + 1]
        w = (t - t0) / (t1 - t0)
        return (1 - w) * self.matrices[k] + w * self.matrices[k + 1]

    def value(self, z, t=0.0):
        z = self.space.check(z)
        return 0.5 * np.einsum("...i,ij,...j->...", z, self.matrix(t), z)

    def gradient(self, z, t=0.0):
        return self.space.check(z) @ self.matrix(t)

    def to_dict(self):
        return {
            "kind": self.kind,
            "space": self.space.to_dict(),
            "times": list(self.times),
            "matrices": self.matrices.tolist(),
            "mode": self.mode,
        }


@dataclass(frozen=True, eq=False)
class Pendulum(Hamiltonian):
    """Simple pendulum ``H = p^2/2 - cos(theta)`` on a single cylinder."""

    space: PhaseSpace
    kind = "pendulum"

    def __post_init__(self):
        if len(self.space.factors) != 1 or self.space.factors[0].kind != "cylinder":
            raise DomainError("the pendulum lives on a single cylinder")

    @property
    def is_autonomous(self):
        return True

    def value(self, z, t=0.0):
        z = self.space.check(z)
        return 0.5 * z[..., 1] ** 2 - np.cos(z[..., 0])

    def gradient(self, z, t=0.0):
        z = self.space.check(z)
        return np.stack([np.sin(z[..., 0]), z[..., 1]], axis=-1)

    def to_dict(self):
        return {"kind": self.kind, "space": self.space.to_dict()}


@dataclass(frozen=True, eq=False)
class FourierPoly(Hamiltonian):
    """Sum of terms ``c_j * m_j(t) * trig_j(k_j . theta) * prod_i y_i^{n_ji}``.

    ``theta`` are the angular slots and ``y`` the remaining slots of the space.
    ``trig_j`` is cos or sin, ``m_j(t) = cos(nu_j t + phi_j)`` is an optional
    time modulation.  ``coeffs`` may carry leading batch axes that broadcast
    against the leading axes of ``z`` (one Hamiltonian per batch row).
    """

    space: PhaseSpace
    freqs: np.ndarray
    powers: np.ndarray
    sin_terms: np.ndarray
    coeffs: np.ndarray
    time_freqs: np.ndarray | None = None
    time_phases: np.ndarray | None = None
    max_freq: int | None = None
    max_power: int | None = None
    kind = "fourier_poly"

    def __post_init__(self):
        na, npow = len(self.space.angular_slots), len(self.space.linear_slots)
        sin_terms = np.array(self.sin_terms, dtype=bool).reshape(-1)
        nterm = sin_terms.shape[0]
        freqs = np.array(self.freqs, dtype=int).reshape(nterm, na)
        powers = np.array(self.powers, dtype=int).reshape(nterm, npow)
        coeffs = np.array(self.coeffs, dtype=float)
        if coeffs.shape[-1:] != (nterm,) and not (nterm == 0 and coeffs.size == 0):
            raise DomainError(f"need {nterm} coefficients, got shape {coeffs.shape}")
        if coeffs.size == 0:
            coeffs = np.zeros(0)
        if not np.all(np.isfinite(coeffs)):
            raise DomainError("Fourier-polynomial coefficients must be finite")
        if np.any(powers < 0):
            raise DomainError("polynomial powers must be non-negative")
        if self.max_freq is not None and np.any(np.abs(freqs) > self.max_freq):
            raise DomainError(f"frequency exceeds declared maximum {self.max_freq}")
        if self.max_power is not None and np.any(powers.sum(axis=1) > self.max_power):
            raise DomainError(f"polynomial degree exceeds declared maximum {self.max_power}")
        tf = np.zeros(nterm) if self.time_freqs is None else np.array(self.time_freqs, dtype=float).reshape(nterm)
        tp = np.zeros(nterm) if self.time_phases is None else np.array(self.time_phases, dtype=float).reshape(nterm)
        for name, arr in (("freqs", freqs), ("powers", powers), ("sin_terms", sin_terms),
                          ("coeffs", coeffs), ("time_freqs", tf), ("time_phases", tp)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def zero(cls, space: PhaseSpace) -> FourierPoly:
        na, npow = len(space.angular_slots), len(space.linear_slots)
        return cls(space, np.zeros((0, na)), np.zeros((0, npow)), np.zeros(0, bool), np.zeros(0))

    @property
    def n_terms(self) -> int:
        return self.freqs.shape[0]

    @property
    def is_autonomous(self):
        return not np.any(self.time_freqs)

    def with_coeffs(self, coeffs) -> FourierPoly:
        out = FourierPoly(self.space, self.freqs, self.powers, self.sin_terms, coeffs,
                          self.time_freqs, self.time_phases, self.max_freq, self.max_power)
        if "_cache" in self.__dict__:
            object.__setattr__(out, "_cache", self._cache)
        return out

    def _tables(self):
        # index arrays shared by value and gradient, built once per instance
        cache = self.__dict__.get("_cache")
        if cache is None:
            ufreq, inverse = np.unique(self.freqs, axis=0, return_inverse=True)
            top = int(self.powers.max(initial=0))
            cache = {
                "ang": list(self.space.angular_slots),
                "lin": list(self.space.linear_slots),
                "ufreq": ufreq.astype(float),
                "freqs": self.freqs.astype(float),
                "inverse": np.asarray(inverse).reshape(-1),
                "n": np.arange(top + 1, dtype=float),
                "rows": np.arange(self.powers.shape[1])[:, None],
                "powers_t": self.powers.T,
            }
            object.__setattr__(self, "_cache", cache)
        return cache

    def _parts(self, z, t):
        """Per-term ``weight``, ``cos(arg)``, ``sin(arg)`` and the linear coordinates."""
        c = self._tables()
        theta = z[..., c["ang"]]
        y = z[..., c["lin"]]
        uarg = _matmul(theta, c["ufreq"].T)
        ucos, usin = np.cos(uarg), np.sin(uarg)
        cos_u, sin_u = ucos[..., c["inverse"]], usin[..., c["inverse"]]
        # sine terms are cosines shifted by pi/2: cos(a - pi/2) = sin a, sin(a - pi/2) = -cos a
        cos_t = np.where(self.sin_terms, sin_u, cos_u)
        sin_t = np.where(self.sin_terms, -cos_u, sin_u)
        weight = self.coeffs * np.cos(self.time_freqs * t + self.time_phases)
        return y, cos_t, sin_t, weight

    def _power_tables(self, y):
        # per linear slot: y_i^n_i for every term and n_i y_i^(n_i - 1)
        c = self._tables()
        n = c["n"]
        pows, dpows = [], []
        top = len(n) - 1
        for i in range(y.shape[-1]):
            table = np.empty(y.shape[:-1] + (top + 1,))
            table[..., 0] = 1.0
            for k in range(1, top + 1):
                table[..., k] = table[..., k - 1] * y[..., i]
            dtable = np.empty_like(table)
            dtable[..., 0] = 0.0
            dtable[..., 1:] = n[1:] * table[..., :-1]
            idx = c["powers_t"][i]
            pows.append(np.take(table, idx, axis=-1))
            dpows.append(np.take(dtable, idx, axis=-1))
        return pows, dpows

    def value(self, z, t=0.0):
        z = self.space.check(z)
        if self.n_terms == 0:
            return np.zeros(z.shape[:-1])
        y, cos_t, _, weight = self._parts(z, t)
        mono = _product(self._power_tables(y)[0])
        return np.sum(weight * cos_t * mono, axis=-1)

    def gradient(self, z, t=0.0):
        z = self.space.check(z)
        if self.n_terms == 0:
            return np.zeros(np.broadcast_shapes(z.shape, self.coeffs.shape[:-1] + (self.space.dim,)))
        c = self._tables()
        y, cos_t, sin_t, weight = self._parts(z, t)
        pows, dpows = self._power_tables(y)
        mono = _product(pows)
        grad_theta = _matmul(weight * -sin_t * mono, c["freqs"])
        shape = np.broadcast_shapes(grad_theta.shape[:-1], z.shape[:-1])
        grad = np.zeros(shape + (self.space.dim,))
        grad[..., c["ang"]] = grad_theta
        wt = weight * cos_t
        for i, slot in enumerate(c["lin"]):
            # product over the other slots, no division by possibly-zero powers
            d_i = _product([dpows[i]] + pows[:i] + pows[i + 1:])
            grad[..., slot] = np.sum(wt * d_i, axis=-1)
        return grad

    def to_dict(self):
        return {
            "kind": self.kind,
            "space": self.space.to_dict(),
            "freqs": self.freqs.tolist(),
            "powers": self.powers.tolist(),
            "sin_terms": self.sin_terms.tolist(),
            "coeffs": self.coeffs.tolist(),
            "time_freqs": self.time_freqs.tolist(),
            "time_phases": self.time_phases.tolist(),
        }


def _matmul(a, b):
    # stacked small matmuls are much slower than one 2-d product
    a = np.asarray(a)
    if a.shape[-1] == 0:
        return np.zeros(a.shape[:-1] + (b.shape[-1],))
    return (np.ascontiguousarray(a).reshape(-1, a.shape[-1]) @ b).reshape(a.shape[:-1] + (b.shape[-1],))


def _product(factors):
    out = factors[0] if factors else 1.0
    for f in factors[1:]:
        out = out * f
    return out


def fourier_basis(space: PhaseSpace, max_freq: int, max_power: int, max_total: int,
                  include_constant: bool = False):
    """Enumerate terms with ``|k_a| <= max_freq``, total power ``<= max_power``
    and ``sum |k_a| + sum n_i <= max_total``.

    Returns ``(freqs, powers, sin_terms)``.  Frequency vectors are taken up to
    sign (first nonzero entry positive); the pure constant term is dropped
    unless asked for.
    """
    na, npow = len(space.angular_slots), len(space.linear_slots)
    freqs, powers, sins = [], [], []
    for k in itertools.product(range(-max_freq, max_freq + 1), repeat=na):
        nz = [x for x in k if x]
        if nz and nz[0] < 0:
            continue
        kdeg = sum(abs(x) for x in k)
        if kdeg > max_total:
            continue
        for n in itertools.product(range(max_power + 1), repeat=npow):
            if sum(n) > max_power or kdeg + sum(n) > max_total:
                continue
            if not nz and not sum(n) and not include_constant:
                continue
            for is_sin in ((False, True) if nz else (False,)):
                freqs.append(k)
                powers.append(n)
                sins.append(is_sin)
    n = len(sins)
    return (np.array(freqs, dtype=int).reshape(n, na), np.array(powers, dtype=int).reshape(n, npow),
            np.array(sins, dtype=bool))


def random_fourier(space: PhaseSpace, rng: np.random.Generator, max_freq=2, max_power=2,
                   max_total=3, scale=0.5, time_dependent=True) -> FourierPoly:
    """Random member of a Fourier-polynomial family, coefficients ``N(0, scale^2)``."""
    freqs, powers, sins = fourier_basis(space, max_freq, max_power, max_total)
    n = len(sins)
    coeffs = rng.normal(0.0, scale, n) / np.sqrt(max(n, 1) / 8.0)
    tf = rng.uniform(0.0, 2.0 * math.pi, n) if time_dependent else None
    tp = rng.uniform(0.0, 2.0 * math.pi, n) if time_dependent else None
    return FourierPoly(space, freqs, powers, sins, coeffs, tf, tp, max_freq, max_power)


def hamiltonian_from_dict(data: dict) -> Hamiltonian:
    """Inverse of ``to_dict`` for every Hamiltonian kind."""
    kind = data.get("kind")
    space = PhaseSpace.from_dict(data["space"])
    if kind == "quadratic":
        return Quadratic(space, tuple(data["times"]), np.array(data["matrices"]), data.get("mode", "piecewise"))
    if kind == "pendulum":
        return Pendulum(space)
    if kind == "fourier_poly":
        return FourierPoly(space, np.array(data["freqs"]), np.array(data["powers"]),
                           np.array(data["sin_terms"]), np.array(data["coeffs"]),
                           np.array(data.get("time_freqs")) if data.get("time_freqs") is not None else None,
                           np.array(data.get("time_phases")) if data.get("time_phases") is not None else None)
    if kind == "bump_path":
        from .point_cloning import BumpPath

        return BumpPath.from_dict(data)
    raise DomainError(f"unknown Hamiltonian kind {kind!r}")
