"""Phase spaces built from Euclidean, cylinder and torus factors.

Every supported space is parallelizable, so a single global chart is used.
Coordinates of a product are the concatenation of the factor coordinates:

* ``euclidean`` of dimension 2N: ``(q1, p1, ..., qN, pN)``
* ``cylinder`` (the pendulum phase space): ``(theta, p)``
* ``torus2``: ``(theta1, theta2)``, both angular

Each factor carries a ``form_sign``; the symplectic form restricted to the
factor is ``form_sign * sum dq ^ dp`` over its slot pairs.  Points and tangent
vectors are plain float arrays whose trailing axis is the chart coordinate, so
all functions broadcast over leading batch axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DomainError

TWO_PI = 2.0 * math.pi

KINDS = ("euclidean", "cylinder", "torus2")


@dataclass(frozen=True)
class Factor:
    kind: str
    dim: int = 2
    form_sign: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DomainError(f"unknown factor kind {self.kind!r}")
        if self.form_sign not in (1, -1):
            raise DomainError(f"form_sign must be +1 or -1, got {self.form_sign!r}")
        if self.kind == "euclidean":
            if self.dim < 2 or self.dim % 2:
                raise DomainError(f"euclidean factor needs even dimension >= 2, got {self.dim}")
        elif self.dim != 2:
            raise DomainError(f"{self.kind} factor has dimension 2, got {self.dim}")

    @property
    def angular(self) -> tuple[bool, ...]:
        if self.kind == "cylinder":
            return (True, False)
        if self.kind == "torus2":
            return (True, True)
        return (False,) * self.dim

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim, "form_sign": self.form_sign}


def euclidean(dim: int = 2, form_sign: int = 1) -> Factor:
    return Factor("euclidean", dim, form_sign)


def cylinder(form_sign: int = 1) -> Factor:
    return Factor("cylinder", 2, form_sign)


def torus2(form_sign: int = 1) -> Factor:
    return Factor("torus2", 2, form_sign)


@dataclass(frozen=True)
class PhaseSpace:
    """Ordered product of factors with a constant symplectic pairing."""

    factors: tuple[Factor, ...]

    def __post_init__(self):
        factors = tuple(self.factors)
        if not factors:
            raise DomainError("a phase space needs at least one factor")
        for f in factors:
            if not isinstance(f, Factor):
                raise DomainError(f"not a Factor: {f!r}")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def of(cls, *factors: Factor) -> PhaseSpace:
        return cls(tuple(factors))

    @classmethod
    def product(cls, *spaces: PhaseSpace) -> PhaseSpace:
        return cls(tuple(f for s in spaces for f in s.factors))

    @classmethod
    def from_dict(cls, data) -> PhaseSpace:
        """Build a space from ``[{"kind": ..., "dim": ..., "form_sign": ...}, ...]``."""
        if isinstance(data, dict):
            data = data.get("factors")
        if not isinstance(data, (list, tuple)):
            raise DomainError("space description must be a list of factors")
        factors = []
        for item in data:
            if not isinstance(item, dict) or "kind" not in item:
                raise DomainError(f"bad factor description {item!r}")
            unknown = set(item) - {"kind", "dim", "form_sign"}
            if unknown:
                raise DomainError(f"unknown factor keys {sorted(unknown)}")
            kind = item["kind"]
            dim = int(item.get("dim", 2))
            factors.append(Factor(kind, dim, int(item.get("form_sign", 1))))
        return cls(tuple(factors))

    def to_dict(self) -> list[dict]:
        return [f.to_dict() for f in self.factors]

    @property
    def dim(self) -> int:
        return sum(f.dim for f in self.factors)

    @cached_property
    def offsets(self) -> tuple[int, ...]:
        out, k = [], 0
        for f in self.factors:
            out.append(k)
            k += f.dim
        return tuple(out)

    @cached_property
    def angular_mask(self) -> np.ndarray:
        mask = np.array([a for f in self.factors for a in f.angular], dtype=bool)
        mask.setflags(write=False)
        return mask

    @cached_property
    def angular_slots(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.angular_mask))

    @cached_property
    def linear_slots(self) -> tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(~self.angular_mask))

    @property
    def has_angles(self) -> bool:
        return bool(self.angular_slots)

    @cached_property
    def omega(self) -> np.ndarray:
        """Constant matrix of the pairing, ``omega(u, v) = u @ Omega @ v``."""
        om = np.zeros((self.dim, self.dim))
        for f, off in zip(self.factors, self.offsets):
            for k in range(0, f.dim, 2):
                om[off + k, off + k + 1] = f.form_sign
                om[off + k + 1, off + k] = -f.form_sign
        om.setflags(write=False)
        return om

    @cached_property
    def omega_perm(self):
        """``(perm, sign)`` with ``Omega @ v == sign * v[perm]``."""
        om = self.omega
        perm = np.argmax(np.abs(om), axis=1)
        return perm, om[np.arange(self.dim), perm]

    def check(self, z, what="point") -> np.ndarray:
        arr = np.asarray(z, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise DomainError(f"{what} has trailing dimension {arr.shape[-1:]} but space has {self.dim}")
        return arr

    def point(self, coords) -> np.ndarray:
        """Validated copy of ``coords`` with angular slots wrapped to [0, 2pi)."""
        z = self.check(coords).copy()
        if not np.all(np.isfinite(z)):
            raise DomainError("phase point has non-finite coordinates")
        return self.wrap(z)

    def wrap(self, z) -> np.ndarray:
        z = np.array(z, dtype=float)
        if self.has_angles:
            z[..., self.angular_mask] = _wrap(z[..., self.angular_mask])
        return z

    def displacement(self, a, b) -> np.ndarray:
        """Shortest chart displacement from ``a`` to ``b`` (angles in (-pi, pi])."""
        d = self.check(b) - self.check(a)
        if self.has_angles:
            d[..., self.angular_mask] = signed_angle(d[..., self.angular_mask])
        return d

    def __str__(self):
        parts = []
        for f in self.factors:
            sign = "+" if f.form_sign > 0 else "-"
            name = f"R^{f.dim}" if f.kind == "euclidean" else ("T*S1" if f.kind == "cylinder" else "T2")
            parts.append(f"{name}({sign})")
        return " x ".join(parts)


def _wrap(theta):
    out = np.mod(theta, TWO_PI)
    # np.mod rounds tiny negatives up to exactly 2pi
    return np.where(out >= TWO_PI, 0.0, out)


def wrap_angle(theta):
    """Reduce an angle (or array of angles) to [0, 2pi)."""
    arr = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError("wrap_angle needs finite input")
    out = _wrap(arr)
    return float(out) if out.ndim == 0 else out


def signed_angle(delta):
    """Principal value of an angle difference, in (-pi, pi]."""
    d = np.asarray(delta, dtype=float)
    out = np.pi - _wrap(np.pi - d)
    return float(out) if out.ndim == 0 else out


def chart_distance(space: PhaseSpace, a, b):
    """Euclidean chart distance with angular slots measured along the shortest arc."""
    d = space.displacement(a, b)
    out = np.sqrt(np.sum(d * d, axis=-1))
    return float(out) if out.ndim == 0 else out


def symplectic_pairing(space: PhaseSpace, u, v):
    u = space.check(u, "tangent vector")
    v = space.check(v, "tangent vector")
    # one term per (q, p) pair, summed in a fixed order: exactly antisymmetric
    u2 = u.reshape(u.shape[:-1] + (-1, 2))
    v2 = v.reshape(v.shape[:-1] + (-1, 2))
    signs = space.omega[0::2, 1::2].diagonal()
    out = np.sum(signs * (u2[..., 0] * v2[..., 1] - u2[..., 1] * v2[..., 0]), axis=-1)
    return float(out) if out.ndim == 0 else out
