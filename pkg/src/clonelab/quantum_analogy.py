"""Copying a fixed one-dimensional subspace of a Hilbert space.

Vectors of the line ``V = span{b}`` are ``psi = c b``.  With a machine space
``C^1`` (basis ``|1>``) the linear map ``psi (x) b (x) |1> -> psi (x) psi (x) r'``
is well defined on ``V`` once ``r' = (1/c) |1>``: both sides are the same
tensor, since ``(c b) (x) b (x) |1> = (c b) (x) (c b) (x) (1/c) |1>``.  A
general blank ``b'`` is first rotated into ``V`` by a unitary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError

COLINEAR_TOL = 1e-12
MACHINE_ONE = np.array([1.0 + 0.0j])


def _ket(v, name: str) -> np.ndarray:
    arr = np.asarray(v, dtype=complex)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError(f"{name} must be a non-empty 1-d amplitude vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name} has non-finite amplitudes")
    return arr


def kron3(a, b, c) -> np.ndarray:
    return np.kron(np.kron(a, b), c)


@dataclass(frozen=True)
class SubspaceClone:
    c: complex
    left: np.ndarray  # psi (x) b (x) |1>
    right: np.ndarray  # psi (x) psi (x) r'
    machine_out: np.ndarray  # r'
    residual: float  # max |left - right|
    colinearity: float  # relative distance of psi from span{b}

    def to_dict(self) -> dict:
        return {"c": [self.c.real, self.c.imag], "machine_out": [[z.real, z.imag] for z in self.machine_out],
                "residual": self.residual, "colinearity": self.colinearity}


def clone_1d_subspace(b, psi, tol: float = COLINEAR_TOL) -> SubspaceClone:
    """Clone ``psi`` in ``span{b}``; ``psi`` off the line is rejected.

    Colinearity is judged relative to ``|psi|`` so the check does not depend
    on the overall scale of the inputs.
    """
    b = _ket(b, "b")
    psi = _ket(psi, "psi")
    if b.shape != psi.shape:
        raise DomainError("b and psi must have the same dimension")
    bb = float(np.vdot(b, b).real)
    if bb == 0.0:
        raise DomainError("b must be non-zero")
    c = complex(np.vdot(b, psi) / bb)
    off = psi - c * b
    norm_psi = float(np.linalg.norm(psi))
    colinearity = float(np.linalg.norm(off)) / norm_psi if norm_psi > 0 else 0.0
    if colinearity >= tol:
        raise DomainError(f"psi is not in span{{b}} (relative residual {colinearity:.3e})")
    left = kron3(psi, b, MACHINE_ONE)
    if c == 0:
        # the zero vector is copied by the identity: both sides vanish
        r_out = np.zeros(1, dtype=complex)
        right = np.zeros_like(left)
    else:
        r_out = MACHINE_ONE / c
        right = kron3(psi, psi, r_out)
    residual = float(np.max(np.abs(left - right), initial=0.0))
    return SubspaceClone(c, left, right, r_out, residual, colinearity)


def rotate_b_into_subspace(b, v) -> np.ndarray:
    """Unitary ``U`` with ``U b`` on the line through ``v``.

    A complex Householder reflection exchanging the unit vectors ``b^`` and
    ``e^{i alpha} v^`` with ``alpha = arg <v^, b^>``; the phase makes the two
    have a real inner product, so the reflection maps one onto the other.
    Returns the identity when ``b`` already lies on the line.
    """
    b = _ket(b, "b")
    v = _ket(v, "v")
    if b.shape != v.shape:
        raise DomainError("b and v must have the same dimension")
    nb, nv = np.linalg.norm(b), np.linalg.norm(v)
    if nb == 0 or nv == 0:
        raise DomainError("b and v must be non-zero")
    bh, vh = b / nb, v / nv
    overlap = np.vdot(vh, bh)
    phase = overlap / abs(overlap) if abs(overlap) > 0 else 1.0
    y = phase * vh
    w = bh - y
    nw = np.linalg.norm(w)
    d = b.size
    if nw < 1e-14:
        return np.eye(d, dtype=complex)
    w /= nw
    return np.eye(d, dtype=complex) - 2.0 * np.outer(w, w.conj())


def unitarity_residual(u) -> float:
    u = np.asarray(u, dtype=complex)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def clone_with_blank(v, psi, blank) -> tuple:
    """Clone ``psi`` in ``span{v}`` onto an arbitrary non-zero ``blank``.

    The blank is rotated into ``span{v}`` first; returns ``(U, SubspaceClone)``
    where the clone uses the rotated blank ``U blank`` as ``b``.
    """
    u = rotate_b_into_subspace(blank, v)
    return u, clone_1d_subspace(u @ _ket(blank, "blank"), psi)


def regrouping_suite(n: int, rng: np.random.Generator, max_dim: int = 8) -> dict:
    """Random ``(c, b)`` pairs: worst tensor identity error and worst unitarity residual."""
    worst_identity = worst_unitary = 0.0
    for _ in range(n):
        d = int(rng.integers(1, max_dim + 1))
        b = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        c = complex(rng.standard_normal(), rng.standard_normal())
        res = clone_1d_subspace(b, c * b)
        worst_identity = max(worst_identity, res.residual)
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        worst_unitary = max(worst_unitary, unitarity_residual(rotate_b_into_subspace(b, v)))
    return {"samples": n, "max_identity_residual": worst_identity, "max_unitarity_residual": worst_unitary}
