"""Exact linear cloning on R^{2N} and a quadratic Hamiltonian generating it.

The system space (R^{2N}, +omega0) is cloned with a machine (R^{2N}, -omega0).
A 3x3 matrix ``Mc`` acts blockwise on ``(x, y, z)``; the block map
``Mc (x) I_{2N}`` is symplectic for the product form exactly when
``Mc^T L Mc = L`` with ``L = diag(1, 1, -1)``.  Its first column ``(1, 1, g)``
sends ``(x, 0, 0)`` to ``(x, x, g x)``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np
import scipy.linalg

from .dynamics import Isotopy, flow_map
from .errors import ConstructionError, DomainError
from .hamiltonians import Quadratic
from .phase_space import PhaseSpace, chart_distance, euclidean

LORENTZ = np.diag([1.0, 1.0, -1.0])

# Frame-completion seeds, tried in order.  The first entries reproduce the
# reference frame [[1, 1, 1], [1, -1/2, 1/2], [1, 1/2, 3/2]] for g = +1.
DEFAULT_SEEDS_C2 = ((1.0, -2.0, 0.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (1.0, -1.0, 0.0), (0.0, 0.0, 1.0))
DEFAULT_SEEDS_C3 = ((0.0, 0.0, 1.0), (1.0, 0.0, 0.0), (0.0, 1.0, 0.0))


def lorentz_inner(u, v) -> float:
    return float(np.asarray(u) @ LORENTZ @ np.asarray(v))


@dataclass(frozen=True)
class LinearCloneMap:
    mc: np.ndarray

    def __post_init__(self):
        mc = np.array(self.mc, dtype=float)
        if mc.shape != (3, 3):
            raise DomainError("clone coefficient matrix must be 3x3")
        mc.setflags(write=False)
        object.__setattr__(self, "mc", mc)

    @property
    def g(self) -> float:
        return float(self.mc[2, 0])

    @property
    def lorentz_residual(self) -> float:
        return float(np.max(np.abs(self.mc.T @ LORENTZ @ self.mc - LORENTZ)))

    def block_matrix(self, n_half: int) -> np.ndarray:
        """The induced linear map on ``(R^{2N})^3``; ``n_half`` is N."""
        return np.kron(self.mc, np.eye(2 * n_half))

    def to_dict(self) -> dict:
        return {"mc": self.mc.tolist()}


def complete_lorentz_frame(g: int = 1, seeds_c2=DEFAULT_SEEDS_C2, seeds_c3=DEFAULT_SEEDS_C3,
                           null_tol: float = 1e-9) -> LinearCloneMap:
    """Complete ``c1 = (1, 1, g)`` to a basis with ``Mc^T L Mc = L``.

    Gram-Schmidt in the indefinite inner product ``<u, v> = u^T L v``: the
    second column must come out with norm +1 and the third with norm -1.
    Seeds that project onto a null or wrong-signature vector are skipped.
    """
    if g not in (1, -1):
        raise DomainError(f"g must be +1 or -1, got {g!r}")
    c1 = np.array([1.0, 1.0, float(g)])
    cols = [c1]
    for target, seeds in ((1.0, seeds_c2), (-1.0, seeds_c3)):
        for seed in seeds:
            v = np.array(seed, dtype=float)
            for c in cols:
                v = v - lorentz_inner(v, c) / lorentz_inner(c, c) * c
            norm = lorentz_inner(v, v)
            if norm * target > null_tol:
                cols.append(v / np.sqrt(abs(norm)))
                break
        else:
            raise ConstructionError(f"no seed gave a column of Lorentz norm {target:+.0f}",
                                    {"columns": [c.tolist() for c in cols]})
    return LinearCloneMap(np.column_stack(cols))


def apply_clone_map(cmap: LinearCloneMap, x, y, z):
    """Blockwise action ``w'_i = sum_j Mc_ij w_j`` on three points of R^{2N}."""
    x, y, z = (np.asarray(a, dtype=float) for a in (x, y, z))
    if not (x.shape[-1] == y.shape[-1] == z.shape[-1]) or x.shape[-1] % 2:
        raise DomainError("clone map needs three points of one even-dimensional space")
    m = cmap.mc
    return tuple(m[i, 0] * x + m[i, 1] * y + m[i, 2] * z for i in range(3))


def clone_product_space(n_half: int) -> PhaseSpace:
    return PhaseSpace.of(euclidean(2 * n_half, 1), euclidean(2 * n_half, 1), euclidean(2 * n_half, -1))


def _darboux_basis(space: PhaseSpace) -> np.ndarray:
    """Permutation ``B`` with ``B^T Omega B = J`` in ``(q_1..q_n, p_1..p_n)`` order."""
    n = space.dim // 2
    B = np.zeros((space.dim, space.dim))
    k = 0
    for f, off in zip(space.factors, space.offsets):
        for j in range(0, f.dim, 2):
            q, p = off + j, off + j + 1
            if f.form_sign < 0:
                q, p = p, q
            B[q, k] = 1.0
            B[p, n + k] = 1.0
            k += 1
    J = np.block([[np.zeros((n, n)), np.eye(n)], [-np.eye(n), np.zeros((n, n))]])
    assert np.array_equal(B.T @ space.omega @ B, J)
    return B


def _unitary_log(u: np.ndarray) -> np.ndarray:
    """Skew-Hermitian principal logarithm of a unitary matrix."""
    t, zmat = scipy.linalg.schur(u, output="complex")
    phases = np.angle(np.diag(t))
    return (zmat * (1j * phases)) @ zmat.conj().T


def symplectic_log_factors(T: np.ndarray, space: PhaseSpace, tol: float = 1e-10):
    """Hamiltonian matrices ``(xi_first, xi_second)`` with ``T = exp(xi_second) exp(xi_first)``.

    Uses the real principal logarithm when ``T`` has no eigenvalue on the
    closed negative real axis (split into two equal halves).  Otherwise ``T``
    is split by the symplectic polar decomposition ``T = P U``: ``P`` is
    symmetric positive definite and ``U`` orthogonal symplectic, which is a
    unitary matrix in disguise and has a skew-Hermitian logarithm.
    """
    n2 = space.dim
    eig = np.linalg.eigvals(T)
    neg = (eig.real <= tol) & (np.abs(eig.imag) <= tol)
    report = {"eigenvalues": [[float(e.real), float(e.imag)] for e in eig]}
    if np.allclose(T, np.eye(n2), atol=0.0, rtol=0.0):
        return np.zeros((n2, n2)), np.zeros((n2, n2)), "identity"
    if not np.any(neg):
        with warnings.catch_warnings():
            # accuracy is checked below by reconstructing T
            warnings.simplefilter("ignore", RuntimeWarning)
            xi = scipy.linalg.logm(T)
        if np.max(np.abs(np.imag(xi))) > 1e-9:
            raise ConstructionError("principal logarithm is not real", report)
        xi = np.real(xi)
        method, first, second = "principal_log", 0.5 * xi, 0.5 * xi
    else:
        B = _darboux_basis(space)
        S = B.T @ T @ B  # B is a permutation, so B^{-1} = B^T
        w, V = np.linalg.eigh(S @ S.T)
        if np.min(w) <= 0:
            raise ConstructionError("polar factor is not positive definite", report)
        log_p = (V * (0.5 * np.log(w))) @ V.T
        p_inv = (V * w ** -0.5) @ V.T
        U = p_inv @ S
        n = n2 // 2
        u = U[:n, :n] + 1j * U[:n, n:]
        K = _unitary_log(u)
        log_u = np.block([[K.real, K.imag], [-K.imag, K.real]])
        method = "polar"
        first, second = B @ log_u @ B.T, B @ log_p @ B.T
    om = space.omega
    for xi in (first, second):
        if np.max(np.abs(om @ xi - (om @ xi).T)) > 1e-9:
            raise ConstructionError("factor is not a Hamiltonian matrix", report)
    recon = scipy.linalg.expm(second) @ scipy.linalg.expm(first)
    err = float(np.max(np.abs(recon - T)))
    if err > tol * max(1.0, float(np.max(np.abs(T)))):
        report["reconstruction_error"] = err
        raise ConstructionError("exponential factorisation does not reproduce the map", report)
    return first, second, method


def generator_hamiltonian(cmap: LinearCloneMap, n_half: int = 1, durations=(0.5, 0.5)) -> Quadratic:
    """Two-piece quadratic Hamiltonian whose time-1 flow is the block clone map.

    Piece ``k`` is ``Q_k = -Omega xi_k / d_k`` on ``[t_k, t_k + d_k)``, so its
    exact flow over the piece is ``exp(xi_k)``.
    """
    if cmap.lorentz_residual > 1e-9:
        raise DomainError("clone map violates the Lorentz constraint")
    space = clone_product_space(n_half)
    T = cmap.block_matrix(n_half)
    first, second, _ = symplectic_log_factors(T, space)
    d1, d2 = durations
    om = space.omega
    q1 = -om @ first / d1
    q2 = -om @ second / d2
    q1, q2 = 0.5 * (q1 + q1.T), 0.5 * (q2 + q2.T)
    return Quadratic(space, (0.0, d1), np.stack([q1, q2]))


Witness = Union[LinearCloneMap, Isotopy, Callable]


@dataclass(frozen=True)
class CloneSetup:
    """System space M, machine N, blank point b, machine point r and a witness map.

    The witness is a :class:`LinearCloneMap` (Euclidean systems), an
    :class:`Isotopy` on ``M x M x N``, or any callable taking product-space
    points to product-space points (used for maps that are not flows).
    """

    system: PhaseSpace
    machine: PhaseSpace
    blank: np.ndarray
    machine_point: np.ndarray
    witness: Witness | None = None
    h: float = 1e-3

    def __post_init__(self):
        object.__setattr__(self, "blank", self.system.point(self.blank))
        object.__setattr__(self, "machine_point", self.machine.point(self.machine_point))

    @property
    def product(self) -> PhaseSpace:
        return PhaseSpace.product(self.system, self.system, self.machine)

    def lift(self, x) -> np.ndarray:
        """``x -> (x, b, r)`` on the product space."""
        x = self.system.check(x)
        lead = x.shape[:-1]
        b = np.broadcast_to(self.blank, lead + self.blank.shape)
        r = np.broadcast_to(self.machine_point, lead + self.machine_point.shape)
        return np.concatenate([x, b, r], axis=-1)

    def split(self, w):
        m = self.system.dim
        return w[..., :m], w[..., m:2 * m], w[..., 2 * m:]

    def evaluate(self, x, witness: Witness | None = None):
        """Outputs ``(out1, out2, machine)`` of the witness applied to ``(x, b, r)``."""
        witness = self.witness if witness is None else witness
        x = self.system.point(x)
        if witness is None:
            raise DomainError("clone setup has no witness map")
        if isinstance(witness, LinearCloneMap):
            return apply_clone_map(witness, x, np.broadcast_to(self.blank, x.shape),
                                   np.broadcast_to(self.machine_point, x.shape[:-1] + self.machine_point.shape))
        if isinstance(witness, Isotopy):
            return self.split(witness.apply(self.lift(x), self.h))
        return self.split(self.product.wrap(witness(self.lift(x))))


def r2n_setup(n_half: int = 1, g: int = 1, witness: Witness | None = None, h: float = 1e-3, **frame_kw) -> CloneSetup:
    """The Euclidean cloning setup with ``b = r = 0`` and a reversed-sign machine."""
    if witness is None:
        witness = complete_lorentz_frame(g, **frame_kw)
    m = PhaseSpace.of(euclidean(2 * n_half, 1))
    n = PhaseSpace.of(euclidean(2 * n_half, -1))
    return CloneSetup(m, n, np.zeros(2 * n_half), np.zeros(2 * n_half), witness, h)


@dataclass(frozen=True)
class CloneDefect:
    value: float
    argmax: int
    worst_point: np.ndarray

    def to_dict(self) -> dict:
        return {"value": self.value, "argmax": self.argmax, "worst_point": self.worst_point.tolist()}


def clone_defect(setup: CloneSetup, sample) -> CloneDefect:
    """``max_x d(out1, x) + d(out2, x)`` over the sample, with the offending point."""
    x = setup.system.point(np.atleast_2d(sample))
    out1, out2, _ = setup.evaluate(x)
    d = chart_distance(setup.system, out1, x) + chart_distance(setup.system, out2, x)
    d = np.atleast_1d(d)
    k = int(np.argmax(d))
    return CloneDefect(float(d[k]), k, x[k])


def generator_isotopy(cmap: LinearCloneMap, n_half: int = 1) -> Isotopy:
    """The generator flow over [0, 1] packaged as a single-stage isotopy."""
    return Isotopy(((generator_hamiltonian(cmap, n_half), 1.0),), label="clone-generator")


def generator_flow(cmap: LinearCloneMap, points, n_half: int = 1, h: float = 1e-3) -> np.ndarray:
    return flow_map(generator_hamiltonian(cmap, n_half), points, 0.0, 1.0, h)
