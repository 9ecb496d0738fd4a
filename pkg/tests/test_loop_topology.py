import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from clonelab.cloning_linear import CloneSetup
from clonelab.dynamics import Isotopy
from clonelab.errors import ConsistencyError, DomainError, ResolutionError
from clonelab.hamiltonians import FourierPoly
from clonelab.loop_topology import (Loop, cheat_clone_map, circle_loop, no_go_certificate, random_isotopy,
                                    torus_experiment, transport_loop, transport_pair, winding_number,
                                    winding_vector)
from clonelab.phase_space import PhaseSpace, cylinder, torus2

S64 = np.arange(64) / 64


def brute_force_winding(theta_unwrapped):
    # oracle: the closed loop's lift changes by 2pi * winding over one period
    return round((theta_unwrapped[-1] - theta_unwrapped[0]) / (2 * math.pi))


def test_winding_examples():
    assert winding_number(2 * math.pi * S64) == 1
    assert winding_number(np.full(64, 1.3)) == 0
    theta = -4 * math.pi * S64 + 0.3 * np.sin(2 * math.pi * S64)
    fine = np.linspace(0.0, 1.0, 100001)
    assert brute_force_winding(-4 * math.pi * fine + 0.3 * np.sin(2 * math.pi * fine)) == -2
    assert winding_number(theta) == -2


def test_winding_is_wrap_invariant():
    theta = 2 * math.pi * S64
    assert winding_number(np.mod(theta, 2 * math.pi)) == winding_number(theta + 100 * math.pi)


def test_coarse_sampling_raises_resolution_error():
    with pytest.raises(ResolutionError):
        winding_number(2 * math.pi * np.arange(2) / 2)


def test_empty_angle_sequence_rejected():
    with pytest.raises(DomainError):
        winding_number([])


@given(st.integers(-3, 3), st.integers(16, 200), st.floats(0.0, 2 * math.pi))
def test_winding_sampling_independent(w, n, phase):
    s = np.arange(n) / n
    theta = phase + 2 * math.pi * w * s + 0.2 * np.sin(2 * math.pi * s)
    if np.max(np.abs(np.diff(np.append(theta, theta[0] + 2 * math.pi * w)))) < math.pi / 2:
        assert winding_number(theta) == w
        assert winding_number(np.repeat(theta, 2)) == w


def test_winding_vector_examples():
    space = PhaseSpace.of(cylinder(), cylinder(), cylinder())
    g = 2 * math.pi * S64
    zeros = np.zeros(64)
    loop = Loop(space, np.column_stack([g, zeros, zeros, zeros, zeros, zeros]), S64)
    assert winding_vector(loop) == (1, 0, 0)
    clone = Loop(space, np.column_stack([g, zeros, g, zeros, zeros, zeros]), S64)
    assert winding_vector(clone) == (1, 1, 0)
    const = Loop(space, np.ones((64, 6)), S64)
    assert winding_vector(const) == (0, 0, 0)


def test_loop_needs_samples(cyl):
    with pytest.raises(DomainError):
        Loop(cyl, np.zeros((4, 2)), np.arange(4) / 4)


def test_refinement_keeps_winding(cyl):
    loop = circle_loop(cyl, {0: 2}, n=16)
    fine = loop.refined()
    assert fine.n_samples == 32
    assert winding_vector(fine) == winding_vector(loop) == (2,)
    interp = loop.with_points(loop.points).refined()
    assert winding_vector(interp) == (2,)


def test_identity_transport_is_same_loop(cyl):
    loop = circle_loop(cyl, {0: 1})
    out = transport_loop(Isotopy.identity(cyl), loop)
    assert np.array_equal(out.points, loop.points)


def test_rigid_rotation_keeps_winding(cyl):
    # H = p moves theta at unit speed
    H = FourierPoly(cyl, [[0]], [[1]], [False], [1.0])
    loop = circle_loop(cyl, {0: 1}, base=[0.0, 0.5])
    out = transport_loop(Isotopy(((H, 1.0),)), loop)
    assert np.allclose(cyl.displacement(loop.points, out.points)[:, 0], 1.0, atol=1e-12)
    assert winding_vector(out) == (1,)


@pytest.mark.parametrize("seed", range(4))
def test_random_isotopy_keeps_winding(seed):
    space = PhaseSpace.of(cylinder(), torus2())
    loop = circle_loop(space, {0: 1, 2: -1, 3: 2}, base=[0.0, 0.3, 0.0, 0.0])
    iso = random_isotopy(space, np.random.default_rng(seed))
    assert winding_vector(transport_loop(iso, loop)) == winding_vector(loop) == (1, -1, 2)


def test_refinement_cap_raises(torus):
    # H = c cos(theta_2) shears theta_1 by -c sin(theta_2): far too much for 16 x 8 samples
    H = FourierPoly(torus, [[0, 1]], np.zeros((1, 0)), [False], [200.0])
    loop = circle_loop(torus, {1: 1}, n=8)
    with pytest.raises(ResolutionError):
        transport_pair(Isotopy(((H, 1.0),)), loop, h=1e-3)


def test_moderate_shear_is_resolved_by_refinement(torus):
    H = FourierPoly(torus, [[0, 1]], np.zeros((1, 0)), [False], [3.0])
    loop = circle_loop(torus, {1: 1}, n=8)
    src, img = transport_pair(Isotopy(((H, 1.0),)), loop, h=1e-3)
    assert img.n_samples > 8 and img.adequate
    assert winding_vector(img) == (0, 1)


def _setup():
    c = PhaseSpace.of(cylinder())
    return CloneSetup(c, c, [0.0, 0.0], [0.0, 0.0])


def test_certificate_identity():
    setup = _setup()
    probe = circle_loop(setup.system, {0: 1})
    cert, src, img = no_go_certificate(setup, Isotopy.identity(setup.product), probe)
    assert cert.transported_winding == (1, 0, 0)
    assert cert.required_winding == (1, 1, None)
    assert cert.verdict == "OBSTRUCTED"
    d = cert.to_dict()
    assert d["required_winding"] == [1, 1, "*"]


@pytest.mark.parametrize("seed", range(3))
def test_certificate_random_isotopies(seed):
    setup = _setup()
    probe = circle_loop(setup.system, {0: 1})
    iso = random_isotopy(setup.product, np.random.default_rng(seed))
    cert, _, _ = no_go_certificate(setup, iso, probe)
    assert cert.transported_winding[:2] == (1, 0)
    assert cert.verdict == "OBSTRUCTED"


def test_certificate_soundness_for_cheat():
    setup = _setup()
    probe = circle_loop(setup.system, {0: 1})
    cert, _, img = no_go_certificate(setup, cheat_clone_map(setup), probe)
    assert cert.transported_winding[:2] == (1, 1)
    assert cert.verdict == "CONSISTENT"


def test_certificate_preconditions():
    setup = _setup()
    with pytest.raises(DomainError):
        no_go_certificate(setup, Isotopy.identity(setup.product), Loop(setup.system, np.zeros((8, 2)),
                                                                      np.arange(8) / 8))
    with pytest.raises(DomainError):
        no_go_certificate(setup, Isotopy.identity(setup.system), circle_loop(setup.system, {0: 1}))


def test_torus_experiment():
    space = PhaseSpace.of(torus2())
    isos = [random_isotopy(space, np.random.default_rng(k), label=f"t{k}") for k in range(2)]
    exp = torus_experiment(isos)
    assert exp.red_winding == (1, 0) and exp.blue_winding == (1, 1)
    assert [w for _, w in exp.transported] == [(1, 0), (1, 0)]
    assert exp.any_match is False


def test_loop_csv(tmp_path):
    space = PhaseSpace.of(cylinder(), torus2())
    loop = circle_loop(space, {0: 1}, n=8)
    path = tmp_path / "loop.csv"
    loop.to_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "loop_s,theta_0,theta_2,theta_3,y_1"
    assert len(lines) == 9
