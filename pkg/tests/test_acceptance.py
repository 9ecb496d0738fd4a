"""Acceptance criteria, one test each, at the stated tolerances and time limits.

Every test prints a single ``[PASS]`` or ``[FAIL]`` line with the measured
values; the shipped default config supplies sizes and seeds.
"""

import math
import time

import numpy as np
import pytest

from clonelab import cloning_linear, loop_topology
from clonelab.config import load_config
from clonelab.phase_space import PhaseSpace, torus2
from clonelab.suites import _rng, _setup, approx, clone_r2n, dynamics, points, quantum


@pytest.fixture(scope="module")
def cfg():
    return load_config()


@pytest.fixture
def verdict(capsys):
    def emit(number, title, passed, detail, runtime=None, limit=None):
        timing = ""
        if runtime is not None:
            timing = f" runtime {runtime:.2f}s (limit {limit:g}s)"
            passed = passed and runtime < limit
        with capsys.disabled():
            print(f"\n[{'PASS' if passed else 'FAIL'}] criterion {number}: {title}: {detail}{timing}")
        assert passed, detail

    return emit


def test_criterion_1_exact_cloning(cfg, verdict):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    cmap = cloning_linear.complete_lorentz_frame(1)
    defects = {}
    for nh in (1, 2):
        setup = cloning_linear.r2n_setup(nh)
        defects[2 * nh] = cloning_linear.clone_defect(setup, rng.uniform(-10, 10, (1000, 2 * nh))).value
    runtime = time.perf_counter() - t0
    ok = max(defects.values()) <= 1e-12 and cmap.lorentz_residual < 1e-12
    verdict(1, "exact cloning on R^2N", ok,
            f"defects {defects}, Lorentz residual {cmap.lorentz_residual:.2e}", runtime, 1.0)


def test_criterion_2_identity_component(cfg, verdict):
    sec = dict(cfg["clone_r2n"], dims=[], generator=dict(cfg["clone_r2n"]["generator"], trajectory_points=0))
    res = clone_r2n(sec, cfg["seed"])
    gen = res.report["generator"]
    err = max(g["flow_error"] for g in gen)
    sym = max(g["symplecticity"] for g in gen)
    verdict(2, "generator flow matches the linear map", err < 1e-6 and sym < 1e-5,
            f"flow error {err:.2e} (< 1e-6), symplecticity {sym:.2e} (< 1e-5) on "
            f"{sec['generator']['samples']} inputs per dimension {sec['generator']['dims']}",
            res.runtime, 30.0)


@pytest.fixture(scope="module")
def certificates(cfg):
    sec = cfg["no_go"]
    setup = _setup(sec)
    probe = loop_topology.circle_loop(setup.system, {0: 1}, base=setup.blank, n=sec["loop_samples"])
    t0 = time.perf_counter()
    certs = []
    for k in range(20):
        iso = loop_topology.random_isotopy(setup.product, _rng(cfg["seed"], 100 + k), sec["stages"],
                                           sec["max_freq"], sec["max_power"], sec["max_total"], sec["scale"])
        certs.append(loop_topology.no_go_certificate(setup, iso, probe, sec["h"])[0])
    return setup, certs, time.perf_counter() - t0


def test_criterion_3_winding_invariance(certificates, verdict):
    setup, certs, runtime = certificates
    assert setup.product.dim == 6 and len(setup.product.angular_slots) == 3
    # (g, b, r) winds once around the first of the three cylinders
    want = (1, 0, 0)
    bad = [c.transported_winding for c in certs if tuple(c.transported_winding[:3]) != want]
    verdict(3, "winding invariance on cyl x cyl x cyl", not bad,
            f"{len(certs)} isotopies, violations {len(bad)}", runtime, 120.0)


def test_criterion_4_no_go(cfg, certificates, verdict):
    _, certs, _ = certificates
    sec = cfg["no_go"]
    torus = PhaseSpace.of(torus2())
    t0 = time.perf_counter()
    isos = [loop_topology.random_isotopy(torus, _rng(cfg["seed"], 200 + k), sec["stages"], sec["max_freq"],
                                         sec["max_power"], sec["max_total"], sec["scale"])
            for k in range(sec["torus_isotopies"])]
    exp = loop_topology.torus_experiment(isos, sec["h"], sec["loop_samples"])
    runtime = time.perf_counter() - t0
    verdicts = {c.verdict for c in certs}
    ok = verdicts == {"OBSTRUCTED"} and tuple(exp.red_winding) == (1, 0) and not exp.any_match
    verdict(4, "no-go certificate and torus curves", ok,
            f"verdicts {sorted(verdicts)}, required {certs[0].required_winding[:6]}, torus red "
            f"{tuple(exp.red_winding)} vs blue {tuple(exp.blue_winding)}, matched {exp.any_match}",
            runtime, 60.0)


def test_criterion_5_approximate_contrast(cfg, verdict):
    res = approx(cfg["approx"], cfg["seed"])
    r2 = [r["best_objective"] for r in res.report["r2"]]
    r2_evals = [r["evaluations"] for r in res.report["r2"]]
    floors = [r["floor"]["value"] for r in res.report["cylinder"]]
    ok = (len(r2) == 5 and max(r2) < 1e-3 and max(r2_evals) <= 50000
          and len(floors) == 5 and min(floors) >= math.pi - 0.05)
    verdict(5, "approximate cloning contrast", ok,
            f"R^2 objectives max {max(r2):.2e} (< 1e-3) with at most {max(r2_evals)} evaluations; "
            f"cylinder floors min {min(floors):.4f} (>= {math.pi - 0.05:.4f})", res.runtime, 300.0)


def test_criterion_6_point_cloning(cfg, verdict):
    sec = dict(cfg["points"], random=dict(cfg["points"]["random"], count=8))
    res = points(sec, cfg["seed"])
    endpoint = max(res.report[k]["verification"]["max_endpoint_error"] for k in ("coin", "swap", "random8"))
    inter = max(res.report[k]["verification"]["max_non_interference"] for k in ("coin", "swap", "random8"))
    verdict(6, "point cloning (coin, swap, 8 random)", endpoint < 1e-6 and inter < 1e-9,
            f"endpoint error {endpoint:.2e} (< 1e-6), non-interference {inter:.2e} (< 1e-9)",
            res.runtime, 60.0)


def test_criterion_7_quantum(cfg, verdict):
    sec = dict(cfg["quantum"], samples=1000, max_dim=8)
    res = quantum(sec, cfg["seed"])
    ident = res.report["random"]["max_identity_residual"]
    unit = res.report["random"]["max_unitarity_residual"]
    verdict(7, "one-dimensional subspace cloning", ident < 1e-12 and unit < 1e-12,
            f"regrouping {ident:.2e}, unitarity {unit:.2e} over 1000 pairs", res.runtime, 1.0)


def test_criterion_8_dynamics(cfg, verdict):
    res = dynamics(dict(cfg["dynamics"], steps=[1e-2, 5e-3, 2.5e-3]), cfg["seed"])
    ratios = res.report["ratios"]
    back = res.report["round_trip_error"]
    ok = all(abs(r - 4.0) <= 0.5 for r in ratios) and back < 1e-9
    verdict(8, "midpoint order and reversibility", ok,
            f"drift ratios {[round(r, 4) for r in ratios]} (4 +/- 0.5), round trip {back:.2e} (< 1e-9)")
