"""Experiment suites behind the command line.

Each suite takes its config section and the global seed and returns a
:class:`SuiteResult`: a JSON-ready report, the list of asserted properties
with their measured values, and CSV artifacts to be written on request.
Random streams are derived from ``(seed, stream id)`` so suites do not
influence each other.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import approx_search, cloning_linear, loop_topology, point_cloning, quantum_analogy
from .dynamics import energy_drift, flow, flow_map, round_trip_error, symplecticity_residual
from .hamiltonians import Pendulum
from .phase_space import PhaseSpace, cylinder, torus2


@dataclass
class Check:
    prop: str
    value: object
    bound: str
    passed: bool

    def to_dict(self) -> dict:
        return {"property": self.prop, "value": self.value, "bound": self.bound, "passed": bool(self.passed)}


@dataclass
class SuiteResult:
    name: str
    report: dict
    checks: list
    artifacts: dict = field(default_factory=dict)  # file name -> writer(path)
    runtime: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failures(self) -> list:
        return [c for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {"suite": self.name, "passed": self.passed, "checks": [c.to_dict() for c in self.checks],
                "report": self.report}


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng([stream, seed])


def _below(prop, value, tol):
    value = float(value)
    return Check(prop, value, f"< {tol:g}", bool(value < tol))


def _at_least(prop, value, bound):
    value = float(value)
    return Check(prop, value, f">= {bound:.6g}", bool(value >= bound))


def _equal(prop, value, want):
    return Check(prop, value, f"== {want}", value == want)


def _timed(fn):
    def run(cfg, seed):
        t0 = time.perf_counter()
        res = fn(cfg, seed)
        res.runtime = time.perf_counter() - t0
        return res

    run.__name__ = fn.__name__
    run.__doc__ = fn.__doc__
    return run


@_timed
def clone_r2n(cfg: dict, seed: int) -> SuiteResult:
    """Exact linear clone maps, their defects, and the generator flows."""
    rng = _rng(seed, 1)
    checks, report, artifacts = [], {"maps": []}, {}
    tol = cfg["tolerances"]
    cmap = cloning_linear.complete_lorentz_frame(cfg["g"])
    report["mc"] = cmap.mc.tolist()
    checks.append(_below("lorentz_residual", cmap.lorentz_residual, tol["lorentz"]))
    for dim in cfg["dims"]:
        setup = cloning_linear.r2n_setup(dim // 2, cfg["g"])
        x = rng.uniform(-cfg["box"], cfg["box"], (cfg["samples"], dim))
        defect = cloning_linear.clone_defect(setup, x)
        report["maps"].append({"dim": dim, "clone_defect": defect.to_dict()})
        checks.append(_below(f"clone_defect[R^{dim}]", defect.value, tol["defect"]))
    gen = cfg["generator"]
    report["generator"] = []
    for dim in gen["dims"]:
        nh = dim // 2
        H = cloning_linear.generator_hamiltonian(cmap, nh)
        z = rng.uniform(-gen["box"], gen["box"], (gen["samples"], 3 * dim))
        # the finite-difference probes ride in the same batch as the sample
        k, n = gen["jacobian_points"], 3 * dim
        eye = gen["delta"] * np.eye(n)
        probes = np.concatenate([z[:k, None, :] + eye, z[:k, None, :] - eye], axis=1).reshape(-1, n)
        out = flow_map(H, np.vstack([z, probes]), 0.0, 1.0, gen["h"])
        out, ends = out[:len(z)], out[len(z):].reshape(k, 2 * n, n)
        err = float(np.max(np.abs(out - z @ cmap.block_matrix(nh).T)))
        jms = np.swapaxes(ends[:, :n] - ends[:, n:], -1, -2) / (2.0 * gen["delta"])
        sym = max((symplecticity_residual(H.space, jm) for jm in jms), default=0.0)
        report["generator"].append({"dim": dim, "hamiltonian": H.to_dict(), "flow_error": err,
                                    "symplecticity": sym})
        checks.append(_below(f"generator_flow_error[R^{dim}]", err, tol["flow"]))
        checks.append(_below(f"generator_symplecticity[R^{dim}]", sym, tol["symplecticity"]))
        if gen["trajectory_points"]:
            traj = flow(H, z[:gen["trajectory_points"]], 0.0, 1.0, gen["trajectory_h"])
            artifacts[f"generator_trajectory_R{dim}.csv"] = traj.to_csv
    return SuiteResult("clone-r2n", report, checks, artifacts)


def _setup(sec) -> cloning_linear.CloneSetup:
    return cloning_linear.CloneSetup(PhaseSpace.from_dict(sec["system"]), PhaseSpace.from_dict(sec["machine"]),
                                     np.array(sec["blank"], dtype=float), np.array(sec["machine_point"], dtype=float))


@_timed
def no_go(cfg: dict, seed: int) -> SuiteResult:
    """Certificates for random isotopies, the pointwise cheat, and the torus curves."""
    setup = _setup(cfg)
    product = setup.product
    slot = setup.system.angular_slots[0]
    probe = loop_topology.circle_loop(setup.system, {slot: 1}, base=setup.blank, n=cfg["loop_samples"])
    na = len(setup.system.angular_slots)
    want = tuple(loop_topology.winding_vector(probe))
    certs, checks, artifacts = [], [], {}
    violations = 0
    for k in range(cfg["isotopies"]):
        iso = loop_topology.random_isotopy(product, _rng(seed, 100 + k), cfg["stages"], cfg["max_freq"],
                                           cfg["max_power"], cfg["max_total"], cfg["scale"], label=f"random-{k}")
        cert, src, img = loop_topology.no_go_certificate(setup, iso, probe, cfg["h"])
        certs.append(cert.to_dict())
        kept = tuple(cert.transported_winding[:2 * na]) == want + (0,) * na
        violations += (not kept) + (cert.verdict != "OBSTRUCTED")
        if k == 0:
            artifacts["nogo_source_loop.csv"] = src.to_csv
        if k < cfg["csv_loops"]:
            artifacts[f"nogo_transported_{k}.csv"] = img.to_csv
    checks.append(_equal("winding_invariance_violations", violations, 0))
    cheat, _, cheat_img = loop_topology.no_go_certificate(setup, loop_topology.cheat_clone_map(setup), probe,
                                                          cfg["h"], label="pointwise-cheat")
    artifacts["nogo_cheat_loop.csv"] = cheat_img.to_csv
    checks.append(_equal("cheat_map_verdict", cheat.verdict, "CONSISTENT"))
    torus = PhaseSpace.of(torus2())
    isos = [loop_topology.random_isotopy(torus, _rng(seed, 200 + k), cfg["stages"], cfg["max_freq"],
                                         cfg["max_power"], cfg["max_total"], cfg["scale"], label=f"torus-{k}")
            for k in range(cfg["torus_isotopies"])]
    exp = loop_topology.torus_experiment(isos, cfg["h"], cfg["loop_samples"])
    for label, loop in exp.loops:
        artifacts[f"torus_{label}.csv"] = loop.to_csv
    checks.append(_equal("torus_red_deformed_to_blue", exp.any_match, False))
    report = {
        "verdict": "OBSTRUCTED" if all(c["verdict"] == "OBSTRUCTED" for c in certs) else "NOT OBSTRUCTED",
        "probe_winding": list(want),
        "certificates": certs,
        "cheat_certificate": cheat.to_dict(),
        "torus": exp.to_dict(),
    }
    return SuiteResult("no-go", report, checks, artifacts)


def _family(sec, setup) -> approx_search.CandidateFamily:
    f = sec["family"]
    return approx_search.CandidateFamily(setup.product, f["kind"], tuple(f["durations"]), f["max_freq"],
                                         f["max_power"], f["max_total"], f["h"])


def _trace_writer(trace):
    def write(path):
        with open(path, "w") as fh:
            fh.write("evaluations,best_objective\n")
            for e, v in trace:
                fh.write(f"{int(e)},{float(v)!r}\n")

    return write


def _search(sec, setup, sample, seed, probe=None):
    return approx_search.optimize_seeds(
        _family(sec, setup), setup, sample, sec["budget"], [seed + s for s in sec["seeds"]], sec["sigma0"],
        sec["popsize"], sec["stagnation"], sec["f_target"], sec["param_bound"], probe)


@_timed
def approx(cfg: dict, seed: int) -> SuiteResult:
    """Search on a Euclidean system (should clone) and a cylinder (floor near pi)."""
    checks, artifacts, report = [], {}, {}
    r2 = cfg["r2"]
    setup = _setup(r2)
    x = _rng(seed, 3).uniform(-r2["box"], r2["box"], (r2["sample_size"], setup.system.dim))
    reports = _search(r2, setup, x, seed)
    report["r2"] = [r.to_dict() for r in reports]
    for r in reports:
        checks.append(_below(f"r2_objective[seed={r.seed}]", r.best_objective, r2["objective_tol"]))
        artifacts[f"approx_r2_trace_seed{r.seed}.csv"] = _trace_writer(r.trace)
    cyl = cfg["cylinder"]
    setup = _setup(cyl)
    m = setup.system
    s = cyl["sample_size"]
    lo = np.where(m.angular_mask, 0.0, -cyl["momentum_range"])
    hi = np.where(m.angular_mask, 2.0 * math.pi, cyl["momentum_range"])
    x = _rng(seed, 4).uniform(lo, hi, (s, m.dim))
    # spread the first angle evenly so the sample goes once around the circle
    x[:, m.angular_slots[0]] = 2.0 * math.pi * np.arange(s) / s
    probe = loop_topology.circle_loop(m, {m.angular_slots[0]: 1}, base=setup.blank, n=cyl["probe_samples"])
    reports = _search(cyl, setup, x, seed, probe)
    report["cylinder"] = [r.to_dict() for r in reports]
    bound = math.pi - cyl["floor_margin"]
    for r in reports:
        checks.append(_at_least(f"cylinder_angular_floor[seed={r.seed}]", r.floor.value, bound))
        artifacts[f"approx_cylinder_trace_seed{r.seed}.csv"] = _trace_writer(r.trace)
    return SuiteResult("approx", report, checks, artifacts)


def _trajectory_writer(plan, h):
    def write(path):
        space = plan.space
        rows, t0 = [], 0.0
        z = plan.sources
        for _, H in plan.hamiltonians():
            traj = flow(H, z, 0.0, 1.0, h * 10)
            for t, pts in zip(traj.times[(1 if rows else 0):], traj.points[(1 if rows else 0):]):
                rows.append([t0 + t] + list(pts.reshape(-1)))
            z = flow_map(H, z, 0.0, 1.0, h)
            t0 += 1.0
        with open(path, "w") as fh:
            fh.write(",".join(["t"] + [f"coord_{i}" for i in range(space.dim * len(plan.sources))]) + "\n")
            for row in rows:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    return write


@_timed
def points(cfg: dict, seed: int) -> SuiteResult:
    """Coin, swap and random configurations moved by staged bump isotopies."""
    checks, artifacts, report = [], {}, {}
    cases = []
    if cfg["coin"]:
        cases.append(("coin",) + point_cloning.coin_example())
    if cfg["swap"]:
        r2 = PhaseSpace.from_dict([{"kind": "euclidean", "dim": 2}])
        cases.append(("swap", r2, np.array([[0.0, 0.0], [1.0, 0.0]]), np.array([[1.0, 0.0], [0.0, 0.0]])))
    rnd = cfg["random"]
    if rnd["count"]:
        space = PhaseSpace.from_dict(rnd["space"])
        src, dst = point_cloning.random_configuration(space, rnd["count"], _rng(seed, 5), rnd["min_spacing"],
                                                      rnd["momentum_range"])
        cases.append((f"random{rnd['count']}", space, src, dst))
    for name, space, src, dst in cases:
        plan = point_cloning.plan_transport(space, src, dst, _rng(seed, 6))
        iso, rec = point_cloning.execute_plan(plan, cfg["h"], cfg["probes"], _rng(seed, 7), check=False,
                                              delta=cfg["delta"])
        entry = {"plan": plan.to_dict(), "verification": rec.to_dict()}
        checks.append(_below(f"{name}_endpoint_error", rec.max_endpoint_error, point_cloning.ENDPOINT_TOL))
        checks.append(_below(f"{name}_non_interference", rec.max_non_interference, point_cloning.INTERFERENCE_TOL))
        checks.append(_below(f"{name}_symplecticity", rec.max_symplecticity, point_cloning.SYMPLECTIC_TOL))
        if name == "coin":
            artifacts["points_coin_trajectory.csv"] = _trajectory_writer(plan, cfg["h"])
            # a loop around the first coin's circle keeps its winding through the isotopy
            loop = loop_topology.circle_loop(space, {space.angular_slots[0]: 1}, base=[0.0, 0.3, 0.0, 0.3],
                                             n=cfg["loop_samples"])
            moved = loop_topology.transport_loop(iso, loop, cfg["h"])
            before, after = loop_topology.winding_vector(loop), loop_topology.winding_vector(moved)
            entry["loop_winding"] = {"before": list(before), "after": list(after)}
            checks.append(_equal("coin_loop_winding_preserved", after == before, True))
        report[name] = entry
    return SuiteResult("points", report, checks, artifacts)


@_timed
def quantum(cfg: dict, seed: int) -> SuiteResult:
    """Worked examples plus random regrouping and unitarity runs."""
    tol = cfg["tolerance"]
    checks, report = [], {}
    b = np.array([1.0, 1.0j]) / math.sqrt(2.0)
    examples = {
        "real": quantum_analogy.clone_1d_subspace([1.0, 0.0], [2.0, 0.0]),
        "complex": quantum_analogy.clone_1d_subspace(b, 1j * b),
        "zero": quantum_analogy.clone_1d_subspace([1.0, 0.0], [0.0, 0.0]),
    }
    report["examples"] = {k: v.to_dict() for k, v in examples.items()}
    for k, v in examples.items():
        checks.append(_below(f"example_{k}_residual", v.residual, tol))
    u = quantum_analogy.rotate_b_into_subspace([1.0, 0.0], [0.0, 1.0])
    img = u @ np.array([1.0, 0.0])
    report["rotation_example"] = {"image": [[z.real, z.imag] for z in img]}
    checks.append(_below("rotation_example_off_line", abs(img[0]), tol))
    suite = quantum_analogy.regrouping_suite(cfg["samples"], _rng(seed, 8), cfg["max_dim"])
    report["random"] = suite
    checks.append(_below("regrouping_identity", suite["max_identity_residual"], tol))
    checks.append(_below("unitarity", suite["max_unitarity_residual"], tol))
    report["open_question"] = ("the machine output is taken as (1/c)|1>, the scaling that makes the "
                               "regrouping identity exact")
    return SuiteResult("quantum-1d", report, checks)


@_timed
def dynamics(cfg: dict, seed: int) -> SuiteResult:
    """Pendulum energy-drift order and time-reversal round trip."""
    H = Pendulum(PhaseSpace.of(cylinder()))
    z0 = np.array(cfg["z0"], dtype=float)
    drifts = [energy_drift(H, z0, cfg["t1"], h) for h in cfg["steps"]]
    ratios = [a / b for a, b in zip(drifts, drifts[1:])]
    back = round_trip_error(H, z0, cfg["t1"], cfg["reversal_h"])
    checks = [Check(f"drift_ratio[{h1:g}->{h2:g}]", r, f"{cfg['ratio']:g} +/- {cfg['ratio_tol']:g}",
                    abs(r - cfg["ratio"]) <= cfg["ratio_tol"])
              for h1, h2, r in zip(cfg["steps"], cfg["steps"][1:], ratios)]
    checks.append(_below("round_trip_error", back, cfg["reversal_tol"]))
    report = {"steps": list(cfg["steps"]), "drifts": drifts, "ratios": ratios, "round_trip_error": back}
    return SuiteResult("dynamics", report, checks)


SUITES = {
    "clone-r2n": ("clone_r2n", clone_r2n),
    "no-go": ("no_go", no_go),
    "approx": ("approx", approx),
    "points": ("points", points),
    "quantum-1d": ("quantum", quantum),
    "dynamics": ("dynamics", dynamics),
}


def run_suite(name: str, cfg: dict) -> SuiteResult:
    section, fn = SUITES[name]
    return fn(cfg[section], int(cfg["seed"]))
