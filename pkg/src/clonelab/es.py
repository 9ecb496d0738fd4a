"""A compact (mu/mu_w, lambda) CMA-ES with restarts on stagnation.

Minimises a batched objective ``f(X) -> values`` where ``X`` holds one
candidate per row.  Non-finite values are treated as +inf.  The optimiser is
written in ask/tell form so several independently seeded runs can share one
objective call (:func:`cma_es_many`); each run only ever sees its own rows,
so its result does not depend on the company it keeps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class ESResult:
    x_best: np.ndarray
    f_best: float
    evaluations: int
    generations: int
    restarts: int
    trace: list = field(default_factory=list)  # (evaluations, best-so-far)


def _clean(vals):
    vals = np.asarray(vals, dtype=float)
    return np.where(np.isfinite(vals), vals, np.inf)


class CMAES:
    """One seeded run.  Call :meth:`ask` and :meth:`tell` until :attr:`done`."""

    def __init__(self, x0, f0: float, sigma0: float, budget: int, rng: np.random.Generator,
                 popsize: int = 16, stagnation: int = 50, f_target: float = -np.inf,
                 bounds: float | None = None):
        self.x_best = np.asarray(x0, dtype=float).copy()
        self.f_best = float(_clean([f0])[0])
        n = self.n = self.x_best.size
        self.sigma0, self.budget, self.rng = sigma0, budget, rng
        self.lam, self.stagnation, self.f_target, self.bounds = popsize, stagnation, f_target, bounds
        mu = popsize // 2
        w = np.log(mu + 0.5) - np.log(np.arange(1, mu + 1))
        self.w = w / w.sum()
        self.mu = mu
        mueff = self.mueff = 1.0 / np.sum(self.w ** 2)
        self.cc = (4 + mueff / n) / (n + 4 + 2 * mueff / n)
        self.cs = (mueff + 2) / (n + mueff + 5)
        self.c1 = 2 / ((n + 1.3) ** 2 + mueff)
        self.cmu = min(1 - self.c1, 2 * (mueff - 2 + 1 / mueff) / ((n + 2) ** 2 + mueff))
        self.damps = 1 + 2 * max(0.0, np.sqrt((mueff - 1) / (n + 1)) - 1) + self.cs
        self.chi_n = np.sqrt(n) * (1 - 1 / (4 * n) + 1 / (21 * n ** 2))
        self.evaluations = 1
        self.generations = 0
        self.runs = 0
        self.trace = [(1, self.f_best)]
        self.mean = self.x_best.copy()
        self._restart()

    def _restart(self):
        # (re)initialise the search distribution around the incumbent
        self.runs += 1
        self.mean = self.x_best.copy()
        self.sigma = self.sigma0
        self.C = np.eye(self.n)
        self.pc = np.zeros(self.n)
        self.ps = np.zeros(self.n)
        self.B, self.D = np.eye(self.n), np.ones(self.n)
        self.stall, self.run_best, self.g = 0, np.inf, 0

    @property
    def done(self) -> bool:
        return self.evaluations + self.lam > self.budget or self.f_best <= self.f_target

    def ask(self) -> np.ndarray:
        self._Y = (self.rng.standard_normal((self.lam, self.n)) * self.D) @ self.B.T
        X = self.mean + self.sigma * self._Y
        if self.bounds is not None:
            X = np.clip(X, -self.bounds, self.bounds)
        return X

    def tell(self, X, vals) -> None:
        vals = _clean(vals)
        Y, w, n = self._Y, self.w, self.n
        self.g += 1
        self.generations += 1
        self.evaluations += self.lam
        order = np.argsort(vals, kind="stable")
        if vals[order[0]] < self.f_best:
            self.f_best = float(vals[order[0]])
            self.x_best = X[order[0]].copy()
        self.trace.append((self.evaluations, self.f_best))
        if not np.isfinite(self.run_best) or vals[order[0]] < self.run_best - 1e-12 * max(1.0, abs(self.run_best)):
            self.run_best = vals[order[0]]
            self.stall = 0
        else:
            self.stall += 1
        sel = order[:self.mu]
        y_w = w @ Y[sel]
        self.mean = self.mean + self.sigma * y_w
        c_inv_sqrt = (self.B / self.D) @ self.B.T
        cs, cc, c1, cmu = self.cs, self.cc, self.c1, self.cmu
        self.ps = (1 - cs) * self.ps + np.sqrt(cs * (2 - cs) * self.mueff) * (c_inv_sqrt @ y_w)
        hsig = (np.linalg.norm(self.ps) / np.sqrt(1 - (1 - cs) ** (2 * self.g)) / self.chi_n
                < 1.4 + 2 / (n + 1))
        self.pc = (1 - cc) * self.pc + hsig * np.sqrt(cc * (2 - cc) * self.mueff) * y_w
        rank_mu = (Y[sel].T * w) @ Y[sel]
        C = ((1 - c1 - cmu) * self.C + c1 * (np.outer(self.pc, self.pc) + (not hsig) * cc * (2 - cc) * self.C)
             + cmu * rank_mu)
        self.sigma *= np.exp((cs / self.damps) * (np.linalg.norm(self.ps) / self.chi_n - 1))
        self.C = 0.5 * (C + C.T)
        evals_c, self.B = np.linalg.eigh(self.C)
        self.D = np.sqrt(np.maximum(evals_c, 1e-300))
        if self.stall >= self.stagnation or not np.isfinite(self.sigma) or self.sigma * self.D.max() < 1e-14:
            self._restart()

    def result(self) -> ESResult:
        return ESResult(self.x_best, self.f_best, self.evaluations, self.generations,
                        max(0, self.runs - 1), self.trace)


def cma_es(f, x0, sigma0: float, budget: int, rng: np.random.Generator, popsize: int = 16,
           stagnation: int = 50, f_target: float = -np.inf, bounds: float | None = None) -> ESResult:
    x0 = np.asarray(x0, dtype=float)
    es = CMAES(x0, f(x0[None])[0], sigma0, budget, rng, popsize, stagnation, f_target, bounds)
    while not es.done:
        X = es.ask()
        es.tell(X, f(X))
    return es.result()


def cma_es_many(f, x0, sigma0: float, budget: int, rngs, popsize: int = 16, stagnation: int = 50,
                f_target: float = -np.inf, bounds: float | None = None) -> list:
    """Independent runs, one per generator in ``rngs``, advanced in lockstep."""
    x0 = np.asarray(x0, dtype=float)
    f0 = f(x0[None])[0]
    runs = [CMAES(x0, f0, sigma0, budget, rng, popsize, stagnation, f_target, bounds) for rng in rngs]
    while True:
        live = [es for es in runs if not es.done]
        if not live:
            break
        asks = [es.ask() for es in live]
        vals = _clean(f(np.vstack(asks)))
        for k, (es, X) in enumerate(zip(live, asks)):
            es.tell(X, vals[k * popsize:(k + 1) * popsize])
    return [es.result() for es in runs]
