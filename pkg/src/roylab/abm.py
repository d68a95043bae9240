"""Finite-agent oracle for the continuum equilibria.

Each agent owns one advantage draw (inverse-transform sampled from the
group's quantile) and a current sector. Sequential best-response dynamics
visit agents in a seeded random order; an agent switches only when strictly
better off under the sector shares prevailing at that moment, and the
shares update immediately. Empty-sector conventions: an agent never enters
a nonempty sector that currently has no members of their own group (the
minority penalty diverges), while a completely empty sector carries no
composition term at all.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import Composition, ModelParams, TypeId, advantage_quantile

__all__ = [
    "Agent",
    "AgentPopulation",
    "ConvergenceReport",
    "sample_population",
    "best_response_round",
    "run_to_convergence",
    "deviation_count",
]


@dataclass(frozen=True)
class Agent:
    type_id: TypeId
    delta: float
    sector: int


@dataclass(frozen=True)
class AgentPopulation:
    is_w: np.ndarray      # bool, one entry per agent
    delta: np.ndarray     # advantage draws
    sector: np.ndarray    # int8, values 1 or 2
    n_w: int
    n_m: int
    seed: int

    @property
    def size(self) -> int:
        return self.n_w + self.n_m

    @property
    def agents(self) -> list[Agent]:
        return [
            Agent(TypeId.W if w else TypeId.M, float(d), int(s))
            for w, d, s in zip(self.is_w, self.delta, self.sector)
        ]

    def shares(self) -> Composition:
        """Per-group empirical sector-1 fractions."""
        in1 = self.sector == 1
        r_w = float(np.count_nonzero(in1 & self.is_w)) / self.n_w
        r_m = float(np.count_nonzero(in1 & ~self.is_w)) / self.n_m
        return Composition(r_w, r_m)

    def summary_dict(self, rounds: int, converged: bool) -> dict:
        comp = self.shares()
        return {
            "N_w": self.n_w,
            "N_m": self.n_m,
            "seed": self.seed,
            "rounds": rounds,
            "converged": converged,
            "r_w": comp.r_w,
            "r_m": comp.r_m,
        }


@dataclass(frozen=True)
class ConvergenceReport:
    shares: Composition
    rounds: int
    converged: bool
    population: AgentPopulation
    share_history: list[tuple[float, float]]


def sample_population(
    params: ModelParams,
    n_w: int,
    n_m: int,
    seed: int,
    init_comp: Composition | None = None,
) -> AgentPopulation:
    """Draw a finite population by inverse-transform sampling.

    Agents start in the sector their draw favors (sector 1 exactly when the
    advantage is positive) unless init_comp pins initial per-group fractions,
    in which case a seeded random subset of each group is placed in sector 1.
    """
    if n_w < 1 or n_m < 1:
        raise ValueError("need at least one agent of each group")
    rng = np.random.default_rng(seed)
    u_w = np.clip(rng.random(n_w), 1e-15, 1.0 - 1e-15)
    u_m = np.clip(rng.random(n_m), 1e-15, 1.0 - 1e-15)
    delta = np.concatenate(
        [advantage_quantile(params.adv_w, u_w), advantage_quantile(params.adv_m, u_m)]
    )
    is_w = np.zeros(n_w + n_m, dtype=bool)
    is_w[:n_w] = True

    if init_comp is None:
        sector = np.where(delta > 0.0, 1, 2).astype(np.int8)
    else:
        sector = np.full(n_w + n_m, 2, dtype=np.int8)
        k_w = int(round(init_comp.r_w * n_w))
        k_m = int(round(init_comp.r_m * n_m))
        sector[rng.permutation(n_w)[:k_w]] = 1
        sector[n_w + rng.permutation(n_m)[:k_m]] = 1
    return AgentPopulation(is_w, delta, sector, n_w, n_m, seed)


def _masses(pop: AgentPopulation, params: ModelParams):
    w_w = params.mu_w / pop.n_w
    w_m = params.mu_m / pop.n_m
    in1 = pop.sector == 1
    m1w = w_w * np.count_nonzero(in1 & pop.is_w)
    m1m = w_m * np.count_nonzero(in1 & ~pop.is_w)
    m2w = params.mu_w - m1w
    m2m = params.mu_m - m1m
    return w_w, w_m, m1w, m1m, m2w, m2m


def best_response_round(
    pop: AgentPopulation, params: ModelParams, order_seed: int
) -> tuple[AgentPopulation, int]:
    """One sequential sweep in a seeded random order; returns (pop, switches).

    Shares update after every individual switch, so later agents in the
    order react to earlier moves within the same round.
    """
    rng = np.random.default_rng(order_seed)
    order = rng.permutation(pop.size).tolist()

    sec = pop.sector.tolist()
    dl = pop.delta.tolist()
    iw = pop.is_w.tolist()
    w_w, w_m, m1w, m1m, m2w, m2m = _masses(pop, params)
    sigma = params.sigma
    c_w = params.pref_w.c
    c_m = params.pref_m.c
    inf = math.inf
    switched = 0

    if sigma == 0.0 or (c_w == 0.0 and c_m == 0.0):
        for i in order:
            want = 1 if dl[i] > 0.0 else (2 if dl[i] < 0.0 else sec[i])
            if want != sec[i]:
                sec[i] = want
                switched += 1
        return (
            AgentPopulation(pop.is_w, pop.delta, np.array(sec, dtype=np.int8),
                            pop.n_w, pop.n_m, pop.seed),
            switched,
        )

    for i in order:
        w_agent = iw[i]
        c = c_w if w_agent else c_m
        wgt = w_w if w_agent else w_m
        own1 = m1w if w_agent else m1m
        own2 = m2w if w_agent else m2m
        tot1 = m1w + m1m
        tot2 = m2w + m2m
        if tot1 <= 0.0:
            h1 = 0.0
        elif own1 <= 0.0:
            h1 = inf
        else:
            h1 = c * tot1 / own1
        if tot2 <= 0.0:
            h2 = 0.0
        elif own2 <= 0.0:
            h2 = inf
        else:
            h2 = c * tot2 / own2
        gap = dl[i] - sigma * (h1 - h2)
        if sec[i] == 2:
            if gap > 0.0:
                sec[i] = 1
                switched += 1
                if w_agent:
                    m1w += wgt
                    m2w -= wgt
                else:
                    m1m += wgt
                    m2m -= wgt
        else:
            if gap < 0.0:
                sec[i] = 2
                switched += 1
                if w_agent:
                    m1w -= wgt
                    m2w += wgt
                else:
                    m1m -= wgt
                    m2m += wgt

    return (
        AgentPopulation(pop.is_w, pop.delta, np.array(sec, dtype=np.int8),
                        pop.n_w, pop.n_m, pop.seed),
        switched,
    )


def run_to_convergence(
    pop: AgentPopulation, params: ModelParams, max_rounds: int = 1000
) -> ConvergenceReport:
    """Iterate sequential rounds until a full sweep makes no switch.

    Round r uses the order seed derived from (population seed, r), so a rerun
    with the same population is bit-identical.
    """
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    history = [_shares_tuple(pop)]
    converged = False
    rounds = 0
    for r in range(max_rounds):
        order_seed = int(np.random.SeedSequence([pop.seed & 0x7FFFFFFF, r]).generate_state(1)[0])
        pop, switched = best_response_round(pop, params, order_seed)
        rounds = r + 1
        history.append(_shares_tuple(pop))
        if switched == 0:
            converged = True
            break
    return ConvergenceReport(pop.shares(), rounds, converged, pop, history)


def _shares_tuple(pop: AgentPopulation) -> tuple[float, float]:
    comp = pop.shares()
    return (comp.r_w, comp.r_m)


def deviation_count(pop: AgentPopulation, params: ModelParams) -> int:
    """Number of strictly improving unilateral switches at frozen shares.

    Zero exactly when a sequential round would make no switch, since a
    switch-free sweep never changes the shares it evaluates against.
    """
    w_w, w_m, m1w, m1m, m2w, m2m = _masses(pop, params)
    tot1 = m1w + m1m
    tot2 = m2w + m2m
    sigma = params.sigma

    def comp_term(c, own1, own2):
        if sigma == 0.0 or c == 0.0:
            return 0.0
        h1 = 0.0 if tot1 <= 0.0 else (math.inf if own1 <= 0.0 else c * tot1 / own1)
        h2 = 0.0 if tot2 <= 0.0 else (math.inf if own2 <= 0.0 else c * tot2 / own2)
        if h1 == h2:
            return 0.0
        return sigma * (h1 - h2)

    term_w = comp_term(params.pref_w.c, m1w, m2w)
    term_m = comp_term(params.pref_m.c, m1m, m2m)
    gap = np.where(pop.is_w, pop.delta - term_w, pop.delta - term_m)
    improving = np.where(pop.sector == 2, gap > 0.0, gap < 0.0)
    return int(np.count_nonzero(improving))
