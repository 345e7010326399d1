"""History-based hp decisions and the adaptive solve/estimate/mark/refine loop.

An element marked for refinement is p-refined when the indicator reduction
achieved by its most recent refinement reached the expected factor for that
refinement type, and h-refined otherwise.  Expected factors, for a parent
configuration of degree ``p``, ``c`` children per bisection and dimension
``d``::

    lambda_h  = (1/c)^(p/d)
    lambda_p  = (p/(p+1))^(p/2)
    lambda_hp = lambda_p * lambda_h
"""
from dataclasses import dataclass, field
from enum import Enum
import logging
import time

import numpy as np

from . import assembly, estimator, linsolve
from .space import HpSpace, expand, interpolate_dirichlet, uniform_degrees

log = logging.getLogger(__name__)


class Tag(str, Enum):
    NONE = "none"
    H = "h"
    P = "p"
    HP = "hp"


class Decision(str, Enum):
    H = "h"
    P = "p"


class StrategyKind(str, Enum):
    HP_HISTORY = "hp"
    H_ONLY = "h"
    UNIFORM_H = "uniform-h"
    UNIFORM_P = "uniform-p"


class Status(str, Enum):
    TOLERANCE = "tolerance"
    MAX_DOF = "max-dof"
    MAX_ITERATIONS = "max-iterations"


@dataclass(frozen=True)
class HistoryRecord:
    tag: Tag = Tag.NONE
    parent_eta: float | None = None
    parent_degree: int | None = None

    def __post_init__(self):
        if self.tag is Tag.NONE:
            if self.parent_eta is not None or self.parent_degree is not None:
                raise ValueError("an untouched element carries no parent data")
        elif self.parent_eta is None or self.parent_eta < 0 or self.parent_degree is None:
            raise ValueError(f"tag {self.tag.value} needs parent_eta >= 0 and parent_degree")


NO_HISTORY = HistoryRecord()


@dataclass
class AdaptConfig:
    alpha: float = 0.5
    epsilon: float = 1e-6
    d: int = 2
    c_K: int = 2
    max_dof: int = 50_000
    max_iterations: int = 50
    strategy_kind: StrategyKind = StrategyKind.HP_HISTORY
    initial_degree: int = 2
    pcg_tol: float = linsolve.DEFAULT_RTOL

    def __post_init__(self):
        self.strategy_kind = StrategyKind(self.strategy_kind)
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        if self.d not in (2, 3):
            raise ValueError("d must be 2 or 3")
        if self.c_K < 2:
            raise ValueError("c_K must be >= 2")
        if self.initial_degree < 1:
            raise ValueError("initial degree must be >= 1")
        if self.max_iterations < 1 or self.max_dof < 1:
            raise ValueError("budgets must be positive")


# -- expected reduction factors ------------------------------------------------

def _check_degree(p):
    if p < 1:
        raise ValueError(f"degree must be >= 1, got {p}")


def lambda_h(p, c_K=2, d=2):
    _check_degree(p)
    return (1.0 / c_K) ** (p / d)


def lambda_p(p):
    _check_degree(p)
    return (p / (p + 1.0)) ** (p / 2.0)


def lambda_hp(p, c_K=2, d=2):
    return lambda_p(p) * lambda_h(p, c_K, d)


# -- marking and decisions -----------------------------------------------------

def mark_max(field, alpha):
    """Elements with ``eta_K >= alpha * max eta``."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    eta = field.eta if isinstance(field, estimator.IndicatorField) else dict(field)
    if not eta:
        raise ValueError("cannot mark an empty indicator field")
    threshold = alpha * max(eta.values())
    return {e for e, v in eta.items() if v >= threshold}


def decide(eta_K, history, config):
    """h or p for one marked element, from its refinement history."""
    if history.tag is Tag.NONE:
        return Decision.P
    p = history.parent_degree
    if history.tag is Tag.H:
        lam = lambda_h(p, config.c_K, config.d)
    elif history.tag is Tag.P:
        lam = lambda_p(p)
    else:
        lam = lambda_hp(p, config.c_K, config.d)
    return Decision.P if eta_K ** 2 <= lam ** 2 * history.parent_eta ** 2 else Decision.H


@dataclass
class RefinementOutcome:
    space: HpSpace
    history: dict
    n_h: int = 0
    n_p: int = 0
    n_hp: int = 0
    closure: int = 0


def apply_refinements(mesh, space, decisions, field):
    """Carry out h/p decisions; ``mesh`` is refined in place.

    Returns a :class:`RefinementOutcome` whose ``history`` maps every active
    element of the new mesh to its :class:`HistoryRecord`.
    """
    eta = field.eta
    p_set = {e for e, d in decisions.items() if Decision(d) is Decision.P}
    h_set = {e for e, d in decisions.items() if Decision(d) is Decision.H}
    old_degree = space.element_degree
    report = mesh.bisect(h_set)
    bisected = report.bisected

    degrees = {}
    history = {}
    for e in mesh.active_elements():
        anc = report.ancestor.get(e)
        if anc is None:
            p = old_degree[e]
            if e in p_set:
                degrees[e] = p + 1
                history[e] = HistoryRecord(Tag.P, eta[e], p)
            else:
                degrees[e] = p
                history[e] = NO_HISTORY
        else:
            p = old_degree[anc]
            if anc in p_set:
                degrees[e] = p + 1
                history[e] = HistoryRecord(Tag.HP, eta[anc], p)
            else:
                degrees[e] = p
                history[e] = HistoryRecord(Tag.H, eta[anc], p)
    return RefinementOutcome(
        HpSpace(mesh, degrees), history,
        n_h=len(h_set),
        n_p=len(p_set - bisected),
        n_hp=len(p_set & bisected),
        closure=len(bisected - h_set - p_set),
    )


def uniform_h_sweep(mesh, space):
    """Bisect every element twice (``h`` halves); children keep their degree.

    Two newest-vertex levels are the bisection analogue of red refinement, so
    successive meshes stay in one similarity class.
    """
    old = space.element_degree
    n = len(old)
    mesh.bisect(mesh.active_set)
    mesh.bisect(mesh.active_set)
    degrees = {}
    for e in mesh.active_elements():
        a = e
        while a not in old:
            a = mesh.elements[a].parent
        degrees[e] = old[a]
    return RefinementOutcome(HpSpace(mesh, degrees), dict.fromkeys(degrees, NO_HISTORY), n_h=n)


# -- discrete solve ------------------------------------------------------------

@dataclass
class Solution:
    u: np.ndarray
    pcg_iterations: int
    relative_residual: float
    converged: bool
    system_size: int


def solve(space, problem, pcg_tol=linsolve.DEFAULT_RTOL, max_iter=None):
    """Galerkin solution (full coefficient vector) for a problem on ``space``."""
    system = assembly.assemble(space, problem.f)
    g_values = interpolate_dirichlet(space, problem.g)
    reduced = assembly.apply_dirichlet(system, space, g_values)
    result = linsolve.solve(reduced, space, rel_tol=pcg_tol, max_iter=max_iter)
    u = expand(space, result.x, g_values)
    return Solution(u, result.iterations, result.relative_residual, result.converged, reduced.n)


# -- the loop ------------------------------------------------------------------

@dataclass
class LogRow:
    iteration: int
    n_elem: int
    n_dof: int
    eta: float
    energy_error: float | None
    n_h: int
    n_p: int
    n_hp: int
    pcg_iters: int
    seconds: float
    pcg_residual: float = 0.0


@dataclass
class ConvergenceLog:
    rows: list = field(default_factory=list)
    status: Status | None = None

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    def __len__(self):
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


@dataclass
class IterationState:
    """What an observer sees after the estimate step of one iteration."""

    iteration: int
    mesh: object
    space: HpSpace
    field: estimator.IndicatorField
    history: dict
    marked: set
    decisions: dict


@dataclass
class AdaptResult:
    log: ConvergenceLog
    mesh: object
    space: HpSpace
    field: estimator.IndicatorField
    u: np.ndarray


def adapt_loop(problem, config, mesh=None, observer=None):
    """Run solve -> estimate -> stop test -> mark -> decide -> refine.

    ``observer(state)`` receives an :class:`IterationState` every iteration
    (``marked``/``decisions`` are empty on the final one).
    """
    mesh = problem.mesh() if mesh is None else mesh
    space = HpSpace(mesh, uniform_degrees(mesh, config.initial_degree))
    history = {e: NO_HISTORY for e in space.elements}
    clog = ConvergenceLog()
    kind = config.strategy_kind

    for it in range(1, config.max_iterations + 1):
        t0 = time.perf_counter()
        try:
            sol = solve(space, problem, config.pcg_tol)
        except linsolve.SolverError as exc:
            raise linsolve.SolverError(f"iteration {it} (N_d={space.n_dof}): {exc}") from exc
        if not sol.converged:
            log.warning("iteration %d: PCG stopped at relative residual %.3e",
                        it, sol.relative_residual)
        field = estimator.indicators(space, sol.u, problem.f)
        eta = field.eta_global
        err = estimator.energy_error(space, sol.u, problem.grad) if problem.has_exact else None

        status = None
        if eta <= config.epsilon:
            status = Status.TOLERANCE
        elif space.n_dof >= config.max_dof:
            status = Status.MAX_DOF
        elif it == config.max_iterations:
            status = Status.MAX_ITERATIONS

        marked, decisions = set(), {}
        row = LogRow(it, len(space.elements), space.n_dof, eta, err, 0, 0, 0,
                     sol.pcg_iterations, 0.0, sol.relative_residual)
        if status is None:
            if kind is StrategyKind.UNIFORM_H:
                marked = set(space.elements)
                decisions = dict.fromkeys(marked, Decision.H)
            elif kind is StrategyKind.UNIFORM_P:
                marked = set(space.elements)
                decisions = dict.fromkeys(marked, Decision.P)
            else:
                marked = mark_max(field, config.alpha)
                if kind is StrategyKind.H_ONLY:
                    decisions = dict.fromkeys(marked, Decision.H)
                else:
                    eta_map = field.eta
                    decisions = {e: decide(eta_map[e], history[e], config) for e in sorted(marked)}
        if observer is not None:
            observer(IterationState(it, mesh, space, field, history, marked, decisions))

        if status is None:
            if kind is StrategyKind.UNIFORM_H:
                outcome = uniform_h_sweep(mesh, space)
            else:
                outcome = apply_refinements(mesh, space, decisions, field)
            row.n_h, row.n_p, row.n_hp = outcome.n_h, outcome.n_p, outcome.n_hp
            new_space, history = outcome.space, outcome.history
        row.seconds = time.perf_counter() - t0
        clog.rows.append(row)
        log.info("iter %d: elems=%d N_d=%d eta=%.4e err=%s h/p/hp=%d/%d/%d pcg=%d",
                 it, row.n_elem, row.n_dof, eta,
                 "-" if err is None else f"{err:.4e}", row.n_h, row.n_p, row.n_hp, row.pcg_iters)
        if status is not None:
            clog.status = status
            return AdaptResult(clog, mesh, space, field, sol.u)
        space = new_space
    raise AssertionError("unreachable")
