"""Leave-one-out risk surrogates and configuration search.

Both losses reduce to inner products between kernel elements and the
observation counts, so neither ever rebuilds an estimate per held-out
point: leaving out one observation only shifts one count. Element
lookups are memoized per (unordered) cell pair within a single risk
evaluation, and every reduction runs in a fixed ascending-cell order so
repeated runs are bitwise identical.
"""

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import BudgetExceededError, ConfigError, InsufficientDataError
from .estimators import CountsVector, EstimatorConfig, _config_state
from .shrinkage import ShrinkageSpec

__all__ = [
    "LOSSES",
    "RiskReport",
    "SearchSpace",
    "coordinate_descent_w",
    "evaluate_space",
    "grid_search",
    "kl_risk",
    "loo_term",
    "se_risk",
]

LOSSES = ("se", "kl")


@dataclass(frozen=True, eq=False)
class RiskReport:
    """Outcome of one leave-one-out risk evaluation.

    loo_terms holds the held-out estimate for every observation in
    canonical (ascending cell) order. For the KL surrogate, dominated
    marks a nonpositive held-out estimate: the surrogate is then -inf,
    which ranks below every finite value, rather than an exception.
    """

    loss: str
    value: float
    loo_terms: tuple
    config: EstimatorConfig
    element_evals: int
    squared_element_evals: int
    dominated: bool


class _PairEvaluator:
    """Memoizing symmetric element access with distinct-evaluation counters."""

    def __init__(self, config):
        self.state = _config_state(config)
        self._elements = {}
        self._squared = {}

    def element(self, a, b):
        key = (a, b) if a <= b else (b, a)
        val = self._elements.get(key)
        if val is None:
            val = self.state.element(key[0], key[1])
            self._elements[key] = val
        return val

    def squared(self, a, b):
        key = (a, b) if a <= b else (b, a)
        val = self._squared.get(key)
        if val is None:
            val = self.state.squared(key[0], key[1])
            self._squared[key] = val
        return val

    @property
    def element_evals(self):
        return len(self._elements)

    @property
    def squared_evals(self):
        return len(self._squared)


def _check_inputs(config, counts):
    if not isinstance(config, EstimatorConfig):
        raise ConfigError("expected an EstimatorConfig")
    if not isinstance(counts, CountsVector):
        raise ConfigError("expected a CountsVector")
    if config.n != counts.n:
        raise ConfigError(
            f"estimator dimension {config.n} does not match data dimension {counts.n}"
        )
    if counts.total < 2:
        raise InsufficientDataError("leave-one-out needs at least two observations")


def _term_for_cell(ev, counts, cell):
    """Held-out estimate at `cell` when one of its observations is removed.

    Only the multiplicity of `cell` itself changes, so the diagonal
    element is needed exactly when that cell was observed twice or more.
    """
    acc = 0.0
    for other, cnt in counts.cells:
        if other == cell:
            if cnt >= 2:
                acc += (cnt - 1) * ev.element(cell, cell)
        else:
            acc += cnt * ev.element(cell, other)
    return acc / (counts.total - 1)


def loo_term(k, config, counts):
    """Held-out estimate for observation k in canonical order.

    Matches rebuilding the counts without observation k and evaluating
    the estimate at that observation's cell.
    """
    _check_inputs(config, counts)
    obs = counts.observations
    if not isinstance(k, (int, np.integer)) or isinstance(k, bool):
        raise ValueError(f"observation index must be an integer, got {k!r}")
    if not 0 <= k < len(obs):
        raise ValueError(f"observation index {k} out of range [0, {len(obs) - 1}]")
    ev = _PairEvaluator(config)
    return _term_for_cell(ev, counts, obs[int(k)])


def _cell_terms(ev, counts):
    return {cell: _term_for_cell(ev, counts, cell) for cell, _ in counts.cells}


def kl_risk(config, counts):
    """Leave-one-out log-likelihood surrogate (maximize).

    A nonpositive held-out estimate anywhere makes the surrogate -inf
    and sets dominated, so such configurations lose to every finite one
    without raising.
    """
    _check_inputs(config, counts)
    ev = _PairEvaluator(config)
    terms = _cell_terms(ev, counts)
    loo_terms = tuple(terms[cell] for cell in counts.observations)
    dominated = any(not term > 0.0 for term in loo_terms)
    if dominated:
        value = -math.inf
    else:
        value = math.fsum(cnt * math.log(terms[cell]) for cell, cnt in counts.cells)
    return RiskReport(
        loss="kl",
        value=value,
        loo_terms=loo_terms,
        config=config,
        element_evals=ev.element_evals,
        squared_element_evals=ev.squared_evals,
        dominated=dominated,
    )


def se_risk(config, counts):
    """Leave-one-out squared-error surrogate (minimize).

    Equals p_K' Q^2 p_K minus twice the mean held-out estimate; differs
    from the true expected squared error only by a configuration-free
    constant, so rankings are preserved.
    """
    _check_inputs(config, counts)
    ev = _PairEvaluator(config)
    items = counts.cells
    N = counts.total
    quad = 0.0
    for pos, (a, cnt_a) in enumerate(items):
        for b, cnt_b in items[pos:]:
            contrib = (cnt_a / N) * (cnt_b / N) * ev.squared(a, b)
            quad += contrib if a == b else 2.0 * contrib
    terms = _cell_terms(ev, counts)
    loo_terms = tuple(terms[cell] for cell in counts.observations)
    value = quad - (2.0 / N) * math.fsum(cnt * terms[cell] for cell, cnt in items)
    return RiskReport(
        loss="se",
        value=value,
        loo_terms=loo_terms,
        config=config,
        element_evals=ev.element_evals,
        squared_element_evals=ev.squared_evals,
        dominated=False,
    )


def _risk(loss, config, counts):
    if loss == "kl":
        return kl_risk(config, counts)
    if loss == "se":
        return se_risk(config, counts)
    raise ConfigError(f"unknown loss {loss!r}; expected one of {LOSSES}")


def _is_better(challenger, incumbent):
    """Strict improvement; ties keep the incumbent (first wins)."""
    a, b = challenger.value, incumbent.value
    if math.isnan(a):
        return False
    if math.isnan(b):
        return True
    return a > b if challenger.loss == "kl" else a < b


# ---------------------------------------------------------------------------
# search spaces


def _check_budget(budget):
    if budget is None:
        return None
    if not isinstance(budget, (int, np.integer)) or isinstance(budget, bool) or budget < 1:
        raise ConfigError(f"budget must be a positive integer or None, got {budget!r}")
    return int(budget)


@dataclass(frozen=True, eq=False)
class SearchSpace:
    """Deterministically ordered list of candidate configurations.

    The factories enumerate axes in lexicographic order with gamma (or
    the first declared axis) outermost, so a given parameter grid always
    produces the same candidate sequence.
    """

    configs: tuple
    budget: int = None

    @classmethod
    def from_configs(cls, configs, budget=None):
        configs = tuple(configs)
        for cfg in configs:
            if not isinstance(cfg, EstimatorConfig):
                raise ConfigError("search space entries must be EstimatorConfig instances")
        return cls(configs=configs, budget=_check_budget(budget))

    @classmethod
    def aa_lambda_grid(cls, n, lambdas, budget=None):
        configs = tuple(EstimatorConfig.aa_classic(n, lam) for lam in lambdas)
        return cls(configs=configs, budget=_check_budget(budget))

    @classmethod
    def waak_fixed_w(cls, w, gammas, budget=None):
        arr = np.asarray(w, dtype=np.float64)
        configs = tuple(EstimatorConfig.waak(arr, g) for g in gammas)
        return cls(configs=configs, budget=_check_budget(budget))

    @classmethod
    def waak_shared_grid(cls, n, gammas, w_grid, budget=None):
        """All weights equal; axes ordered gamma outermost, then the weight."""
        if not isinstance(n, (int, np.integer)) or n < 1:
            raise ConfigError(f"dimension must be a positive integer, got {n!r}")
        configs = tuple(
            EstimatorConfig.waak(np.full(int(n), float(v)), g)
            for g in gammas
            for v in w_grid
        )
        return cls(configs=configs, budget=_check_budget(budget))

    @classmethod
    def waak_product(cls, gammas, w_axes, budget=None):
        """Full cross product over per-coordinate weight axes."""
        axes = [list(axis) for axis in w_axes]
        if not axes or any(not axis for axis in axes):
            raise ConfigError("every coordinate needs a nonempty weight axis")
        configs = tuple(
            EstimatorConfig.waak(np.array(combo, dtype=np.float64), g)
            for g in gammas
            for combo in itertools.product(*axes)
        )
        return cls(configs=configs, budget=_check_budget(budget))

    @classmethod
    def linear_sparse_grid(cls, n, indexes, value_grid, budget=None):
        """Sparse linear estimators with index 1 pinned to coefficient 1."""
        idx_list = [int(i) for i in indexes]
        if len(set(idx_list)) != len(idx_list):
            raise ConfigError("shrinkage indexes must be distinct")
        if 1 in idx_list:
            raise ConfigError("index 1 is pinned to coefficient 1 and cannot be searched")
        values = list(value_grid)
        configs = []
        for combo in itertools.product(values, repeat=len(idx_list)):
            entries = {1: 1.0}
            entries.update(dict(zip(idx_list, combo)))
            configs.append(EstimatorConfig.linear(ShrinkageSpec.sparse(n, entries)))
        return cls(configs=tuple(configs), budget=_check_budget(budget))

    @classmethod
    def mixture_weight_grid(cls, components, denominator, budget=None):
        """All positive weight vectors with entries a_i/denominator summing to 1."""
        comps = list(components)
        if not comps:
            raise ConfigError("mixture grid needs at least one component")
        m = int(denominator)
        if m < len(comps):
            raise ConfigError(
                f"denominator {m} cannot give positive weights to {len(comps)} components"
            )
        configs = []
        for split in itertools.product(range(1, m + 1), repeat=len(comps)):
            if sum(split) != m:
                continue
            weights = [a / m for a in split]
            configs.append(EstimatorConfig.mixture(tuple(zip(weights, comps))))
        return cls(configs=tuple(configs), budget=_check_budget(budget))


def _evaluate_many(configs, loss, counts, threads):
    if threads <= 1 or len(configs) <= 1:
        return [_risk(loss, cfg, counts) for cfg in configs]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(lambda cfg: _risk(loss, cfg, counts), configs))


def evaluate_space(space, loss, counts, threads=1):
    """Evaluate every candidate up to the budget, keeping declared order.

    Returns (reports, best_pos, truncated); truncated is True when the
    budget cut the enumeration short.
    """
    if not isinstance(space, SearchSpace):
        raise ConfigError("expected a SearchSpace")
    if loss not in LOSSES:
        raise ConfigError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    if not isinstance(threads, (int, np.integer)) or isinstance(threads, bool) or threads < 1:
        raise ConfigError(f"threads must be a positive integer, got {threads!r}")
    configs = space.configs
    if not configs:
        raise ConfigError("search space is empty")
    limit = len(configs) if space.budget is None else min(space.budget, len(configs))
    reports = _evaluate_many(list(configs[:limit]), loss, counts, int(threads))
    best_pos = 0
    for pos in range(1, len(reports)):
        if _is_better(reports[pos], reports[best_pos]):
            best_pos = pos
    return reports, best_pos, limit < len(configs)


def grid_search(space, loss, counts, threads=1):
    """Exhaustively evaluate a search space; returns (config, report).

    Candidates are compared by strict improvement in declared order, so
    ties keep the earliest candidate. When the budget is smaller than
    the space, the evaluated prefix is still ranked and the best result
    rides along on the budget error.
    """
    reports, best_pos, truncated = evaluate_space(space, loss, counts, threads)
    if truncated:
        raise BudgetExceededError(
            f"budget {space.budget} exhausted with {len(space.configs) - len(reports)} candidates unevaluated",
            best_config=space.configs[best_pos],
            best_report=reports[best_pos],
        )
    return space.configs[best_pos], reports[best_pos]


def coordinate_descent_w(initial_w, gamma, loss, counts, sweeps, grid, threads=1):
    """Cyclic per-coordinate grid descent on the weighted kernel weights.

    Each coordinate in turn is scanned over the grid and moved only on
    strict improvement (first-best wins), so the surrogate is monotone
    along the trajectory. Stops early when a full sweep changes nothing.
    Returns (config, report) for the final weights.
    """
    if not isinstance(sweeps, (int, np.integer)) or isinstance(sweeps, bool) or sweeps < 1:
        raise ConfigError(f"sweeps must be a positive integer, got {sweeps!r}")
    if loss not in LOSSES:
        raise ConfigError(f"unknown loss {loss!r}; expected one of {LOSSES}")
    grid_values = [float(v) for v in grid]
    if not grid_values:
        raise ConfigError("weight grid is empty")
    for v in grid_values:
        if not 0.0 <= v <= 1.0:
            raise ConfigError(f"weight grid value {v} lies outside [0, 1]")
    w = np.asarray(initial_w, dtype=np.float64).copy()
    current_cfg = EstimatorConfig.waak(w, gamma)
    current = _risk(loss, current_cfg, counts)
    for _ in range(int(sweeps)):
        moved = False
        for d in range(w.size):
            candidates = [v for v in grid_values if v != w[d]]
            if not candidates:
                continue
            cand_cfgs = []
            for v in candidates:
                w_new = w.copy()
                w_new[d] = v
                cand_cfgs.append(EstimatorConfig.waak(w_new, gamma))
            reports = _evaluate_many(cand_cfgs, loss, counts, int(threads))
            best_cfg, best_rep = None, None
            for cfg, rep in zip(cand_cfgs, reports):
                if _is_better(rep, current) and (best_rep is None or _is_better(rep, best_rep)):
                    best_cfg, best_rep = cfg, rep
            if best_rep is not None:
                w = best_cfg.shrinkage.w.copy()
                current_cfg, current = best_cfg, best_rep
                moved = True
        if not moved:
            break
    return current_cfg, current
