"""Optimal transport between discrete state-action measures.

Provides ground-metric construction from embeddings, exact 1-Wasserstein
oracles (primal transport LP and the Lipschitz-potential dual LP), and the
regularized dual objective whose ascent drives reward learning.  In the
regularized dual a single potential r plays both roles (the partner
potential is -r), so the maximizer is a reward function defined everywhere.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog
from scipy.sparse import coo_matrix
from scipy.spatial.distance import cdist

from . import rewards
from .mdp import TabularMdp, state_action_embeddings

SUPPORT_CAP = 300          # exact LP oracles reject larger supports
ENT_EXP_CLAMP = 30.0       # clamp on the entropic exponent before exp()
PAIR_SUM_TOL = 1e-10

_LP_OPTIONS = {"primal_feasibility_tolerance": 1e-10,
               "dual_feasibility_tolerance": 1e-10}

_clamp_events = 0


def entropic_clamp_events() -> int:
    """Running count of clamped entropic exponents (diagnostic)."""
    return _clamp_events


class DivergenceError(RuntimeError):
    """Raised when an ascent produces a non-finite objective."""

    def __init__(self, message: str, trace=None):
        super().__init__(message)
        self.trace = np.asarray(trace if trace is not None else [])


@dataclass(frozen=True)
class GroundMetric:
    """Pairwise ground cost between a source support (policy side) and a
    target support (expert side).

    `embed` is the embedding table of the full state-action index set;
    src_index/tgt_index select the support points, so dist[u, v] is the cost
    between full indices src_index[u] and tgt_index[v].
    """

    dist: np.ndarray            # (n_src, n_tgt)
    src_index: np.ndarray       # (n_src,) flat state-action indices
    tgt_index: np.ndarray       # (n_tgt,)
    embed: np.ndarray           # (n_points, d)

    def __post_init__(self):
        D = np.asarray(self.dist, dtype=np.float64)
        if D.ndim != 2:
            raise ValueError(f"dist must be 2-D, got {D.shape}")
        if np.any(D < 0):
            raise ValueError("ground costs must be non-negative")
        si = np.asarray(self.src_index, dtype=np.int64)
        ti = np.asarray(self.tgt_index, dtype=np.int64)
        if si.shape != (D.shape[0],) or ti.shape != (D.shape[1],):
            raise ValueError("support index shapes do not match dist")
        object.__setattr__(self, "dist", D)
        object.__setattr__(self, "src_index", si)
        object.__setattr__(self, "tgt_index", ti)
        object.__setattr__(self, "embed", np.asarray(self.embed, dtype=np.float64))

    @property
    def n_src(self) -> int:
        return self.dist.shape[0]

    @property
    def n_tgt(self) -> int:
        return self.dist.shape[1]

    @property
    def src_embed(self) -> np.ndarray:
        return self.embed[self.src_index]

    @property
    def tgt_embed(self) -> np.ndarray:
        return self.embed[self.tgt_index]

    @classmethod
    def from_embeddings(cls, embed: np.ndarray, scale: float = 1.0,
                        src_index=None, tgt_index=None) -> "GroundMetric":
        embed = np.asarray(embed, dtype=np.float64)
        si = np.arange(embed.shape[0]) if src_index is None else np.asarray(src_index, dtype=np.int64)
        ti = np.arange(embed.shape[0]) if tgt_index is None else np.asarray(tgt_index, dtype=np.int64)
        D = scale * cdist(embed[si], embed[ti])
        return cls(D, si, ti, embed)

    def restrict(self, src_sel, tgt_sel) -> "GroundMetric":
        """Sub-metric over positional selections of the current supports
        (duplicates allowed, for with-replacement batches)."""
        src_sel = np.asarray(src_sel, dtype=np.int64)
        tgt_sel = np.asarray(tgt_sel, dtype=np.int64)
        return GroundMetric(self.dist[np.ix_(src_sel, tgt_sel)],
                            self.src_index[src_sel], self.tgt_index[tgt_sel],
                            self.embed)

    def require_metric(self, tol: float = 1e-9) -> None:
        """Validate shared support, symmetry, zero diagonal and the triangle
        inequality (needed for the single-potential dual)."""
        if self.n_src != self.n_tgt or not np.array_equal(self.src_index, self.tgt_index):
            raise ValueError("dual LP needs one common support on both sides")
        D = self.dist
        if np.abs(np.diag(D)).max() > tol:
            raise ValueError("ground cost has a nonzero diagonal")
        if np.abs(D - D.T).max() > tol:
            raise ValueError("ground cost is not symmetric")
        for k in range(D.shape[0]):
            if (D - (D[:, k:k + 1] + D[k:k + 1, :])).max() > tol:
                raise ValueError("ground cost violates the triangle inequality")


def build_ground_metric(mdp: TabularMdp, scale: float = 1.0, support=None) -> GroundMetric:
    """Scaled Euclidean distances between state-action embeddings, over the
    full S x A index set or a given support subset (both sides)."""
    if scale <= 0:
        raise ValueError("scale must be > 0")
    embed = state_action_embeddings(mdp)
    return GroundMetric.from_embeddings(embed, scale, support, support)


@dataclass(frozen=True)
class DualRegularization:
    """Penalty replacing the hard dual constraint: entropic (exponential) or
    l2 (quadratic hinge), with strength controlled by epsilon."""

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in ("entropic", "l2"):
            raise ValueError(f"kind must be 'entropic' or 'l2', got {self.kind!r}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be strictly positive")


@dataclass(frozen=True)
class DiscreteMeasurePair:
    """Weights of the policy-side (source) and expert-side (target) measures
    over their respective supports."""

    source: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        for name in ("source", "target"):
            w = np.asarray(getattr(self, name), dtype=np.float64)
            if w.ndim != 1:
                raise ValueError(f"{name} weights must be a vector")
            if np.any(w < 0):
                raise ValueError(f"{name} weights must be non-negative")
            if abs(w.sum() - 1.0) > PAIR_SUM_TOL:
                raise ValueError(f"{name} weights must sum to 1 (got {w.sum():.12f})")
            object.__setattr__(self, name, w)


def _check_sizes(pair: DiscreteMeasurePair, metric: GroundMetric) -> None:
    if pair.source.size != metric.n_src or pair.target.size != metric.n_tgt:
        raise ValueError(f"measure supports ({pair.source.size}, {pair.target.size}) "
                         f"do not match metric ({metric.n_src}, {metric.n_tgt})")


def w1_primal_lp(pair: DiscreteMeasurePair, metric: GroundMetric):
    """Exact transport LP: min <plan, d> with plan marginals equal to the
    source/target weights.  Returns (value, plan)."""
    _check_sizes(pair, metric)
    n, m = metric.n_src, metric.n_tgt
    if n > SUPPORT_CAP or m > SUPPORT_CAP:
        raise ValueError(f"support too large for exact oracle ({n}x{m} > {SUPPORT_CAP}); subsample first")
    rows = np.concatenate([np.repeat(np.arange(n), m), n + np.tile(np.arange(m), n)])
    cols = np.concatenate([np.arange(n * m), np.arange(n * m)])
    A_eq = coo_matrix((np.ones(2 * n * m), (rows, cols)), shape=(n + m, n * m)).tocsr()
    b_eq = np.concatenate([pair.source, pair.target])
    res = linprog(metric.dist.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None),
                  method="highs", options=_LP_OPTIONS)
    if not res.success:
        raise RuntimeError(f"transport LP failed: {res.message}")
    plan = res.x.reshape(n, m)
    marg_err = max(np.abs(plan.sum(axis=1) - pair.source).max(),
                   np.abs(plan.sum(axis=0) - pair.target).max())
    if marg_err > 1e-8:
        raise ArithmeticError(f"transport plan marginal error {marg_err:.3e}")
    return float(res.fun), plan


def w1_dual_lp(pair: DiscreteMeasurePair, metric: GroundMetric):
    """Exact dual LP with one Lipschitz potential: maximize
    <f, target> - <f, source> subject to f(i) - f(j) <= d(i, j).

    Requires a genuine metric on a shared support.  The solver's potential is
    tightened by one pass of f(i) <- min_j f(j) + d(j, i), which is feasible
    by the triangle inequality; the reported value comes from the tightened
    potential, so weak duality bounds it by the primal value.
    """
    _check_sizes(pair, metric)
    n = metric.n_src
    if n > SUPPORT_CAP:
        raise ValueError(f"support too large for exact oracle ({n} > {SUPPORT_CAP}); subsample first")
    metric.require_metric()
    D = metric.dist
    ii, jj = np.nonzero(~np.eye(n, dtype=bool))
    k = ii.size
    r = np.arange(k)
    A_ub = coo_matrix((np.concatenate([np.ones(k), -np.ones(k)]),
                       (np.concatenate([r, r]), np.concatenate([ii, jj]))),
                      shape=(k, n)).tocsr()
    bounds = [(0.0, 0.0)] + [(None, None)] * (n - 1)   # pin the gauge
    res = linprog(pair.source - pair.target, A_ub=A_ub, b_ub=D[ii, jj],
                  bounds=bounds, method="highs", options=_LP_OPTIONS)
    if not res.success:
        raise RuntimeError(f"dual LP failed: {res.message}")
    f = (res.x[:, None] + D).min(axis=0)
    value = float(f @ (pair.target - pair.source))
    return value, f


def _penalty(z: np.ndarray, reg: DualRegularization, want_slope: bool):
    """Penalty Omega(z) on constraint slack z = r(y) - r(x) - d(x, y), and
    optionally its derivative.  The entropic slope keeps the (clipped)
    exponential so ascent is pulled back even past the overflow clamp."""
    global _clamp_events
    if reg.kind == "entropic":
        u = z / reg.epsilon
        over = u > ENT_EXP_CLAMP
        if over.any():
            _clamp_events += int(over.sum())
        w = np.exp(np.minimum(u, ENT_EXP_CLAMP))
        omega = -reg.epsilon * w
        slope = -w if want_slope else None
    else:
        zp = np.maximum(z, 0.0)
        omega = -(zp ** 2) / (4.0 * reg.epsilon)
        slope = -zp / (2.0 * reg.epsilon) if want_slope else None
    return omega, slope


def _objective_and_gradient(r_src, r_tgt, pair, metric, reg, want_grad):
    r_src = np.asarray(r_src, dtype=np.float64)
    r_tgt = np.asarray(r_tgt, dtype=np.float64)
    _check_sizes(pair, metric)
    if r_src.shape != pair.source.shape or r_tgt.shape != pair.target.shape:
        raise ValueError("potential value vectors must match support sizes")
    z = r_tgt[None, :] - r_src[:, None] - metric.dist
    omega, slope = _penalty(z, reg, want_grad)
    value = float(r_tgt @ pair.target - r_src @ pair.source
                  + pair.source @ omega @ pair.target)
    if not want_grad:
        return value, None, None
    g_src = pair.source * (-1.0 - slope @ pair.target)
    g_tgt = pair.target * (1.0 + pair.source @ slope)
    return value, g_src, g_tgt


def reg_dual_objective(r_src, r_tgt, pair: DiscreteMeasurePair,
                       metric: GroundMetric, reg: DualRegularization) -> float:
    """<r, target> - <r, source> plus the product-measure expectation of the
    penalty on constraint violations r(y) - r(x) > d(x, y)."""
    value, _, _ = _objective_and_gradient(r_src, r_tgt, pair, metric, reg, False)
    return value


def reg_dual_gradient(r_src, r_tgt, pair: DiscreteMeasurePair,
                      metric: GroundMetric, reg: DualRegularization):
    """Analytic gradient of reg_dual_objective with respect to the potential
    values on the source and target supports."""
    _, g_src, g_tgt = _objective_and_gradient(r_src, r_tgt, pair, metric, reg, True)
    return g_src, g_tgt


def reg_ot_fit(pair: DiscreteMeasurePair, metric: GroundMetric, reg: DualRegularization,
               model: rewards.PotentialModel, steps: int, lr: float,
               batch: int | None = None, seed: int = 0):
    """Stochastic ascent of the regularized dual through the reward model's
    parameters.

    With batch=None every step uses the full supports with their exact
    weights; otherwise each step draws `batch` points per side with
    replacement (uniform weights within the batch).  Returns the trained
    copy and the per-step objective trace (value at each step's start).
    """
    if steps < 0:
        raise ValueError("steps must be >= 0")
    if lr <= 0:
        raise ValueError("lr must be > 0")
    _check_sizes(pair, metric)
    work = model.copy()
    rng = np.random.default_rng(seed)
    trace = []
    for k in range(steps):
        if batch is None:
            sub, w_src, w_tgt = metric, pair.source, pair.target
        else:
            sel_s = rng.choice(metric.n_src, size=batch, p=pair.source)
            sel_t = rng.choice(metric.n_tgt, size=batch, p=pair.target)
            sub = metric.restrict(sel_s, sel_t)
            w_src = np.full(batch, 1.0 / batch)
            w_tgt = np.full(batch, 1.0 / batch)
        sub_pair = DiscreteMeasurePair(w_src, w_tgt)
        r_src = rewards.support_values(work, sub.src_index, sub.src_embed)
        r_tgt = rewards.support_values(work, sub.tgt_index, sub.tgt_embed)
        value, g_src, g_tgt = _objective_and_gradient(r_src, r_tgt, sub_pair, sub, reg, True)
        if not np.isfinite(value):
            raise DivergenceError(f"regularized dual objective diverged at step {k}", trace)
        trace.append(value)
        grad = (rewards.accumulate_param_grad(work, sub.src_index, sub.src_embed, g_src)
                + rewards.accumulate_param_grad(work, sub.tgt_index, sub.tgt_embed, g_tgt))
        work.params = work.params + lr * grad
    return work, np.asarray(trace)
