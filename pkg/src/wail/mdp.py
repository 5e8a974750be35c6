"""Exact machinery for discounted tabular MDPs.

Occupancy measures are solved from the Bellman flow linear system, policies
and occupancies convert back and forth (a bijection on their supports),
causal entropy and expected rewards are exact inner products, trajectories
come from the geometric-restart chain, and soft value iteration provides the
entropy-regularized RL oracle.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

# Finite stand-in for -inf logits.  exp(-35) ~ 6.3e-16 keeps every action
# probability strictly positive in float64 while being negligible mass.
LOGIT_GAP = 35.0

ROW_SUM_TOL = 1e-10
MASS_TOL = 1e-8
FLOW_TOL = 1e-8

_SAMPLE_CHUNK = 8192


def _freeze(arr):
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TabularMdp:
    """Finite MDP with transition tensor P[s, a, s'], start distribution,
    discount in (0, 1), state/action embeddings and an optional true reward
    used only for evaluation."""

    transition: np.ndarray          # (S, A, S)
    start: np.ndarray               # (S,)
    gamma: float
    state_embed: np.ndarray         # (S, d_s)
    action_embed: np.ndarray        # (A, d_a)
    true_reward: np.ndarray | None = None   # (S, A)

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=np.float64)
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ValueError(f"transition must be (S, A, S), got {P.shape}")
        S, A, _ = P.shape
        if np.any(P < 0):
            raise ValueError("transition probabilities must be non-negative")
        row_err = np.abs(P.sum(axis=2) - 1.0).max()
        if row_err > ROW_SUM_TOL:
            raise ValueError(f"transition rows must sum to 1 (max error {row_err:.3e})")
        mu0 = np.asarray(self.start, dtype=np.float64)
        if mu0.shape != (S,):
            raise ValueError(f"start must have shape ({S},), got {mu0.shape}")
        if np.any(mu0 <= 0):
            raise ValueError("start distribution must be strictly positive everywhere")
        if abs(mu0.sum() - 1.0) > ROW_SUM_TOL:
            raise ValueError("start distribution must sum to 1")
        if not (0.0 < self.gamma < 1.0):
            raise ValueError(f"gamma must lie strictly inside (0, 1), got {self.gamma}")
        se = np.asarray(self.state_embed, dtype=np.float64)
        ae = np.asarray(self.action_embed, dtype=np.float64)
        if se.ndim != 2 or se.shape[0] != S:
            raise ValueError(f"state_embed must be (S, d_s), got {se.shape}")
        if ae.ndim != 2 or ae.shape[0] != A:
            raise ValueError(f"action_embed must be (A, d_a), got {ae.shape}")
        object.__setattr__(self, "transition", _freeze(P))
        object.__setattr__(self, "start", _freeze(mu0))
        object.__setattr__(self, "state_embed", _freeze(se))
        object.__setattr__(self, "action_embed", _freeze(ae))
        if self.true_reward is not None:
            R = np.asarray(self.true_reward, dtype=np.float64)
            if R.shape != (S, A):
                raise ValueError(f"true_reward must be (S, A), got {R.shape}")
            object.__setattr__(self, "true_reward", _freeze(R))

    @property
    def n_states(self) -> int:
        return self.transition.shape[0]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[1]


@dataclass(frozen=True)
class SoftmaxPolicy:
    """Stochastic policy pi(a|s) = softmax over per-state logits."""

    logits: np.ndarray              # (S, A)
    _probs: np.ndarray = field(init=False, repr=False, compare=False)
    _log_probs: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        theta = np.asarray(self.logits, dtype=np.float64)
        if theta.ndim != 2:
            raise ValueError(f"logits must be (S, A), got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise ValueError("logits must be finite")
        z = theta - theta.max(axis=1, keepdims=True)
        e = np.exp(z)
        norm = e.sum(axis=1, keepdims=True)
        p = e / norm
        if np.any(p <= 0.0):
            raise ValueError("logit gaps too large: some action probability underflowed to 0")
        object.__setattr__(self, "logits", _freeze(theta))
        object.__setattr__(self, "_probs", _freeze(p))
        object.__setattr__(self, "_log_probs", _freeze(z - np.log(norm)))

    @property
    def probs(self) -> np.ndarray:
        return self._probs

    @property
    def log_probs(self) -> np.ndarray:
        return self._log_probs

    @property
    def n_states(self) -> int:
        return self.logits.shape[0]

    @property
    def n_actions(self) -> int:
        return self.logits.shape[1]

    @classmethod
    def uniform(cls, n_states: int, n_actions: int) -> "SoftmaxPolicy":
        return cls(np.zeros((n_states, n_actions)))

    @classmethod
    def deterministic(cls, actions, n_actions: int, gap: float = LOGIT_GAP) -> "SoftmaxPolicy":
        """Near-deterministic policy picking `actions[s]` with a finite logit gap."""
        actions = np.asarray(actions, dtype=int)
        logits = np.full((actions.size, n_actions), -gap)
        logits[np.arange(actions.size), actions] = 0.0
        return cls(logits)


@dataclass(frozen=True)
class OccupancyMeasure:
    """Normalized discounted state-action visitation rho(s, a).

    Valid instances additionally satisfy the Bellman flow equation for their
    MDP; producers in this module enforce it (see bellman_flow_residual).
    """

    rho: np.ndarray                 # (S, A)

    def __post_init__(self):
        rho = np.asarray(self.rho, dtype=np.float64)
        if rho.ndim != 2:
            raise ValueError(f"rho must be (S, A), got {rho.shape}")
        if np.any(rho < 0):
            raise ValueError("occupancy entries must be non-negative")
        if abs(rho.sum() - 1.0) > MASS_TOL:
            raise ValueError(f"occupancy mass must be 1 (got {rho.sum():.12f})")
        object.__setattr__(self, "rho", _freeze(rho))

    def state_marginal(self) -> np.ndarray:
        return self.rho.sum(axis=1)

    def flat(self) -> np.ndarray:
        return self.rho.ravel()


@dataclass(frozen=True)
class Trajectory:
    """State-action rollout; ends either by a geometric restart or by
    hitting the sampler's length cap."""

    steps: np.ndarray               # (T, 2) int
    terminated_by_restart: bool

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64)
        if steps.ndim != 2 or steps.shape[1] != 2 or steps.shape[0] == 0:
            raise ValueError("steps must be a non-empty (T, 2) array")
        if np.any(steps < 0):
            raise ValueError("state/action indices must be non-negative")
        steps.setflags(write=False)
        object.__setattr__(self, "steps", steps)

    def __len__(self) -> int:
        return self.steps.shape[0]


def transition_under_policy(mdp: TabularMdp, policy: SoftmaxPolicy) -> np.ndarray:
    """State-to-state transition matrix P_pi[s, s'] = sum_a pi(a|s) P[s, a, s']."""
    return np.einsum("sa,sap->sp", policy.probs, mdp.transition)


def occupancy_from_policy(mdp: TabularMdp, policy: SoftmaxPolicy) -> OccupancyMeasure:
    """Solve the Bellman flow system exactly and return rho(s,a) = d(s) pi(a|s).

    The state marginal d solves the linear recurrence
        d = (1-gamma) mu0 + gamma P_pi^T d
    so d = (I - gamma P_pi^T)^{-1} (1-gamma) mu0, which is nonsingular for
    gamma < 1.
    """
    if policy.n_states != mdp.n_states or policy.n_actions != mdp.n_actions:
        raise ValueError("policy shape does not match MDP")
    P_pi = transition_under_policy(mdp, policy)
    S = mdp.n_states
    d = np.linalg.solve(np.eye(S) - mdp.gamma * P_pi.T, (1.0 - mdp.gamma) * mdp.start)
    if d.min() < -1e-12:
        raise ArithmeticError(f"flow solve produced negative visitation {d.min():.3e}")
    d = np.maximum(d, 0.0)
    rho = d[:, None] * policy.probs
    rho /= rho.sum()
    resid = bellman_flow_residual(mdp, rho)
    if resid > FLOW_TOL:
        raise ArithmeticError(f"Bellman flow residual {resid:.3e} exceeds {FLOW_TOL}")
    return OccupancyMeasure(rho)


def bellman_flow_residual(mdp: TabularMdp, rho: np.ndarray | OccupancyMeasure) -> float:
    """Max-norm residual of the Bellman flow equation for a candidate measure."""
    r = rho.rho if isinstance(rho, OccupancyMeasure) else np.asarray(rho, dtype=np.float64)
    lhs = r.sum(axis=1)
    rhs = (1.0 - mdp.gamma) * mdp.start + mdp.gamma * np.einsum("sap,sa->p", mdp.transition, r)
    return float(np.abs(lhs - rhs).max())


def policy_from_occupancy(rho: OccupancyMeasure) -> SoftmaxPolicy:
    """Normalize occupancy rows into a policy; states with zero row mass get
    uniform logits (the max-entropy completion off the support)."""
    r = rho.rho
    mass = r.sum(axis=1)
    if mass.sum() <= 0.0:
        raise ValueError("cannot derive a policy from an all-zero measure")
    logits = np.zeros_like(r)
    pos = mass > 0.0
    p = r[pos] / mass[pos, None]
    floor = p.max(axis=1, keepdims=True) * math.exp(-LOGIT_GAP)
    logits[pos] = np.log(np.maximum(p, floor))
    return SoftmaxPolicy(logits)


def causal_entropy(mdp: TabularMdp, policy: SoftmaxPolicy) -> float:
    """Discounted causal entropy E_rho[-log pi(a|s)] / (1 - gamma)."""
    rho = occupancy_from_policy(mdp, policy).rho
    return float((rho * (-policy.log_probs)).sum() / (1.0 - mdp.gamma))


def expected_reward(rho: OccupancyMeasure, reward: np.ndarray) -> float:
    """Inner product <r, rho>.  The cumulative value is <r, rho>/(1-gamma)."""
    R = np.asarray(reward, dtype=np.float64)
    if R.shape != rho.rho.shape:
        raise ValueError(f"reward shape {R.shape} does not match occupancy {rho.rho.shape}")
    return float((rho.rho * R).sum())


def default_max_len(gamma: float) -> int:
    """Length cap with O(gamma^max_len) = 1e-6 truncation bias."""
    return max(1, math.ceil(math.log(1e-6) / math.log(gamma)))


def _row_categorical(prob_rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    cs = np.cumsum(prob_rows, axis=1)
    u = rng.random(prob_rows.shape[0])
    idx = (cs < u[:, None]).sum(axis=1)
    return np.minimum(idx, prob_rows.shape[1] - 1)


def sample_trajectories(mdp: TabularMdp, policy: SoftmaxPolicy, n: int,
                        max_len: int | None = None, seed: int = 0) -> list[Trajectory]:
    """Sample n trajectories of the restart chain: after each recorded (s, a)
    the chain restarts with probability 1-gamma, otherwise transitions.
    Episodes also truncate at max_len.  Deterministic given the seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_len is None:
        max_len = default_max_len(mdp.gamma)
    if max_len < 1:
        raise ValueError("max_len must be >= 1")
    rng = np.random.default_rng(seed)
    pi = policy.probs
    out: list[Trajectory] = []
    for lo in range(0, n, _SAMPLE_CHUNK):
        m = min(_SAMPLE_CHUNK, n - lo)
        states_buf = np.zeros((max_len, m), dtype=np.int64)
        actions_buf = np.zeros((max_len, m), dtype=np.int64)
        lengths = np.zeros(m, dtype=np.int64)
        restarted = np.zeros(m, dtype=bool)
        alive = np.arange(m)
        cur = _row_categorical(np.broadcast_to(mdp.start, (m, mdp.n_states)), rng)
        for t in range(max_len):
            acts = _row_categorical(pi[cur], rng)
            states_buf[t, alive] = cur
            actions_buf[t, alive] = acts
            lengths[alive] = t + 1
            stop = rng.random(alive.size) < (1.0 - mdp.gamma)
            restarted[alive[stop]] = True
            keep = ~stop
            if t + 1 == max_len or not keep.any():
                break
            cur = _row_categorical(mdp.transition[cur[keep], acts[keep]], rng)
            alive = alive[keep]
        for i in range(m):
            T = lengths[i]
            steps = np.stack([states_buf[:T, i], actions_buf[:T, i]], axis=1)
            out.append(Trajectory(steps, bool(restarted[i])))
    return out


def soft_value_iteration(mdp: TabularMdp, reward: np.ndarray, lam: float,
                         tol: float = 1e-10, max_iter: int = 10_000) -> SoftmaxPolicy:
    """Entropy-regularized RL oracle at temperature lam.

    Iterates V(s) <- lam * logsumexp((r(s,.) + gamma P V)/lam) to its fixed
    point (log-sum-exp with max subtraction) and returns pi propto
    exp(Q_soft/lam), the unique maximizer of the discounted sum of
    r - lam*log pi.
    """
    if lam <= 0:
        raise ValueError("lam must be > 0")
    if tol <= 0:
        raise ValueError("tol must be > 0")
    R = np.asarray(reward, dtype=np.float64)
    if R.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"reward must be (S, A), got {R.shape}")
    V = np.zeros(mdp.n_states)
    resid = np.inf
    for _ in range(max_iter):
        Q = R + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, V)
        m = Q.max(axis=1)
        V_new = m + lam * np.log(np.exp((Q - m[:, None]) / lam).sum(axis=1))
        resid = float(np.abs(V_new - V).max())
        V = V_new
        if resid <= tol:
            break
    else:
        raise RuntimeError(f"soft value iteration did not converge: residual {resid:.3e} > {tol}")
    Q = R + mdp.gamma * np.einsum("sap,p->sa", mdp.transition, V)
    logits = (Q - Q.max(axis=1, keepdims=True)) / lam
    return SoftmaxPolicy(np.maximum(logits, -LOGIT_GAP))


def state_action_embeddings(mdp: TabularMdp) -> np.ndarray:
    """Embedding of every state-action pair, flat index s * A + a, as
    [state_embed(s); action_embed(a)]."""
    S, A = mdp.n_states, mdp.n_actions
    se = np.repeat(mdp.state_embed, A, axis=0)
    ae = np.tile(mdp.action_embed, (S, 1))
    return np.hstack([se, ae])


# ---------------------------------------------------------------------------
# Serialization

def mdp_to_json(mdp: TabularMdp) -> dict:
    doc = {
        "n_states": mdp.n_states,
        "n_actions": mdp.n_actions,
        "transition": mdp.transition.tolist(),
        "start": mdp.start.tolist(),
        "gamma": mdp.gamma,
        "state_embed": mdp.state_embed.tolist(),
        "action_embed": mdp.action_embed.tolist(),
    }
    if mdp.true_reward is not None:
        doc["true_reward"] = mdp.true_reward.tolist()
    return doc


def mdp_from_json(doc: dict) -> TabularMdp:
    P = np.asarray(doc["transition"], dtype=np.float64)
    if P.shape[0] != doc["n_states"] or P.shape[1] != doc["n_actions"]:
        raise ValueError("n_states/n_actions disagree with transition shape")
    return TabularMdp(
        transition=P,
        start=np.asarray(doc["start"], dtype=np.float64),
        gamma=float(doc["gamma"]),
        state_embed=np.asarray(doc["state_embed"], dtype=np.float64),
        action_embed=np.asarray(doc["action_embed"], dtype=np.float64),
        true_reward=(np.asarray(doc["true_reward"], dtype=np.float64)
                     if "true_reward" in doc else None),
    )


def save_mdp(path, mdp: TabularMdp) -> None:
    with open(path, "w") as fh:
        json.dump(mdp_to_json(mdp), fh)


def load_mdp(path) -> TabularMdp:
    with open(path) as fh:
        return mdp_from_json(json.load(fh))


def save_policy(path, policy: SoftmaxPolicy) -> None:
    with open(path, "w") as fh:
        json.dump({"logits": policy.logits.tolist()}, fh)


def load_policy(path) -> SoftmaxPolicy:
    with open(path) as fh:
        return SoftmaxPolicy(np.asarray(json.load(fh)["logits"], dtype=np.float64))


def save_trajectories(path, trajectories: list[Trajectory]) -> None:
    """JSON-lines, one {"steps": [[s, a], ...], "truncated": bool} per line."""
    with open(path, "w") as fh:
        for tr in trajectories:
            fh.write(json.dumps({"steps": tr.steps.tolist(),
                                 "truncated": not tr.terminated_by_restart}) + "\n")


def load_trajectories(path) -> list[Trajectory]:
    out = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            out.append(Trajectory(np.asarray(doc["steps"], dtype=np.int64),
                                  terminated_by_restart=not doc["truncated"]))
    return out
