"""Desk-scale group-relative policy optimization over an enumerable environment.

The environment is small by construction (a few parameterized right-triangle
tasks, template slots for premise / construction / answer) so that every
information-theoretic quantity — expected reward, KL to the reference, and
the conditional mutual information I(V; Y | T, X) — is computed exactly by
enumeration rather than estimated.

The causal structure mirrors the verification stack it exercises: the answer
slot is conditioned on the premise and construction choices only, never on
the problem parameters, so the drawn state is the only channel through which
problem identity can reach the answer.  Rewards come from the real
``verify_trace`` pipeline on rendered constructions.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field, replace

import numpy as np

from . import judges as judges_mod
from .ggb import Assertion
from .metrics import COMMAND_VOCAB
from .reward import RewardConfig, verify_trace
from .traces import ProblemInstance, classify_answer, parse_trace

ADV_EPS = 1e-8
ENUMERATION_BOUND = 100_000


class IntractableSpace(Exception):
    """Trajectory enumeration bound exceeded."""


class NonFiniteLoss(ArithmeticError):
    pass


@dataclass(frozen=True)
class ToyProblem:
    index: int
    leg_x: float
    leg_y: float

    @property
    def answer(self) -> float:
        return math.hypot(self.leg_x, self.leg_y)


@dataclass(frozen=True)
class VOption:
    key: str
    kind: str  # correct | decorative | noop
    problem_index: int | None
    code: str
    token: str  # representative vocabulary token


PREMISES = (
    "We consider the problem carefully.",
    "We therefore set up the configuration.",
    "We thus analyze the given data.",
)
PREMISE_TOKENS = ("consider", "therefore", "thus")

_TRI_CODE = """A=(0,0)
B=({bx},0)
C=(0,{cy})
t=Polygon(A,B,C)
u=Segment(A,B)
v=Segment(A,C)
h=Segment(B,C)"""

_TRI_CODE_ALT = """A=(0,0)
C=(0,{cy})
B=({bx},0)
u=Segment(A,B)
v=Segment(A,C)
h=Segment(B,C)
t=Polygon(A,B,C)"""

_DECOR_CODE = """P=(0,0)
Q=(1,0)
R=(1,1)
S=(0,1)
d=Polygon(P,Q,R,S)"""


class ToyEnv:
    """Enumerable interleaved-reasoning environment wired to the real reward."""

    def __init__(
        self,
        legs: tuple[tuple[float, float], ...] = ((3.0, 4.0), (6.0, 8.0), (5.0, 12.0), (9.0, 12.0)),
        distractors: tuple[float, ...] = (7.0, 25.0),
        answer_only: bool = False,
        reward_config: RewardConfig | None = None,
    ):
        self.problems = tuple(ToyProblem(i, bx, cy) for i, (bx, cy) in enumerate(legs))
        self.answer_only = answer_only
        self.reward_config = reward_config or RewardConfig(render_px=64)
        self.backends = judges_mod.JudgeBackendConfig(mode="heuristic")
        if answer_only:
            self.v_options: tuple[VOption, ...] = (
                VOption("noop", "noop", None, "", "noop"),
            )
        else:
            opts: list[VOption] = []
            for p in self.problems:
                fmt = dict(bx=_fmt(p.leg_x), cy=_fmt(p.leg_y))
                opts.append(VOption(f"tri{p.index}a", "correct", p.index,
                                    _TRI_CODE.format(**fmt), "Polygon"))
                opts.append(VOption(f"tri{p.index}b", "correct", p.index,
                                    _TRI_CODE_ALT.format(**fmt), "Segment"))
            opts.append(VOption("decor", "decorative", None, _DECOR_CODE, "Polygon"))
            self.v_options = tuple(opts)
        answers = [p.answer for p in self.problems] + list(distractors)
        self.y_options = tuple(_fmt(a) for a in dict.fromkeys(answers))
        self.n_t = len(PREMISES)
        self.n_v = len(self.v_options)
        self.n_y = len(self.y_options)
        self._reward_cache: dict[tuple[int, int, int], float] = {}

    # -- trajectory realization ------------------------------------------------

    def problem_instance(self, x: int) -> ProblemInstance:
        p = self.problems[x]
        constraints = [
            Assertion("EqualsWithin", ("dist(A,B)", _fmt(p.leg_x), "1e-6"), is_key=True),
            Assertion("EqualsWithin", ("dist(A,C)", _fmt(p.leg_y), "1e-6"), is_key=True),
            Assertion("ArePerpendicular", ("u", "v")),
        ]
        return ProblemInstance(
            id=f"toy{x}",
            statement=(f"A right triangle has legs {_fmt(p.leg_x)} and {_fmt(p.leg_y)}. "
                       "Find the hypotenuse."),
            reference_answer=classify_answer(_fmt(p.answer)),
            category="plane_geometry",
            hard_constraints=constraints if not self.answer_only else [],
        )

    def trace_source(self, t: int, v: int, y: int) -> str:
        text = PREMISES[t] + " We draw the right triangle ABC."
        option = self.v_options[v]
        answer_line = f"Therefore the answer is \\boxed{{{self.y_options[y]}}}."
        if option.kind == "noop":
            return f"{text}\n{answer_line}"
        return f"{text}\n```geogebra\n{option.code}\n```\n{answer_line}"

    def trajectory_reward(self, x: int, t: int, v: int, y: int) -> float:
        # premise wording never changes the verdicts, so cache on (x, v, y)
        key = (x, v, y)
        if key not in self._reward_cache:
            trace = parse_trace(self.trace_source(0, v, y))
            breakdown = verify_trace(trace, self.problem_instance(x),
                                     self.reward_config, self.backends)
            self._reward_cache[key] = breakdown.total
        return self._reward_cache[key]

    def reward_table(self) -> np.ndarray:
        """Exact rewards for every (x, v, y); used for exact expectations."""
        table = np.zeros((len(self.problems), self.n_v, self.n_y))
        for x in range(len(self.problems)):
            for v in range(self.n_v):
                for y in range(self.n_y):
                    table[x, v, y] = self.trajectory_reward(x, 0, v, y)
        return table

    def trajectory_count(self) -> int:
        return len(self.problems) * self.n_t * self.n_v * self.n_y


def _fmt(value: float) -> str:
    return f"{value:g}"


@dataclass
class ToyPolicy:
    """Per-slot categorical logits; the answer slot cannot see the problem."""

    logits_t: np.ndarray  # [P, NT]
    logits_v: np.ndarray  # [P, NT, NV]
    logits_y: np.ndarray  # [NT, NV, NY]
    ref: "ToyPolicy | None" = None

    @staticmethod
    def uniform(env: ToyEnv) -> "ToyPolicy":
        P = len(env.problems)
        return ToyPolicy(
            logits_t=np.zeros((P, env.n_t)),
            logits_v=np.zeros((P, env.n_t, env.n_v)),
            logits_y=np.zeros((env.n_t, env.n_v, env.n_y)),
        )

    def copy(self, keep_ref: bool = True) -> "ToyPolicy":
        return ToyPolicy(
            logits_t=self.logits_t.copy(),
            logits_v=self.logits_v.copy(),
            logits_y=self.logits_y.copy(),
            ref=self.ref if keep_ref else None,
        )

    def snapshot_reference(self) -> None:
        self.ref = self.copy(keep_ref=False)

    # -- distributions ---------------------------------------------------------

    def p_t(self, x: int, temperature: float = 1.0) -> np.ndarray:
        return _softmax(self.logits_t[x], temperature)

    def p_v(self, x: int, t: int, temperature: float = 1.0) -> np.ndarray:
        return _softmax(self.logits_v[x, t], temperature)

    def p_y(self, t: int, v: int, temperature: float = 1.0) -> np.ndarray:
        return _softmax(self.logits_y[t, v], temperature)

    def logprob(self, x: int, traj: tuple[int, int, int], temperature: float = 1.0) -> float:
        t, v, y = traj
        return float(
            np.log(self.p_t(x, temperature)[t])
            + np.log(self.p_v(x, t, temperature)[v])
            + np.log(self.p_y(t, v, temperature)[y])
        )


def _softmax(logits: np.ndarray, temperature: float = 1.0) -> np.ndarray:
    z = logits / temperature
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def _tables(policy: "ToyPolicy") -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Untempered softmax tables (P_t[x,t], P_v[x,t,v], P_y[t,v,y])."""
    return (_softmax(policy.logits_t), _softmax(policy.logits_v),
            _softmax(policy.logits_y))


def _joint_table(policy: "ToyPolicy") -> np.ndarray:
    """pi(t, v, y | x) as a [P, NT, NV, NY] tensor."""
    pt, pv, py = _tables(policy)
    return np.einsum("xt,xtv,tvy->xtvy", pt, pv, py)


@dataclass
class GroupBatch:
    problem_index: int
    trajectories: list[tuple[int, int, int]]
    rewards: np.ndarray
    logp_old: np.ndarray
    advantages: np.ndarray
    temperature: float

    @property
    def size(self) -> int:
        return len(self.trajectories)


def sample_group(
    env: ToyEnv,
    policy: ToyPolicy,
    problem_index: int,
    G: int = 7,
    temperature: float = 0.9,
    rng: np.random.Generator | None = None,
) -> GroupBatch:
    """Sample G trajectories for one problem and score them with the real reward."""
    if G < 2:
        raise ValueError("group size must be >= 2")
    rng = rng or np.random.default_rng()
    trajectories: list[tuple[int, int, int]] = []
    rewards = np.zeros(G)
    logp = np.zeros(G)
    for i in range(G):
        t = int(rng.choice(env.n_t, p=policy.p_t(problem_index, temperature)))
        v = int(rng.choice(env.n_v, p=policy.p_v(problem_index, t, temperature)))
        y = int(rng.choice(env.n_y, p=policy.p_y(t, v, temperature)))
        trajectories.append((t, v, y))
        rewards[i] = env.trajectory_reward(problem_index, t, v, y)
        logp[i] = policy.logprob(problem_index, (t, v, y), temperature)
    return GroupBatch(
        problem_index=problem_index,
        trajectories=trajectories,
        rewards=rewards,
        logp_old=logp,
        advantages=compute_advantages(list(rewards)),
        temperature=temperature,
    )


def compute_advantages(rewards: list[float]) -> np.ndarray:
    """Group-normalized advantages: (r - mean) / (std + eps)."""
    if len(rewards) < 2:
        raise ValueError("need at least two rewards to normalize a group")
    r = np.asarray(rewards, dtype=float)
    return (r - r.mean()) / (r.std() + ADV_EPS)


@dataclass
class _Grads:
    t: np.ndarray
    v: np.ndarray
    y: np.ndarray

    @staticmethod
    def zeros_like(policy: ToyPolicy) -> "_Grads":
        return _Grads(np.zeros_like(policy.logits_t),
                      np.zeros_like(policy.logits_v),
                      np.zeros_like(policy.logits_y))


def _accumulate_logprob_grad(
    grads: _Grads, policy: ToyPolicy, x: int, traj: tuple[int, int, int],
    scale: float, temperature: float = 1.0,
) -> None:
    """grad += scale * d log pi(traj | x) / d logits  (tempered softmax)."""
    t, v, y = traj
    pt = policy.p_t(x, temperature)
    pv = policy.p_v(x, t, temperature)
    py = policy.p_y(t, v, temperature)
    gt = -pt.copy()
    gt[t] += 1.0
    gv = -pv.copy()
    gv[v] += 1.0
    gy = -py.copy()
    gy[y] += 1.0
    grads.t[x] += scale * gt / temperature
    grads.v[x, t] += scale * gv / temperature
    grads.y[t, v] += scale * gy / temperature


def grpo_loss(policy: ToyPolicy, batch: GroupBatch, beta_kl: float,
              clip: float, env: ToyEnv) -> float:
    """Scalar loss: negative clipped surrogate plus exact KL penalty."""
    surrogate = 0.0
    for i, traj in enumerate(batch.trajectories):
        lp = policy.logprob(batch.problem_index, traj, batch.temperature)
        ratio = math.exp(lp - batch.logp_old[i])
        a = batch.advantages[i]
        clipped = min(max(ratio, 1.0 - clip), 1.0 + clip) if clip > 0 else ratio
        surrogate += min(ratio * a, clipped * a)
    surrogate /= batch.size
    kl = exact_kl(policy, policy.ref, env) if policy.ref is not None else 0.0
    loss = -surrogate + beta_kl * kl
    if not math.isfinite(loss):
        raise NonFiniteLoss(str(loss))
    return loss


def grpo_step(
    policy: ToyPolicy,
    batch: GroupBatch,
    env: ToyEnv,
    beta_kl: float = 0.05,
    clip: float = 0.2,
    lr: float = 0.5,
) -> float:
    """One analytic ascent step on the clipped surrogate with KL-to-reference.

    Returns the pre-update loss.  Gradients are exact: the surrogate term
    differentiates the importance ratio for unclipped members of the group,
    and the KL term is enumerated over the full trajectory space.
    """
    loss = grpo_loss(policy, batch, beta_kl, clip, env)
    grads = _Grads.zeros_like(policy)
    x = batch.problem_index
    for i, traj in enumerate(batch.trajectories):
        lp = policy.logprob(x, traj, batch.temperature)
        ratio = math.exp(lp - batch.logp_old[i])
        a = batch.advantages[i]
        clipped = min(max(ratio, 1.0 - clip), 1.0 + clip) if clip > 0 else ratio
        if ratio * a <= clipped * a:  # unclipped branch active in the min
            _accumulate_logprob_grad(grads, policy, x, traj,
                                     scale=-(a * ratio) / batch.size,
                                     temperature=batch.temperature)
    if policy.ref is not None and beta_kl > 0.0:
        _accumulate_kl_grad(grads, policy, policy.ref, env, beta_kl)
    policy.logits_t -= lr * grads.t
    policy.logits_v -= lr * grads.v
    policy.logits_y -= lr * grads.y
    return loss


def exact_kl(policy: ToyPolicy, ref: ToyPolicy, env: ToyEnv) -> float:
    """KL(pi || ref) over trajectory distributions, enumerated exactly (nats)."""
    px = 1.0 / len(env.problems)
    joint = _joint_table(policy)
    ref_joint = _joint_table(ref)
    log_ratio = np.log(np.maximum(joint, 1e-300)) - np.log(np.maximum(ref_joint, 1e-300))
    return float(px * np.sum(joint * log_ratio))


def _accumulate_kl_grad(grads: _Grads, policy: ToyPolicy, ref: ToyPolicy,
                        env: ToyEnv, beta_kl: float) -> None:
    """d KL / d theta = E_pi[ grad log pi * (log pi - log ref) ], vectorized.

    For each softmax row the expectation contributes W - p * sum(W), where W
    marginalizes the weight tensor over the slots the row does not govern.
    """
    px = 1.0 / len(env.problems)
    pt, pv, py = _tables(policy)
    joint = _joint_table(policy)
    ref_joint = _joint_table(ref)
    w = px * joint * (np.log(np.maximum(joint, 1e-300))
                      - np.log(np.maximum(ref_joint, 1e-300)))
    w_t = w.sum(axis=(2, 3))  # [P, NT]
    w_v = w.sum(axis=3)       # [P, NT, NV]
    w_y = w.sum(axis=0)       # [NT, NV, NY]
    grads.t += beta_kl * (w_t - pt * w_t.sum(axis=1, keepdims=True))
    grads.v += beta_kl * (w_v - pv * w_v.sum(axis=2, keepdims=True))
    grads.y += beta_kl * (w_y - py * w_y.sum(axis=2, keepdims=True))


def mle_step(policy: ToyPolicy, corpus: list[tuple[int, tuple[int, int, int]]],
             lr: float = 0.5) -> float:
    """One maximum-likelihood step on expert trajectories; returns the NLL."""
    if not corpus:
        return 0.0
    xs = np.array([x for x, _ in corpus])
    ts = np.array([t for _, (t, _, _) in corpus])
    vs = np.array([v for _, (_, v, _) in corpus])
    ys = np.array([y for _, (_, _, y) in corpus])
    pt, pv, py = _tables(policy)
    n = len(corpus)
    nll = -float(
        np.sum(np.log(pt[xs, ts])) + np.sum(np.log(pv[xs, ts, vs]))
        + np.sum(np.log(py[ts, vs, ys]))
    ) / n
    if lr == 0.0:
        return nll
    counts_t = np.zeros_like(pt)
    counts_v = np.zeros_like(pv)
    counts_y = np.zeros_like(py)
    np.add.at(counts_t, (xs, ts), 1.0)
    np.add.at(counts_v, (xs, ts, vs), 1.0)
    np.add.at(counts_y, (ts, vs, ys), 1.0)
    # grad of mean NLL: (p * context_count - count) / n per softmax row
    policy.logits_t -= lr * (pt * counts_t.sum(axis=1, keepdims=True) - counts_t) / n
    policy.logits_v -= lr * (pv * counts_v.sum(axis=2, keepdims=True) - counts_v) / n
    policy.logits_y -= lr * (py * counts_y.sum(axis=2, keepdims=True) - counts_y) / n
    return nll


def expected_reward(env: ToyEnv, policy: ToyPolicy) -> float:
    """Exact E[R] under the untempered policy, by full enumeration."""
    table = env.reward_table()  # [P, NV, NY]
    joint = _joint_table(policy)  # [P, NT, NV, NY]
    px = 1.0 / len(env.problems)
    return float(px * np.einsum("xtvy,xvy->", joint, table))


def conditional_mi(policy: ToyPolicy, env: ToyEnv) -> float:
    """Exact I(V; Y | T, X) in bits under the policy's joint distribution."""
    if env.trajectory_count() > ENUMERATION_BOUND:
        raise IntractableSpace(f"{env.trajectory_count()} > {ENUMERATION_BOUND}")
    px = 1.0 / len(env.problems)
    pt, pv, py = _tables(policy)
    total = 0.0
    for x in range(len(env.problems)):
        for t in range(env.n_t):
            weight = px * pt[x, t]
            p_vy = pv[x, t][:, None] * py[t]  # [NV, NY]
            p_y = p_vy.sum(axis=0)
            ratio = np.log2(np.maximum(py[t], 1e-300)) - np.log2(np.maximum(p_y, 1e-300))
            total += weight * float(np.sum(p_vy * ratio))
    return max(total, 0.0)


# -- expert corpus and diagnostics ---------------------------------------------


def make_expert_corpus(
    env: ToyEnv,
    n: int = 1200,
    rng: np.random.Generator | None = None,
    p_decorative: float = 0.25,
) -> list[tuple[int, tuple[int, int, int]]]:
    """Expert data exhibiting distributional-but-not-functional alignment.

    Answers are always correct for the problem, and every diagram is a
    plausible construction, but which diagram accompanies which problem is
    independent of the problem.  A likelihood-matching learner therefore ends
    up with an answer slot that is conditionally independent of the
    construction slot; only reward feedback can couple them."""
    if env.answer_only:
        raise ValueError("expert corpus requires the interleaved environment")
    rng = rng or np.random.default_rng(0)
    correct = [i for i, o in enumerate(env.v_options) if o.kind == "correct"]
    decor = [i for i, o in enumerate(env.v_options) if o.kind == "decorative"]
    corpus = []
    for _ in range(n):
        x = int(rng.integers(len(env.problems)))
        t = int(rng.integers(env.n_t))
        if rng.random() < p_decorative:
            v = int(rng.choice(decor))
        else:
            v = int(rng.choice(correct))  # plausible but problem-independent
        y = env.y_options.index(_fmt(env.problems[x].answer))
        corpus.append((x, (t, v, y)))
    return corpus


_NUMERIC_TOKEN = re.compile(r"^-?\d+(\.\d+)?$")
_REASONING_WORDS = frozenset(
    "therefore thus hence consider because apply compute since so suppose "
    "assume conclude let we".split()
)


def default_categorizer(token: str) -> str:
    """Token category for the entropy diagnostics."""
    if token in COMMAND_VOCAB:
        return "drawing"
    if _NUMERIC_TOKEN.match(token):
        return "numeric"
    if token.lower() in _REASONING_WORDS:
        return "reasoning_chain"
    if re.fullmatch(r"[=(),;^+*/\[\]{}-]+", token) or token in ("noop",):
        return "code"
    return "other"


def _slot_contexts(policy: ToyPolicy, env: ToyEnv):
    """Yield (weight, distribution, option tokens) for every reachable slot."""
    px = 1.0 / len(env.problems)
    for x in range(len(env.problems)):
        pt = policy.p_t(x)
        yield px, pt, PREMISE_TOKENS
        for t in range(env.n_t):
            pv = policy.p_v(x, t)
            yield px * pt[t], pv, tuple(o.token for o in env.v_options)
            for v in range(env.n_v):
                yield (px * pt[t] * pv[v], policy.p_y(t, v), env.y_options)


def entropy_by_category(policy: ToyPolicy, env: ToyEnv,
                        categorizer=default_categorizer) -> dict[str, float]:
    """Visitation-weighted mean slot entropy (bits), attributed to the token
    categories present in each slot proportionally to their probability mass."""
    acc: dict[str, float] = {}
    norm: dict[str, float] = {}
    for weight, dist, tokens in _slot_contexts(policy, env):
        h = float(-np.sum(dist[dist > 0] * np.log2(dist[dist > 0])))
        share: dict[str, float] = {}
        for p, tok in zip(dist, tokens):
            cat = categorizer(tok)
            share[cat] = share.get(cat, 0.0) + float(p)
        for cat, s in share.items():
            acc[cat] = acc.get(cat, 0.0) + weight * s * h
            norm[cat] = norm.get(cat, 0.0) + weight * s
    return {cat: (acc[cat] / norm[cat] if norm[cat] > 0 else 0.0) for cat in acc}


def token_entropy_contributions(policy: ToyPolicy, env: ToyEnv) -> dict[str, float]:
    """Per-token -p*log2(p) contribution, visitation-weighted over slots."""
    contrib: dict[str, float] = {}
    for weight, dist, tokens in _slot_contexts(policy, env):
        for p, tok in zip(dist, tokens):
            if p > 0:
                contrib[tok] = contrib.get(tok, 0.0) + weight * float(-p * math.log2(p))
    return contrib


def top_entropy_shift(
    before: ToyPolicy, after: ToyPolicy, env: ToyEnv, k: int = 100,
    categorizer=default_categorizer,
) -> dict[str, float]:
    """Category shares among the top-k tokens whose entropy increased most."""
    b = token_entropy_contributions(before, env)
    a = token_entropy_contributions(after, env)
    deltas = sorted(
        ((a.get(tok, 0.0) - b.get(tok, 0.0), tok) for tok in set(a) | set(b)),
        reverse=True,
    )[:k]
    counts: dict[str, int] = {}
    for _, tok in deltas:
        cat = categorizer(tok)
        counts[cat] = counts.get(cat, 0) + 1
    total = sum(counts.values())
    return {cat: c / total for cat, c in counts.items()}


# -- training loops and the fixture experiment ----------------------------------


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    grpo_steps: int = 320
    mle_steps: int = 300
    corpus_size: int = 2400
    group_size: int = 7
    temperature: float = 0.9
    beta_kl: float = 0.05
    clip: float = 0.2
    grpo_lr: float = 0.9
    mle_lr: float = 0.8


def mle_train(env: ToyEnv, config: RunConfig,
              metrics_sink: list[dict] | None = None) -> ToyPolicy:
    rng = np.random.default_rng(config.seed)
    corpus = make_expert_corpus(env, n=config.corpus_size, rng=rng)
    policy = ToyPolicy.uniform(env)
    for step in range(config.mle_steps):
        nll = mle_step(policy, corpus, lr=config.mle_lr)
        if metrics_sink is not None and step % 25 == 0:
            metrics_sink.append({"phase": "mle", "step": step, "nll": nll})
    return policy


def grpo_train(env: ToyEnv, init: ToyPolicy, config: RunConfig,
               metrics_sink: list[dict] | None = None) -> ToyPolicy:
    rng = np.random.default_rng(config.seed + 1000)
    policy = init.copy(keep_ref=False)
    policy.snapshot_reference()
    for step in range(config.grpo_steps):
        x = step % len(env.problems)
        batch = sample_group(env, policy, x, G=config.group_size,
                             temperature=config.temperature, rng=rng)
        loss = grpo_step(policy, batch, env, beta_kl=config.beta_kl,
                         clip=config.clip, lr=config.grpo_lr)
        if metrics_sink is not None and step % 20 == 0:
            metrics_sink.append({
                "phase": "grpo",
                "step": step,
                "loss": loss,
                "expected_reward": expected_reward(env, policy),
                "kl": exact_kl(policy, policy.ref, env),
                "mi": conditional_mi(policy, env),
            })
    return policy


@dataclass
class ExperimentResult:
    seed: int
    reward_mle: float
    reward_grpo: float
    reward_grpo_answer_only: float
    mi_mle: float
    mi_grpo: float
    entropy_mle: dict[str, float]
    entropy_grpo: dict[str, float]
    entropy_shift: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "reward_mle": self.reward_mle,
            "reward_grpo": self.reward_grpo,
            "reward_grpo_answer_only": self.reward_grpo_answer_only,
            "mi_mle": self.mi_mle,
            "mi_grpo": self.mi_grpo,
            "entropy_mle": self.entropy_mle,
            "entropy_grpo": self.entropy_grpo,
            "entropy_shift": self.entropy_shift,
        }


def run_fixture_experiment(
    seed: int = 0,
    config: RunConfig | None = None,
    env: ToyEnv | None = None,
    answer_only_env: ToyEnv | None = None,
    metrics_path: str | None = None,
) -> ExperimentResult:
    """Train MLE and GRPO policies on the fixture environment and compare them."""
    config = replace(config or RunConfig(), seed=seed)
    env = env or ToyEnv()
    metrics: list[dict] = []
    policy_mle = mle_train(env, config, metrics)
    policy_grpo = grpo_train(env, policy_mle, config, metrics)

    env_ao = answer_only_env or ToyEnv(answer_only=True)
    ao_policy = ToyPolicy.uniform(env_ao)
    ao_policy.snapshot_reference()
    rng = np.random.default_rng(config.seed + 2000)
    for step in range(config.grpo_steps):
        x = step % len(env_ao.problems)
        batch = sample_group(env_ao, ao_policy, x, G=config.group_size,
                             temperature=config.temperature, rng=rng)
        grpo_step(ao_policy, batch, env_ao, beta_kl=config.beta_kl,
                  clip=config.clip, lr=config.grpo_lr)

    result = ExperimentResult(
        seed=seed,
        reward_mle=expected_reward(env, policy_mle),
        reward_grpo=expected_reward(env, policy_grpo),
        reward_grpo_answer_only=expected_reward(env_ao, ao_policy),
        mi_mle=conditional_mi(policy_mle, env),
        mi_grpo=conditional_mi(policy_grpo, env),
        entropy_mle=entropy_by_category(policy_mle, env),
        entropy_grpo=entropy_by_category(policy_grpo, env),
        entropy_shift=top_entropy_shift(policy_mle, policy_grpo, env),
    )
    if metrics_path:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            for row in metrics:
                fh.write(json.dumps(row, sort_keys=True) + "\n")
            fh.write(json.dumps({"phase": "result", **result.to_dict()},
                                sort_keys=True) + "\n")
    return result
