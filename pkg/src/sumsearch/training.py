"""Actor-critic training for the summarizer.

Three phases: (1) the actor is pretrained by teacher-forced maximum
likelihood; (2) the critic's value head is regressed onto the rewards of
trajectories sampled from the frozen actor; (3) both are updated jointly,
the actor by REINFORCE with the critic's value as baseline and the critic by
squared error against the terminal reward. The reward for a sampled comment
is smoothed n-gram precision against the reference (no brevity penalty),
granted in full at the terminal step, so every step's value target equals
the terminal reward. All parameters are tuned with diagonal AdaGrad.
"""

from __future__ import annotations

import json
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import decoder as dec
from .autodiff import DiffArray, OptimState, adagrad_step, backward, zero_grads
from .config import TrainConfig
from .corpus import EOS, BOS, CodeCommentPair, PairSet, encode_ids
from .decoder import DecodeState
from .indent_tree import IndentTreeError
from .metrics import bleu_n
from .model import Summarizer, build_vocabs
from .tokenizer import tokenize_nl

log = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# reward


@dataclass(frozen=True)
class RewardConfig:
    """Highest n-gram order and the smoothing epsilon for zero counts."""

    n_max: int = 1
    epsilon: float = 1e-9

    def __post_init__(self):
        if not 1 <= self.n_max <= 4:
            raise ValueError(f"n_max must be in [1, 4], got {self.n_max}")
        if self.epsilon <= 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")


def bleu_reward(candidate, reference, cfg: RewardConfig) -> float:
    """exp(mean over n of log clipped n-gram precision); empty candidates score 0."""
    cand = list(candidate)
    ref = list(reference)
    if not ref:
        raise ValueError("reference must be non-empty")
    if not cand:
        return 0.0
    log_terms = []
    for order in range(1, cfg.n_max + 1):
        cand_counts = Counter(tuple(cand[i:i + order]) for i in range(len(cand) - order + 1))
        ref_counts = Counter(tuple(ref[i:i + order]) for i in range(len(ref) - order + 1))
        total = sum(cand_counts.values())
        matches = sum(min(count, ref_counts[g]) for g, count in cand_counts.items())
        if matches == 0 or total == 0:
            p = (matches + cfg.epsilon) / (total + cfg.epsilon)
        else:
            p = matches / total
        log_terms.append(math.log(p))
    return math.exp(sum(log_terms) / cfg.n_max)


# ---------------------------------------------------------------------------
# critic


class Critic:
    """Scalar value head over the decode state's hidden vector.

    The hidden vector enters detached, so value-regression gradients stay in
    the critic's own parameters and never leak into the actor.
    """

    def __init__(self, d_model: int, rng: np.random.Generator):
        limit = math.sqrt(6.0 / (d_model + 1))
        self.w = ad.parameter(rng.uniform(-limit, limit, size=(d_model, 1)))
        self.b = ad.parameter(np.zeros((1, 1)))

    def params(self) -> dict[str, DiffArray]:
        return {"critic.w": self.w, "critic.b": self.b}

    def restore(self, arrays: dict[str, np.ndarray]) -> None:
        self.w.values = np.asarray(arrays["critic.w"], dtype=ad.default_dtype()).copy()
        self.b.values = np.asarray(arrays["critic.b"], dtype=ad.default_dtype()).copy()
        self.w.grad = None
        self.b.grad = None


def critic_value(state: DecodeState, critic: Critic) -> DiffArray:
    return ad.add(ad.matmul(ad.constant(state.hidden.values), critic.w), critic.b)


# ---------------------------------------------------------------------------
# losses


@dataclass
class ValueEstimate:
    """Per-step predicted values for one trajectory plus its terminal reward."""

    values: list[DiffArray]
    reward: float


@dataclass
class Trajectory:
    ids: list[int]
    logps: list[DiffArray]
    values: list[DiffArray]
    reward: float
    candidate_tokens: list[str]

    def estimate(self) -> ValueEstimate:
        return ValueEstimate(values=self.values, reward=self.reward)


def mle_loss(model: Summarizer, pair: CodeCommentPair) -> DiffArray:
    """Mean negative log-likelihood of the reference comment, EOS step included."""
    target_ids = encode_ids(tokenize_nl(pair.comment), model.nl_vocab) + [EOS]
    target_ids = target_ids[: model.cfg.max_decode_steps]
    code_repr = model.encode_code(pair.code).pooled
    ll = dec.reference_log_likelihood(code_repr, target_ids, model.dec, model.proj, model.nl_enc)
    return ad.scale(ll, -1.0 / len(target_ids))


def actor_loss(trajectory: Trajectory, reward: float, values: ValueEstimate) -> DiffArray:
    """REINFORCE with baseline: -sum_t (r - V(s_t)) log p(y_t | s_t).

    The advantage is a plain number here, so no gradient flows through it
    into the critic; the critic learns from :func:`critic_loss` alone.
    """
    if not trajectory.logps:
        raise ValueError("empty trajectory")
    total = None
    for logp, value in zip(trajectory.logps, values.values):
        advantage = reward - value.item()
        term = ad.scale(logp, -advantage)
        total = term if total is None else ad.add(total, term)
    return total


def critic_loss(values: ValueEstimate, target: float) -> DiffArray:
    """Half the mean squared gap between predictions and the reward target."""
    if not values.values:
        raise ValueError("empty value estimate")
    goal = ad.constant([[target]])
    total = None
    for v in values.values:
        diff = ad.sub(goal, v)
        sq = ad.mul(diff, diff)
        total = sq if total is None else ad.add(total, sq)
    return ad.scale(total, 0.5 / len(values.values))


# ---------------------------------------------------------------------------
# rollouts


def sample_trajectory(
    model: Summarizer,
    critic: Critic,
    pair: CodeCommentPair,
    reward_cfg: RewardConfig,
    rng: np.random.Generator,
) -> Trajectory:
    """Sample a comment for one pair, recording log-probs and value estimates."""
    code_repr = model.encode_code(pair.code).pooled
    state = dec.init_state(code_repr, model.dec)
    ids: list[int] = []
    logps: list[DiffArray] = []
    values: list[DiffArray] = []
    vocab_size = len(model.nl_vocab)
    for _ in range(model.cfg.max_decode_steps):
        z = dec.logits(state, model.proj)
        probs = np.exp(z.values[0] - z.values[0].max())
        token = dec._sample_id(probs / probs.sum(), rng)
        onehot = np.zeros((1, vocab_size))
        onehot[0, token] = 1.0
        logps.append(ad.sum_all(ad.mul(ad.log_softmax_rows(z), ad.constant(onehot))))
        values.append(critic_value(state, critic))
        ids.append(token)
        if token == EOS:
            break
        state = dec.advance(state, token, model.dec, model.nl_enc)
    candidate = [model.nl_vocab.token_for(i) for i in ids if i not in (BOS, EOS)]
    reference = list(tokenize_nl(pair.comment))
    reward = bleu_reward(candidate, reference, reward_cfg)
    return Trajectory(ids=ids, logps=logps, values=values, reward=reward, candidate_tokens=candidate)


def validation_candidates(model: Summarizer, pairs) -> tuple[list[list[str]], list[list[str]]]:
    """Greedy decodes and reference token lists for a pair collection.

    Snippets whose tree cannot be built yield an empty candidate rather than
    aborting the whole evaluation.
    """
    candidates = []
    references = []
    cfg = dec.DecodeConfig(max_steps=model.cfg.max_decode_steps)
    for pair in pairs:
        try:
            pooled = model.encode_code(pair.code).pooled
            ids = model.generate_ids(pooled, cfg)
            candidates.append(model.comment_tokens(ids))
        except IndentTreeError:
            candidates.append([])
        references.append(list(tokenize_nl(pair.comment)))
    return candidates, references


def validation_bleu1(model: Summarizer, pairs) -> float:
    """Corpus BLEU-1 of greedy decodes against reference comments."""
    candidates, references = validation_candidates(model, pairs)
    return bleu_n(candidates, references, 1)


# ---------------------------------------------------------------------------
# the training loop


@dataclass
class TrainResult:
    model: Summarizer
    critic: Critic
    loss_lines: list[str] = field(default_factory=list)
    val_rounds: list[dict] = field(default_factory=list)
    phase_val: dict[str, float] = field(default_factory=dict)
    reward_history: list[float] = field(default_factory=list)
    checkpoint_path: Path | None = None


class _BestTracker:
    """Keeps the parameter snapshot with the highest validation score."""

    def __init__(self):
        self.score = -1.0
        self.snapshot = None

    def offer(self, score: float, model: Summarizer):
        if score > self.score:
            self.score = score
            self.snapshot = model.snapshot()


def train(train_pairs: PairSet, val_pairs, cfg: TrainConfig, out_dir=None) -> TrainResult:
    """Run all three phases and return the best-validation model.

    Emits one loss line per optimization step and one JSON record per
    validation round; with ``out_dir`` set they are written to
    ``loss_log.txt`` and ``metrics.jsonl`` next to the checkpoint.
    """
    if len(train_pairs) == 0:
        raise ValueError("empty training split")
    rng = np.random.default_rng(cfg.seed)
    code_vocab, nl_vocab = build_vocabs(train_pairs, cfg)
    model = Summarizer(code_vocab, nl_vocab, cfg, rng)
    critic = Critic(cfg.d_model, rng)
    reward_cfg = RewardConfig(n_max=cfg.n_max, epsilon=cfg.reward_eps)
    result = TrainResult(model=model, critic=critic)
    have_val = len(list(val_pairs)) > 0

    # The tree encoder updates at a reduced rate: at the full rate its pooled
    # code vectors collapse onto one point within a few hundred steps (the
    # cheap descent direction early on is to zero out conditioning variance)
    # and AdaGrad's accumulators then freeze the collapse in place.
    from .encoder import stack_params

    code_names = set(stack_params(model.code_enc, "actor.code"))

    def split_groups(params: dict) -> tuple[dict, dict]:
        slow = {k: v for k, v in params.items() if k in code_names}
        fast = {k: v for k, v in params.items() if k not in code_names}
        return fast, slow

    def run_validation(phase: str, step: int, tracker: _BestTracker | None):
        if not have_val:
            return
        score = validation_bleu1(model, val_pairs)
        record = {"phase": phase, "step": step, "val_bleu1": round(score, 8)}
        result.val_rounds.append(record)
        log.info("validation %s", record)
        if tracker is not None:
            tracker.offer(score, model)

    def pick_order(n: int) -> list[int]:
        return [int(i) for i in rng.permutation(n)]

    n = len(train_pairs)

    # One optimizer state per parameter for the whole run: squared-gradient
    # accumulators persist across phases, so the joint phase continues from
    # the pretraining step sizes instead of re-taking AdaGrad's full-size
    # first steps on an already-tuned policy.
    actor_params = model.params()
    actor_fast, actor_slow = split_groups(actor_params)
    critic_params = critic.params()
    opt_fast = OptimState(actor_fast, cfg.lr, cfg.adagrad_eps)
    opt_slow = OptimState(actor_slow, cfg.lr * cfg.enc_lr_scale, cfg.adagrad_eps)
    opt_critic = OptimState(critic_params, cfg.lr, cfg.adagrad_eps)

    # phase 1: maximum-likelihood pretraining of the actor
    tracker = _BestTracker()
    order = pick_order(n)
    try:
        for step in range(cfg.mle_steps):
            if step > 0 and step % n == 0:
                order = pick_order(n)
            pair = train_pairs[order[step % n]]
            loss = mle_loss(model, pair)
            backward(loss)
            adagrad_step(actor_fast, opt_fast)
            adagrad_step(actor_slow, opt_slow)
            zero_grads(actor_params.values())
            result.loss_lines.append(f"mle {step} {loss.item()!r}")
            if (step + 1) % cfg.eval_every == 0 or step + 1 == cfg.mle_steps:
                run_validation("mle", step + 1, tracker)
    except FloatingPointError as e:
        raise FloatingPointError(f"mle phase diverged at step {step}: {e}") from e
    if tracker.snapshot is not None:
        model.restore(tracker.snapshot)
        result.phase_val["mle"] = tracker.score

    # phase 2: critic pretraining against rewards of the frozen actor
    try:
        for step in range(cfg.critic_steps):
            pair = train_pairs[int(rng.integers(n))]
            traj = sample_trajectory(model, critic, pair, reward_cfg, rng)
            loss = critic_loss(traj.estimate(), traj.reward)
            backward(loss)
            adagrad_step(critic_params, opt_critic)
            zero_grads(critic_params.values())
            result.loss_lines.append(f"critic {step} {loss.item()!r}")
    except FloatingPointError as e:
        raise FloatingPointError(f"critic phase diverged at step {step}: {e}") from e

    # phase 3: joint actor-critic updates; the actor fine-tunes at a reduced
    # rate since baseline noise in the advantages can erode a good policy
    all_params = dict(actor_params)
    all_params.update(critic_params)
    opt_fast.learning_rate = cfg.lr * cfg.joint_lr_scale
    opt_slow.learning_rate = cfg.lr * cfg.enc_lr_scale * cfg.joint_lr_scale
    tracker = _BestTracker()
    run_validation("joint", 0, tracker)
    try:
        for step in range(cfg.joint_steps):
            total = None
            batch_reward = 0.0
            for _ in range(cfg.batch_size):
                pair = train_pairs[int(rng.integers(n))]
                traj = sample_trajectory(model, critic, pair, reward_cfg, rng)
                estimate = traj.estimate()
                term = ad.add(actor_loss(traj, traj.reward, estimate), critic_loss(estimate, traj.reward))
                total = term if total is None else ad.add(total, term)
                batch_reward += traj.reward
            loss = ad.scale(total, 1.0 / cfg.batch_size)
            backward(loss)
            adagrad_step(actor_fast, opt_fast)
            adagrad_step(actor_slow, opt_slow)
            adagrad_step(critic_params, opt_critic)
            zero_grads(all_params.values())
            result.loss_lines.append(f"joint {step} {loss.item()!r}")
            result.reward_history.append(batch_reward / cfg.batch_size)
            if (step + 1) % cfg.eval_every == 0 or step + 1 == cfg.joint_steps:
                run_validation("joint", step + 1, tracker)
    except FloatingPointError as e:
        raise FloatingPointError(f"joint phase diverged at step {step}: {e}") from e
    if tracker.snapshot is not None:
        model.restore(tracker.snapshot)
        result.phase_val["joint"] = tracker.score

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        critic_arrays = {name: p.values.copy() for name, p in critic.params().items()}
        result.checkpoint_path = model.save(out, extra_arrays=critic_arrays)
        (out / "loss_log.txt").write_text("\n".join(result.loss_lines) + "\n", encoding="utf-8")
        with open(out / "metrics.jsonl", "w", encoding="utf-8") as f:
            for record in result.val_rounds:
                f.write(json.dumps(record, sort_keys=True) + "\n")
    return result


def smoothed_window_rewards(rewards, window: int = 500) -> list[float]:
    """Mean reward of consecutive disjoint windows; partial tails are dropped."""
    out = []
    for start in range(0, len(rewards) - window + 1, window):
        chunk = rewards[start:start + window]
        out.append(sum(chunk) / len(chunk))
    return out
