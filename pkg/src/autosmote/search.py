"""Hierarchical over-sampling search: episode generation, rewards and training.

One episode runs the three policies in turn. The cross-instance policy picks a
global scaling factor ``g1`` once; the instance policy then visits every
training minority instance in index order and picks ``g2``; the low-level
policy takes ``g1 * g2`` interpolation steps around that instance, each
choosing a neighbour among the top-K and a weight from ``LAMBDAS``.
"""

from __future__ import annotations

import logging
import math
import multiprocessing as mp
import queue
import time
import zlib
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

from . import classifiers
from .classifiers import ClassifierSpec
from .data import Dataset, SplitDataset
from .nn import Adam
from .policy import (LAMBDAS, N_LAMBDAS, PolicyBundle, cross_state, state_features,
                     usage_bin)
from .samplers import NeighborIndex, SyntheticSet, knn_minority
from .vtrace import POLICY_TAGS, Trajectory, impala_loss

logger = logging.getLogger(__name__)


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator derived from a root seed and a stream name."""
    return np.random.default_rng([int(seed), zlib.crc32(name.encode())])


@dataclass
class SearchConfig:
    G1: int | None = None
    G2: int = 10
    K: int = 30
    iterations: int = 1000
    buffer_cross: int = 2
    buffer_instance: int = 300
    buffer_low: int = 300
    gamma: float = 1.0
    rho_bar: float = 1.0
    c_bar: float = 1.0
    lr: float = 0.005
    entropy_coef: float = 0.01
    clip_norm: float | None = 40.0
    hidden: int = 128
    ir_multiple: float = 4.0
    actors: int = 1

    def __post_init__(self):
        for name in ("G2", "K", "iterations", "buffer_cross", "buffer_instance", "buffer_low",
                     "hidden", "actors"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.G1 is not None and (int(self.G1) != self.G1 or self.G1 < 0):
            raise ValueError(f"G1 must be a non-negative integer, got {self.G1!r}")
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must be in (0, 1]")
        if self.lr <= 0 or self.rho_bar < 0 or self.c_bar < 0 or self.entropy_coef < 0:
            raise ValueError("lr must be positive; rho_bar, c_bar and entropy_coef non-negative")

    def resolve_G1(self, train: Dataset) -> int:
        """Default cross-instance cap so that G1 * G2 is ``ir_multiple`` times the IR."""
        if self.G1 is not None:
            return int(self.G1)
        return max(1, math.ceil(self.ir_multiple * train.imbalance_ratio / self.G2))

    def buffer_size(self, tag: str) -> int:
        return {"cross": self.buffer_cross, "instance": self.buffer_instance, "low": self.buffer_low}[tag]


@dataclass
class Episode:
    synthetic: SyntheticSet
    g1: int
    g2: np.ndarray
    cross: Trajectory
    instance: Trajectory
    low: list[Trajectory]
    counts: np.ndarray
    reward: float | None = None

    def trajectories(self) -> list[Trajectory]:
        return [self.cross, self.instance, *self.low]

    def assign_reward(self, reward: float) -> None:
        self.reward = float(reward)
        for traj in self.trajectories():
            traj.set_terminal_reward(reward)


def _pick(p: np.ndarray, rng: np.random.Generator | None, greedy: bool) -> int:
    if greedy:
        return int(np.argmax(p))
    cdf = np.cumsum(p)
    idx = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    return min(idx, len(p) - 1)


def generate(bundle: PolicyBundle, minority: np.ndarray, neighbors: NeighborIndex, G1: int, G2: int,
             K: int, rng: np.random.Generator | None = None, mode: str = "sample",
             goals: tuple[int, list[int]] | None = None) -> Episode:
    """Run one generation episode.

    ``goals=(g1, [g2_i, ...])`` forces the high-level decisions (the
    trajectories then record the policy probability of the forced action).
    """
    if mode not in ("sample", "greedy"):
        raise ValueError(f"mode must be 'sample' or 'greedy', got {mode!r}")
    greedy = mode == "greedy"
    if not greedy and rng is None:
        raise ValueError("sampling mode needs a random generator")
    minority = np.asarray(minority, dtype=np.float64)
    n_min, dim = minority.shape
    table = neighbors.table[:, :min(K, neighbors.width)]
    counts = np.zeros(n_min, dtype=np.int64)

    def choose(policy, state, extra, forced):
        p = policy.probs(state, extra)
        a = forced if forced is not None else _pick(p, rng, greedy)
        if not 0 <= a < len(p):
            raise ValueError(f"action {a} outside the action space of size {len(p)}")
        return a, p[a]

    s0 = cross_state(minority)
    g1, mu1 = choose(bundle.cross, s0, None, None if goals is None else goals[0])
    cross = Trajectory("cross", s0[None], [g1], [mu1])

    inst_states, inst_actions, inst_mu, g2s = [], [], [], []
    low_trajs = []
    sources, nbrs, lams = [], [], []
    for i in range(n_min):
        s = state_features(i, minority, counts)
        g2, mu2 = choose(bundle.instance, s, None, None if goals is None else goals[1][i])
        inst_states.append(s)
        inst_actions.append(g2)
        inst_mu.append(mu2)
        g2s.append(g2)
        row = table[i]
        l_states, l_actions, l_mu, l_bins = [], [], [], []
        for _ in range(g1 * g2):
            s_low = state_features(i, minority, counts)
            nbins = usage_bin(counts[row])
            a, mu = choose(bundle.low, s_low, nbins, None)
            slot, lam_slot = divmod(a, N_LAMBDAS)
            j = int(row[slot])
            l_states.append(s_low)
            l_actions.append(a)
            l_mu.append(mu)
            l_bins.append(nbins)
            sources.append(i)
            nbrs.append(j)
            lams.append(LAMBDAS[lam_slot])
            counts[i] += 1
            counts[j] += 1
        low_trajs.append(Trajectory(
            "low",
            np.array(l_states).reshape(-1, len(s0)),
            l_actions, l_mu,
            neighbor_bins=np.array(l_bins, dtype=np.int64).reshape(-1, row.shape[0]),
        ))
    instance = Trajectory("instance", np.array(inst_states), inst_actions, inst_mu)
    synthetic = SyntheticSet.from_provenance(minority, sources, nbrs, lams)
    return Episode(synthetic, g1, np.array(g2s, dtype=np.int64), cross, instance, low_trajs, counts)


def reward_episode(synthetic: SyntheticSet, split: SplitDataset, spec: ClassifierSpec, metric: str,
                   fit_fn: Callable = classifiers.fit) -> float:
    """Validation score of a classifier trained on train plus ``synthetic``."""
    train = split.train.with_extra_minority(synthetic.samples) if len(synthetic) else split.train
    model = fit_fn(spec, train)
    return classifiers.evaluate(model, split.validation, metric)


class EpisodeBuffer:
    """FIFO of trajectories counted in steps; pops whole trajectories."""

    def __init__(self, threshold: int):
        self.threshold = threshold
        self._items: deque[Trajectory] = deque()
        self.size = 0

    def push(self, traj: Trajectory) -> None:
        if len(traj):
            self._items.append(traj)
            self.size += len(traj)

    def ready(self) -> bool:
        return self.size >= self.threshold

    def pop(self) -> list[Trajectory]:
        out, popped = [], 0
        while self._items and popped < self.threshold:
            traj = self._items.popleft()
            popped += len(traj)
            out.append(traj)
        self.size -= popped
        return out


class Learner:
    """Owns the master parameters, the three buffers and the optimizers."""

    def __init__(self, bundle: PolicyBundle, config: SearchConfig):
        self.bundle = bundle
        self.config = config
        self.buffers = {tag: EpisodeBuffer(config.buffer_size(tag)) for tag in POLICY_TAGS}
        self.optimizers = {}
        if bundle.learnable:
            self.optimizers = {tag: Adam(bundle.get(tag).params, lr=config.lr, clip_norm=config.clip_norm)
                               for tag in POLICY_TAGS}
        self.updates = {tag: 0 for tag in POLICY_TAGS}
        self.skipped = 0

    def observe(self, episode: Episode) -> None:
        for traj in episode.trajectories():
            self.buffers[traj.policy].push(traj)

    def train_ready(self) -> bool:
        """Drain every buffer that holds at least its threshold; True if anything changed."""
        changed = False
        if not self.bundle.learnable:
            return changed
        cfg = self.config
        for tag in POLICY_TAGS:
            buf = self.buffers[tag]
            while buf.ready():
                batch = buf.pop()
                net = self.bundle.get(tag)
                stats, grads = impala_loss(net, batch, cfg.gamma, cfg.rho_bar, cfg.c_bar, cfg.entropy_coef)
                if not np.isfinite(stats.loss) or not self.optimizers[tag].step(net.params, grads):
                    self.skipped += 1
                    logger.warning("skipped %s update (loss %s)", tag, stats.loss)
                    continue
                self.updates[tag] += 1
                changed = True
        return changed


@dataclass
class SearchResult:
    best_synthetic: SyntheticSet
    best_score: float
    best_iteration: int
    history: list[dict] = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seed: int = 0
    updates: dict = field(default_factory=dict)
    G1: int = 0
    bundle: PolicyBundle | None = None
    failed_iterations: int = 0

    def to_dict(self) -> dict:
        return {
            "best_score": self.best_score,
            "best_iteration": self.best_iteration,
            "n_synthetic": len(self.best_synthetic),
            "G1": self.G1,
            "seed": self.seed,
            "updates": dict(self.updates),
            "failed_iterations": self.failed_iterations,
            "config": dict(self.config),
            "history": list(self.history),
        }


class _Context:
    """Everything an actor needs to produce rewarded episodes."""

    def __init__(self, split: SplitDataset, spec: ClassifierSpec, metric: str, config: SearchConfig,
                 fit_fn: Callable):
        self.split = split
        self.spec = spec
        self.metric = metric
        self.config = config
        self.fit_fn = fit_fn
        self.minority = split.train.minority
        self.neighbors = knn_minority(self.minority, config.K)
        self.G1 = config.resolve_G1(split.train)

    def rollout(self, bundle: PolicyBundle, rng: np.random.Generator) -> Episode:
        cfg = self.config
        ep = generate(bundle, self.minority, self.neighbors, self.G1, cfg.G2, cfg.K, rng)
        ep.assign_reward(reward_episode(ep.synthetic, self.split, self.spec, self.metric, self.fit_fn))
        return ep


def _actor_main(actor_id, ctx, bundle, seed, inbox, outbox, stop):
    rng = substream(seed, f"actor-{actor_id}")
    while not stop.is_set():
        try:
            while True:
                bundle.load(inbox.get_nowait())
        except queue.Empty:
            pass
        try:
            ep = ctx.rollout(bundle, rng)
        except Exception as exc:  # reported to the learner, which skips the iteration
            ep = exc
        while not stop.is_set():
            try:
                outbox.put((actor_id, ep), timeout=0.1)
                break
            except queue.Full:
                continue


def _publish(inboxes, snapshot):
    # unbounded inboxes: the learner never blocks on a busy actor, and actors
    # keep only the newest snapshot they find before each episode
    for box in inboxes:
        box.put_nowait(snapshot)


def _run_search(split: SplitDataset, spec: ClassifierSpec, metric: str, config: SearchConfig,
                seed: int, learn: bool, fit_fn: Callable = classifiers.fit,
                progress: Callable[[dict], None] | None = None) -> SearchResult:
    ctx = _Context(split, spec, metric, config, fit_fn)
    state_dim = ctx.minority.shape[1] + 10
    if learn:
        bundle = PolicyBundle.create(state_dim, ctx.G1, config.G2, config.hidden, substream(seed, "policy_init"))
    else:
        bundle = PolicyBundle.uniform(ctx.G1, config.G2)
    learner = Learner(bundle, config)
    best = SyntheticSet.empty(ctx.minority.shape[1])
    best_score, best_iter = -math.inf, -1
    history: list[dict] = []
    failed = 0

    def consume(it: int, ep: Episode | Exception) -> bool:
        nonlocal best, best_score, best_iter, failed
        if isinstance(ep, Exception):
            failed += 1
            logger.error("iteration %d failed: %s", it, ep)
            return False
        learner.observe(ep)
        changed = learner.train_ready()
        if ep.reward > best_score:
            best, best_score, best_iter = ep.synthetic, ep.reward, it
        record = {"iteration": it, "reward": ep.reward, "best": best_score,
                  "n_synthetic": len(ep.synthetic), "g1": ep.g1}
        history.append(record)
        if progress is not None:
            progress(record)
        return changed

    if config.actors <= 1:
        rng = substream(seed, "actions")
        for it in range(config.iterations):
            try:
                ep = ctx.rollout(bundle, rng)
            except Exception as exc:
                ep = exc
            consume(it, ep)
    else:
        _run_actors(ctx, bundle, config, seed, consume)

    if best_iter < 0:
        raise RuntimeError("every search iteration failed")
    return SearchResult(best, float(best_score), best_iter, history, asdict(config), seed,
                        dict(learner.updates), ctx.G1, bundle if learn else None, failed)


def _run_actors(ctx, bundle, config, seed, consume):
    mp_ctx = mp.get_context("fork")
    stop = mp_ctx.Event()
    outbox = mp_ctx.Queue(maxsize=2 * config.actors)
    inboxes = [mp_ctx.Queue() for _ in range(config.actors)]
    actors = [mp_ctx.Process(target=_actor_main, daemon=True,
                             args=(i, ctx, bundle.clone(), seed, inboxes[i], outbox, stop))
              for i in range(config.actors)]
    for proc in actors:
        proc.start()
    try:
        for it in range(config.iterations):
            _, ep = outbox.get()
            if consume(it, ep) and bundle.learnable:
                _publish(inboxes, bundle.snapshot())
    finally:
        stop.set()
        # Drain until every actor has flushed its last episode and exited. An
        # actor killed mid-write leaves a torn message in the pipe, so stragglers
        # are terminated only after the outbox is no longer read.
        deadline = time.monotonic() + 10.0
        while any(p.is_alive() for p in actors) and time.monotonic() < deadline:
            try:
                outbox.get(timeout=0.05)
            except queue.Empty:
                pass
        for proc in actors:
            if proc.is_alive():
                proc.terminate()
            proc.join()
        for box in (*inboxes, outbox):
            # unread snapshots must not hold up interpreter exit
            box.cancel_join_thread()
            box.close()


def train_search(split: SplitDataset, spec: ClassifierSpec, metric: str, config: SearchConfig | None = None,
                 seed: int = 0, fit_fn: Callable = classifiers.fit,
                 progress: Callable[[dict], None] | None = None) -> SearchResult:
    """Learn the three policies from validation rewards; keep the best synthetic set.

    Only ``split.train`` and ``split.validation`` are read.
    """
    return _run_search(split, spec, metric, config or SearchConfig(), seed, True, fit_fn, progress)


def random_search(split: SplitDataset, spec: ClassifierSpec, metric: str, config: SearchConfig | None = None,
                  seed: int = 0, fit_fn: Callable = classifiers.fit,
                  progress: Callable[[dict], None] | None = None) -> SearchResult:
    """Same decision space and budget as ``train_search`` with uniform random actions."""
    return _run_search(split, spec, metric, config or SearchConfig(), seed, False, fit_fn, progress)
