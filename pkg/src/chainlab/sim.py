"""Arrival processes and the mining event loop.

A trial samples one honest Poisson arrival stream and one adversarial
budget stream per chain, then replays them through the event loop: honest
arrivals extend a maximum-height credible tip and publish immediately;
the adversary decides at each budget point whether to mine and on which
parent, and schedules publications of its withheld blocks.

Strategies that publish at mine time and always extend the best tip
produce single-path chains; for those the engine takes a vectorized
shortcut that yields the identical trace.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right, insort
from dataclasses import dataclass, field

import numpy as np

from .chain import ADVERSARIAL, HONEST, NEVER, ChainError, ChainStore, Tx, block_from_row, block_to_row
from .bounds import DELTA_TYP_MAX

__all__ = [
    "ProtocolParams",
    "Trace",
    "StrategyViolation",
    "sample_poisson_arrivals",
    "run_simulation",
    "rng_stream",
]


class StrategyViolation(RuntimeError):
    """Strategy attempted a non-causal parent, bad publication, or bad steering."""


@dataclass(frozen=True)
class ProtocolParams:
    """Protocol and experiment parameters.

    alpha      honest mining rate per chain (> 0)
    beta       adversarial rate bound per chain (>= 0)
    delta_net  propagation delay bound
    delta_typ  typicality factor, in (0, 40/81)
    m          voter chain count; 0 means a single plain chain
    horizon    trial length (> 0)
    """

    alpha: float
    beta: float = 0.0
    delta_net: float = 0.0
    delta_typ: float = 0.3
    m: int = 0
    horizon: float = 100.0

    def __post_init__(self):
        if self.alpha <= 0:
            raise ValueError("alpha must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if self.delta_net < 0:
            raise ValueError("delta_net must be non-negative")
        if not 0.0 < self.delta_typ < DELTA_TYP_MAX:
            raise ValueError("delta_typ must lie in (0, 40/81)")
        if self.m < 0:
            raise ValueError("m must be non-negative")
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")

    @property
    def n_chains(self) -> int:
        return self.m + 1


def rng_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for (seed, key); used to keep per-chain and
    per-purpose randomness decoupled."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def sample_poisson_arrivals(rate: float, horizon: float, seed) -> np.ndarray:
    """Arrival times of a rate-``rate`` Poisson process on (0, horizon].

    ``seed`` may be an integer or a Generator. Gaps are independent
    exponential draws; the same seed reproduces the same list.
    """
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    if rate < 0:
        raise ValueError("rate must be non-negative")
    if rate == 0:
        return np.empty(0, dtype=np.float64)
    rng = seed if isinstance(seed, np.random.Generator) else rng_stream(int(seed))
    mean = rate * horizon
    chunk = int(mean + 4.0 * math.sqrt(mean) + 16.0)
    parts = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / rate, size=chunk)
        ts = t + np.cumsum(gaps)
        if ts[-1] > horizon:
            parts.append(ts[ts <= horizon])
            break
        parts.append(ts)
        t = ts[-1]
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


class Trace:
    """The complete record of one simulated execution."""

    def __init__(
        self,
        params: ProtocolParams,
        seed: int,
        chains: list[ChainStore],
        honest_schedule: list[np.ndarray] | None = None,
        budget_schedule: list[np.ndarray] | None = None,
        tie_break: str = "default",
        strategy_name: str = "null",
    ):
        self.params = params
        self.seed = seed
        self.chains = chains
        self.honest_schedule = honest_schedule
        self.budget_schedule = budget_schedule
        self.tie_break = tie_break
        self.strategy_name = strategy_name
        self.strategy_stats: dict = {}
        self._cache: dict = {}

    @property
    def horizon(self) -> float:
        return self.params.horizon

    def store(self, chain: int = 0) -> ChainStore:
        return self.chains[chain]

    def event_log(self) -> list[tuple]:
        """Block creations and publications in time order."""
        events = []
        for store in self.chains:
            for bid in range(1, len(store)):
                events.append((store.mined[bid], 0, "mine", store.chain_index, bid))
                pub = store.pub[bid]
                if pub != NEVER:
                    events.append((pub, 1, "publish", store.chain_index, bid))
        events.sort()
        return [(t, what, c, b) for t, _, what, c, b in events]

    # -- invariants ---------------------------------------------------------

    def validate(self) -> None:
        """Assert the domination and honest-compliance contracts."""
        delta = self.params.delta_net
        for j, store in enumerate(self.chains):
            kind = store.kind_array()
            mined = store.mined_array()
            pub = store.pub_array()
            height = store.height_array()
            cp = store.chain_pub()
            honest = np.flatnonzero(kind == HONEST)
            honest = honest[honest > 0]
            if not np.all(pub[honest] == mined[honest]):
                raise ValueError(f"chain {j}: honest block not published at mine time")
            if self.budget_schedule is not None:
                adv = mined[kind == ADVERSARIAL]
                if adv.size and not np.all(np.isin(adv, self.budget_schedule[j])):
                    raise ValueError(f"chain {j}: adversarial mining outside the budget")
            if self.honest_schedule is not None:
                sched = np.sort(self.honest_schedule[j])
                if honest.size != sched.size or not np.allclose(mined[honest], sched):
                    raise ValueError(f"chain {j}: honest arrivals differ from the schedule")
            # honest compliance: parent chain credible at the mining time
            order = np.argsort(cp, kind="stable")
            cp_sorted = cp[order]
            runmax = np.maximum.accumulate(height[order])
            parents = store.parent_array()[honest]
            tk = mined[honest]
            if honest.size:
                if not np.all(cp[parents] <= tk):
                    raise ValueError(f"chain {j}: honest parent not published in time")
                # at delta == 0 the block itself publishes at its own cutoff;
                # the miner's view is the state just before the arrival
                side = "left" if delta == 0 else "right"
                pos = np.searchsorted(cp_sorted, tk - delta, side=side)
                floors = np.where(pos > 0, runmax[np.maximum(pos - 1, 0)], 0)
                if not np.all(height[parents] >= floors):
                    raise ValueError(f"chain {j}: honest parent below the credibility floor")

    # -- serialization -------------------------------------------------------

    def dumps(self) -> str:
        lines = []
        for store in self.chains:
            for bid in range(len(store)):
                lines.append(block_to_row(store, bid))
        return "\n".join(lines) + "\n"

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.dumps())

    @classmethod
    def from_jsonl(cls, path_or_lines, params: ProtocolParams, seed: int = 0) -> "Trace":
        if isinstance(path_or_lines, str) and "\n" not in path_or_lines:
            with open(path_or_lines) as fh:
                lines = fh.read().splitlines()
        elif isinstance(path_or_lines, str):
            lines = path_or_lines.splitlines()
        else:
            lines = list(path_or_lines)
        chains: dict[int, list] = {}
        for line in lines:
            if line.strip():
                b = block_from_row(line)
                chains.setdefault(b.chain, []).append(b)
        stores = []
        for j in sorted(chains):
            blocks = sorted(chains[j], key=lambda b: b.id)
            store = ChainStore(j)
            for b in blocks[1:]:
                store.append(b.kind, b.parent, b.mined_time, b.publish_time, b.votes, b.refs, b.txs)
            stores.append(store)
        return cls(params, seed, stores)


# -- event-loop engine -------------------------------------------------------


class _Vis:
    """Per-chain visibility bookkeeping during a run."""

    __slots__ = ("cp", "best_h", "best", "publog_t", "publog_max", "waiting")

    def __init__(self):
        self.cp: list[float] = [0.0]
        self.best_h = 0
        self.best: list[int] = [0]
        self.publog_t: list[float] = [0.0]
        self.publog_max: list[int] = [0]
        self.waiting: dict[int, list[int]] = {}

    def on_append(self):
        self.cp.append(NEVER)

    def complete(self, bid: int, h: int, t: float) -> None:
        self.cp[bid] = t
        self.publog_t.append(t)
        self.publog_max.append(max(self.publog_max[-1], h))
        if h > self.best_h:
            self.best_h = h
            self.best = [bid]
        elif h == self.best_h:
            self.best.append(bid)

    def floor_at(self, cutoff: float) -> int:
        i = bisect_right(self.publog_t, cutoff)
        return self.publog_max[i - 1] if i else 0

    def best_ids(self, store: ChainStore) -> list[int]:
        if len(self.best) > 1:
            self.best.sort(key=lambda b: (self.cp[b], b))
        return self.best


class SimView:
    """What a strategy is allowed to see and do during a run."""

    def __init__(self, params: ProtocolParams, stores, vis, pubq):
        self.params = params
        self.now = 0.0
        self._stores = stores
        self._vis = vis
        self._pubq = pubq
        self._seq = 0
        self._scheduled: set[tuple[int, int]] = set()

    # observation
    def best_height(self, chain: int = 0) -> int:
        return self._vis[chain].best_h

    def best_tips(self, chain: int = 0) -> list[int]:
        return list(self._vis[chain].best_ids(self._stores[chain]))

    def best_tip(self, chain: int = 0) -> int:
        return self._vis[chain].best_ids(self._stores[chain])[0]

    def floor_height(self, chain: int = 0) -> int:
        return self._vis[chain].floor_at(self.now - self.params.delta_net)

    def height(self, chain: int, bid: int) -> int:
        return self._stores[chain].height[bid]

    def parent(self, chain: int, bid: int) -> int:
        return self._stores[chain].parent[bid]

    def mined_time(self, chain: int, bid: int) -> float:
        return self._stores[chain].mined[bid]

    def ancestor_at_height(self, chain: int, bid: int, h: int) -> int:
        store = self._stores[chain]
        b = bid
        while store.height[b] > h:
            b = store.parent[b]
        return b

    # action
    def publish(self, chain: int, bid: int, at: float | None = None) -> None:
        store = self._stores[chain]
        when = self.now if at is None else at
        if when < self.now:
            raise StrategyViolation("cannot publish in the past")
        if when < store.mined[bid]:
            raise StrategyViolation("cannot publish before the mining time")
        if store.pub[bid] != NEVER or (chain, bid) in self._scheduled:
            raise StrategyViolation(f"block ({chain}, {bid}) already published")
        self._scheduled.add((chain, bid))
        heapq.heappush(self._pubq, (when, self._seq, chain, bid))
        self._seq += 1


def _event_loop(params, strategy, steered, honest_sched, budget_sched, strategy_rng):
    n = params.n_chains
    stores = [ChainStore(j) for j in range(n)]
    vis = [_Vis() for _ in range(n)]
    pubq: list = []
    view = SimView(params, stores, vis, pubq)
    strategy.reset(params, strategy_rng)

    times = np.concatenate([*honest_sched, *budget_sched]) if n else np.empty(0)
    kinds = np.concatenate(
        [np.zeros(len(h), dtype=np.int8) for h in honest_sched]
        + [np.ones(len(b), dtype=np.int8) for b in budget_sched]
    )
    chains = np.concatenate(
        [np.full(len(honest_sched[j]), j, dtype=np.int64) for j in range(n)]
        + [np.full(len(budget_sched[j]), j, dtype=np.int64) for j in range(n)]
    )
    order = np.lexsort((chains, kinds, times))

    def flush_pubs(upto: float) -> None:
        while pubq and pubq[0][0] <= upto:
            when, _, j, bid = heapq.heappop(pubq)
            view.now = when
            store = stores[j]
            store.set_publish(bid, when)
            v = vis[j]
            if v.cp[store.parent[bid]] != NEVER:
                stack = [bid]
                while stack:
                    x = stack.pop()
                    v.complete(x, store.height[x], when)
                    stack.extend(v.waiting.pop(x, ()))
            else:
                v.waiting.setdefault(store.parent[bid], []).append(bid)

    for idx in order:
        t = float(times[idx])
        j = int(chains[idx])
        flush_pubs(t)
        view.now = t
        if kinds[idx] == 0:
            cands = vis[j].best_ids(stores[j])
            if steered:
                pick = strategy.choose_honest_tip(view, j, list(cands))
                if pick not in cands:
                    raise StrategyViolation("steered tip is not a maximum-height credible tip")
            else:
                pick = cands[0]
            bid = stores[j].append(HONEST, pick, t, publish_time=t)
            vis[j].on_append()
            vis[j].complete(bid, stores[j].height[bid], t)
            strategy.on_honest_block(view, j, bid)
        else:
            parent = strategy.on_budget(view, j, t)
            if parent is not None:
                try:
                    bid = stores[j].append(ADVERSARIAL, int(parent), t)
                except ChainError as exc:
                    raise StrategyViolation(str(exc)) from exc
                vis[j].on_append()
                strategy.on_self_block(view, j, bid)
    flush_pubs(math.inf)
    return stores


def _fast_published(params, strategy, honest_sched, budget_sched, strategy_rng):
    """Vectorized construction for immediate-publication best-tip strategies.

    With every block published at its mining time, the maximum-height
    credible tip is always the latest block, so each chain is a single path
    and the whole trace is a deterministic function of the merged arrival
    times.
    """
    strategy.reset(params, strategy_rng)
    mine_all = strategy.mines_every_budget_point()
    stores = []
    for j in range(params.n_chains):
        h = honest_sched[j]
        a = budget_sched[j] if mine_all else np.empty(0)
        times = np.concatenate([h, a])
        kinds = np.concatenate(
            [np.zeros(len(h), dtype=np.int8), np.ones(len(a), dtype=np.int8)]
        )
        order = np.lexsort((kinds, times))
        mined = np.concatenate([[0.0], times[order]])
        kind = np.concatenate([[HONEST], kinds[order]])
        n = len(mined)
        ids = np.arange(n, dtype=np.int64)
        stores.append(
            ChainStore.from_arrays(
                j,
                kind=kind.astype(np.int8),
                parent=ids - 1,
                mined=mined,
                pub=mined.copy(),
                height=ids,
            )
        )
    return stores


def _attach_txs(trace: Trace, tx_mode, seed: int) -> None:
    """Give every non-genesis block one transaction.

    ``tx_mode`` is "unique" (every transaction spends a fresh outpoint) or
    ("conflict", p): with probability p the transaction instead double-spends
    the outpoint of a uniformly chosen earlier transaction.
    """
    if tx_mode in (None, "none"):
        return
    if tx_mode == "unique":
        p_conflict = 0.0
    elif isinstance(tx_mode, tuple) and tx_mode[0] == "conflict":
        p_conflict = float(tx_mode[1])
    else:
        raise ValueError(f"unknown tx_mode {tx_mode!r}")
    rng = rng_stream(seed, 2)
    entries = []
    for store in trace.chains:
        mined = store.mined
        for bid in range(1, len(store)):
            entries.append((mined[bid], store.chain_index, bid))
    entries.sort()
    outpoint = 0
    spent: list[int] = []
    for time, j, bid in entries:
        store = trace.chains[j]
        if p_conflict and spent and rng.random() < p_conflict:
            target = spent[int(rng.integers(len(spent)))]
            inputs = (target,)
        else:
            inputs = (outpoint,)
            outpoint += 1
        tx = Tx(id=f"t{j}.{bid}", inputs=inputs, outputs=(outpoint,))
        outpoint += 1
        spent.extend(inputs)
        store.txs[bid] = (tx,)


def run_simulation(
    params: ProtocolParams,
    honest_policy: str = "default",
    strategy=None,
    seed: int = 0,
    tx_mode="none",
    fill_payload: bool = True,
    _force_engine: str | None = None,
) -> Trace:
    """Run one seeded trial and return its trace.

    ``honest_policy`` is "default" (earliest publication, then lowest id,
    among maximum-height credible tips) or "adversary-steered" (the strategy
    picks among those tips). The same seed, policy, and strategy reproduce
    the byte-identical trace.
    """
    from .strategies import make_strategy

    strategy = make_strategy(strategy)
    if honest_policy not in ("default", "adversary-steered"):
        raise ValueError(f"unknown honest_policy {honest_policy!r}")
    steered = honest_policy == "adversary-steered"

    honest_sched = [
        sample_poisson_arrivals(params.alpha, params.horizon, rng_stream(seed, 0, j))
        for j in range(params.n_chains)
    ]
    budget_sched = [
        sample_poisson_arrivals(params.beta, params.horizon, rng_stream(seed, 1, j))
        for j in range(params.n_chains)
    ]

    use_fast = strategy.fast_path and not steered
    if _force_engine == "event":
        use_fast = False
    elif _force_engine == "fast":
        if not (strategy.fast_path and not steered):
            raise ValueError("strategy is not eligible for the fast engine")
        use_fast = True

    srng = rng_stream(seed, 3)
    if use_fast:
        stores = _fast_published(params, strategy, honest_sched, budget_sched, srng)
    else:
        stores = _event_loop(params, strategy, steered, honest_sched, budget_sched, srng)

    trace = Trace(
        params,
        seed,
        stores,
        honest_schedule=honest_sched,
        budget_schedule=budget_sched,
        tie_break=honest_policy,
        strategy_name=strategy.name,
    )
    _attach_txs(trace, tx_mode, seed)
    if params.m >= 1 and fill_payload:
        from .prism import fill_payload as _fill

        _fill(trace, strategy)
    trace.strategy_stats = strategy.trial_stats()
    return trace
