"""Sortition, voting, leader-sequence election, reference links, and ledgers.

Chain 0 carries proposer blocks; chains 1..m carry voter blocks. Honest
voter blocks vote once per proposer height, for the first-published
proposer there; honest proposer blocks reference every observable block not
already covered by their parent or earlier references. A leader sequence is
elected per proposer height by vote plurality from one credible voter tip
per chain, and deterministically unrolls into a sanitized transaction
ledger.
"""

from __future__ import annotations

import heapq
import math
from bisect import bisect_right
from dataclasses import dataclass

import numpy as np

from .analysis import CheckResult, IntervalTooShort, _stats, good_event, interval_counts, typical_event_proxy
from .bounds import derive
from .chain import ADVERSARIAL, HONEST, NEVER, Tx

__all__ = [
    "Vote",
    "LeaderSequence",
    "Ledger",
    "sortition",
    "first_publication_time",
    "honest_votes",
    "reference_links",
    "leader_sequence",
    "best_credible_tip",
    "build_ledger",
    "tx_credible_until",
    "check_prism_theorems",
    "fill_payload",
]


@dataclass(frozen=True)
class Vote:
    voter_chain: int
    voter_block: int
    height: int
    choice: int


@dataclass(frozen=True)
class LeaderSequence:
    leaders: tuple[int, ...]          # proposer id per height 1..n
    elected_at: float
    electors: tuple[int, ...]         # one voter tip per chain 1..m

    @property
    def height(self) -> int:
        return len(self.leaders)


@dataclass(frozen=True)
class Ledger:
    txs: tuple[Tx, ...]
    sources: tuple[tuple[tuple[int, int], int], ...]   # ((chain, id), epoch)
    epochs: tuple[tuple[int, tuple[tuple[int, int], ...]], ...]

    def tx_ids(self) -> tuple[str, ...]:
        return tuple(tx.id for tx in self.txs)

    def dumps(self) -> str:
        lines = []
        for tx, (src, h) in zip(self.txs, self.sources):
            lines.append(f"{h},{tx.id},{src[0]},{src[1]}")
        return "\n".join(lines) + ("\n" if lines else "")


def sortition(u: float, m: int) -> int:
    """Chain index for a hash value u in [0, 1): index j gets [j*gamma, (j+1)*gamma)
    with gamma = 1/(m+1)."""
    if not 0.0 <= u < 1.0:
        raise ValueError("u must lie in [0, 1)")
    return min(int(u * (m + 1)), m)


class _PrismIndex:
    """Per-trace index of the proposer chain's publication structure."""

    def __init__(self, trace):
        store = trace.store(0)
        pub = store.pub_array()
        height = store.height_array()
        n = len(store)
        max_h = int(height.max()) if n else 0
        r = np.full(max_h + 1, math.inf)
        choice = np.full(max_h + 1, -1, dtype=np.int64)
        published = np.flatnonzero(np.isfinite(pub))
        order = published[np.lexsort((published, pub[published]))]
        hs = height[order]
        uniq, first = np.unique(hs, return_index=True)
        r[uniq] = pub[order[first]]
        choice[uniq] = order[first]
        r[0] = 0.0
        self.r = r
        self.choice = choice
        ripe = np.flatnonzero(np.isfinite(r))
        ripe = ripe[ripe >= 1]
        ordr = np.lexsort((ripe, r[ripe]))
        self.ripe_h = ripe[ordr]
        self.ripe_r = r[self.ripe_h]
        by_height: list[list[int]] = [[] for _ in range(max_h + 1)]
        for bid in range(n):
            by_height[height[bid]].append(bid)
        self.proposers_at = by_height


def _prism_index(trace) -> _PrismIndex:
    got = trace._cache.get("prism_index")
    if got is None:
        got = _PrismIndex(trace)
        trace._cache["prism_index"] = got
    return got


def first_publication_time(trace, h: int):
    """When the first proposer block at height ``h`` is published, or None."""
    idx = _prism_index(trace)
    if not 0 <= h < len(idx.r) or not math.isfinite(idx.r[h]):
        return None
    return float(idx.r[h])


class PayloadContext:
    """What adversarial payload hooks may inspect."""

    def __init__(self, trace, index: _PrismIndex):
        self.trace = trace
        self._index = index

    def ripe_heights(self, t: float) -> list[int]:
        """Proposer heights whose first publication is at least one delay old at t."""
        k = bisect_right(self._index.ripe_r.tolist(), t - self.trace.params.delta_net)
        return [int(h) for h in self._index.ripe_h[:k]]

    def default_choice(self, h: int) -> int:
        return int(self._index.choice[h])

    def proposers_at(self, h: int, published_before: float | None = None) -> list[int]:
        store = self.trace.store(0)
        out = []
        for bid in self._index.proposers_at[h] if h < len(self._index.proposers_at) else []:
            if published_before is None or store.pub[bid] < published_before:
                out.append(bid)
        return out


def fill_payload(trace, strategy=None, adversarial_view: bool = False) -> None:
    """Assign votes (chains 1..m) and reference links (chain 0).

    Honest payload follows the protocol rules and is a pure function of the
    structural trace; adversarial payload comes from the strategy hooks
    (empty by default). With ``adversarial_view`` on, the strategy may steer
    an honest vote to any proposer published inside the ambiguity band
    (one delay before the voter's mining time).
    """
    m = trace.params.m
    if m < 1:
        return
    delta = trace.params.delta_net
    index = _prism_index(trace)
    ctx = PayloadContext(trace, index)
    ripe_r = index.ripe_r.tolist()
    ripe_h = index.ripe_h
    choice = index.choice
    override = getattr(strategy, "override_vote", None) if adversarial_view else None
    p_store = trace.store(0)

    for j in range(1, m + 1):
        store = trace.store(j)
        n = len(store)
        kind = store.kind
        parent = store.parent
        mined = store.mined
        if store.is_linear() and override is None:
            adv_ids = [bid for bid in range(1, n) if kind[bid] == ADVERSARIAL]
            adv_votes = {
                bid: tuple(strategy.adversarial_votes(ctx, j, bid)) if strategy else ()
                for bid in adv_ids
            }
            if all(not v for v in adv_votes.values()):
                _fill_votes_linear(trace, store, index, delta)
                continue
        ripe_of = np.zeros(n, dtype=np.int64)     # honest blocks: ripe count at this block
        pending: list[frozenset] = [frozenset()] * n
        empty = frozenset()
        for bid in range(1, n):
            if kind[bid] == HONEST:
                t = mined[bid]
                kb = bisect_right(ripe_r, t - delta)
                p = parent[bid]
                extra: set[int] = set()
                while p > 0 and kind[p] == ADVERSARIAL:
                    extra.update(h for h, _ in store.votes[p])
                    p = parent[p]
                base = int(ripe_of[p])
                pend = pending[p]
                avoid = extra | pend if (extra or pend) else empty
                window = ripe_h[base:kb]
                votes = []
                for h in sorted(int(x) for x in window):
                    if h in avoid:
                        continue
                    pick = int(choice[h])
                    if override is not None:
                        alt = override(ctx, j, bid, h, pick)
                        if alt is not None:
                            if p_store.height[alt] != h or not p_store.pub[alt] < t:
                                raise ValueError("override vote must name a proposer at the "
                                                 "height, published before the voter")
                            pick = int(alt)
                    votes.append((h, pick))
                store.votes[bid] = tuple(votes)
                ripe_of[bid] = kb
                if avoid:
                    consumed = {int(x) for x in window}
                    pending[bid] = frozenset(h for h in avoid if h not in consumed)
                else:
                    pending[bid] = empty
            else:
                votes = tuple(strategy.adversarial_votes(ctx, j, bid)) if strategy else ()
                store.votes[bid] = votes
                ripe_of[bid] = 0
                pending[bid] = empty

    _fill_refs(trace, strategy, ctx)


def _fill_votes_linear(trace, store, index: _PrismIndex, delta: float) -> None:
    """Vectorized vote assignment for a single-path voter chain whose
    adversarial blocks cast no votes: each honest block votes the ripe
    heights its latest honest ancestor had not reached."""
    kind = store.kind_array()
    mined = store.mined_array()
    n = len(store)
    ripe_r = index.ripe_r
    honest = np.flatnonzero(kind == HONEST)
    honest = honest[honest > 0]
    kb = np.searchsorted(ripe_r, mined[honest] - delta, side="right")
    base = np.concatenate([[0], kb[:-1]])
    choice = index.choice
    ripe_h = index.ripe_h
    votes = store.votes
    for pos in np.flatnonzero(kb > base):
        window = ripe_h[base[pos]:kb[pos]]
        votes[int(honest[pos])] = tuple(
            (h, int(choice[h])) for h in sorted(int(x) for x in window)
        )


def _fill_refs(trace, strategy, ctx) -> None:
    delta = trace.params.delta_net
    store0 = trace.store(0)
    # publication log over all chains, excluding genesis rows
    entries = []
    for chain in trace.chains:
        pub = chain.pub
        for bid in range(1, len(chain)):
            if pub[bid] != NEVER:
                entries.append((pub[bid], chain.chain_index, bid))
    entries.sort()
    pub_times = [e[0] for e in entries]

    kind = store0.kind
    parent = store0.parent
    mined = store0.mined

    def expand(covered: set, seeds, floor_pub: float) -> None:
        stack = list(seeds)
        while stack:
            node = stack.pop()
            if node in covered:
                continue
            covered.add(node)
            c, i = node
            ch = trace.chains[c]
            if i > 0 and ch.pub[i] <= floor_pub:
                continue  # everything it reaches is older still
            if i > 0:
                stack.append((c, ch.parent[i]))
            for h, pid in ch.votes[i]:
                stack.append((0, pid))
            for ref in ch.refs[i]:
                stack.append((ref[0], ref[1]))

    for bid in range(1, len(store0)):
        if kind[bid] != HONEST:
            store0.refs[bid] = tuple(strategy.adversarial_refs(ctx, bid)) if strategy else ()
            continue
        cutoff = mined[bid] - delta
        a = parent[bid]
        while a > 0 and kind[a] == ADVERSARIAL:
            a = parent[a]
        cutoff_a = mined[a] - delta if a > 0 else 0.0
        lo = bisect_right(pub_times, cutoff_a)
        hi = bisect_right(pub_times, cutoff)
        covered: set = set()
        expand(covered, [(0, parent[bid])], cutoff_a)
        refs = []
        for _, c, i in entries[lo:hi]:
            if (c, i) not in covered:
                refs.append((c, i))
                expand(covered, [(c, i)], cutoff_a)
        store0.refs[bid] = tuple(refs)


def honest_votes(trace, chain_index: int, bid: int) -> list[Vote]:
    """Reference recomputation of an honest voter block's votes: every proposer
    height first published at least one delay before the block's mining time
    and not voted anywhere in the block's ancestry, choosing the
    earliest-published proposer (ties by lowest id)."""
    store = trace.store(chain_index)
    if store.kind[bid] != HONEST:
        raise ValueError("reference votes are defined for honest blocks")
    t = store.mined[bid]
    delta = trace.params.delta_net
    index = _prism_index(trace)
    voted: set[int] = set()
    p = store.parent[bid]
    while p >= 0:
        voted.update(h for h, _ in store.votes[p])
        p = store.parent[p]
    out = []
    for h in sorted(int(x) for x in index.ripe_h):
        if index.r[h] <= t - delta and h not in voted:
            out.append(Vote(chain_index, bid, h, int(index.choice[h])))
    return out


def reference_links(trace, bid: int) -> list[tuple[int, int]]:
    """Reference recomputation of an honest proposer block's links: every
    non-genesis block published at least one delay before the block's mining
    time and not reachable from its parent or its earlier links."""
    store0 = trace.store(0)
    if store0.kind[bid] != HONEST:
        raise ValueError("reference links are defined for honest blocks")
    cutoff = store0.mined[bid] - trace.params.delta_net

    def closure(seeds) -> set:
        seen = set()
        stack = list(seeds)
        while stack:
            node = stack.pop()
            if node in seen:
                continue
            seen.add(node)
            c, i = node
            ch = trace.chains[c]
            if i > 0:
                stack.append((c, ch.parent[i]))
            for h, pid in ch.votes[i]:
                stack.append((0, pid))
            for ref in ch.refs[i]:
                stack.append((ref[0], ref[1]))
        return seen

    candidates = []
    for chain in trace.chains:
        for i in range(1, len(chain)):
            if chain.pub[i] <= cutoff:
                candidates.append((chain.pub[i], chain.chain_index, i))
    candidates.sort()
    covered = closure([(0, store0.parent[bid])])
    refs = []
    for _, c, i in candidates:
        if (c, i) not in covered:
            refs.append((c, i))
            covered |= closure([(c, i)])
    return refs


def best_credible_tip(trace, chain_index: int, t: float) -> int:
    """The credible tip the default honest tie-break prefers at time t."""
    st = _stats(trace, chain_index)
    ids = st.credible_ids(t)
    if len(ids) == 0:
        raise ValueError("no credible chain; genesis should always qualify")
    heights = st.height[ids]
    top = ids[heights == heights.max()]
    return int(min(top, key=lambda b: (st.cp[b], b)))


def _first_votes(trace, chain_index: int, elector: int) -> dict[int, int]:
    """First vote per height in the elector chain's lineage."""
    store = trace.store(chain_index)
    st = _stats(trace, chain_index)
    if st.linear:
        key = ("vote_index", chain_index)
        idx = trace._cache.get(key)
        if idx is None:
            idx = {}
            for bid in range(1, len(store)):
                for h, pid in store.votes[bid]:
                    if h not in idx:
                        idx[h] = (bid, pid)
            trace._cache[key] = idx
        return {h: pid for h, (bid, pid) in idx.items() if bid <= elector}
    lineage = []
    b = elector
    while b >= 0:
        lineage.append(b)
        b = store.parent[b]
    out: dict[int, int] = {}
    for bid in reversed(lineage):
        for h, pid in store.votes[bid]:
            if h not in out:
                out[h] = pid
    return out


def leader_sequence(trace, t: float, electors=None) -> LeaderSequence:
    """Elect one leader per proposer height 1..n at time ``t``.

    ``n`` is the highest proposer height published one delay before ``t``.
    ``electors`` gives one credible voter tip per chain 1..m (default: the
    tip the honest tie-break prefers). Per height, only each chain's first
    vote counts; the leader is the published proposer with the most votes,
    ties and zero-vote heights resolved by earliest publication then lowest
    id. Votes naming withheld proposers are tallied but cannot elect one.
    """
    params = trace.params
    m = params.m
    if m < 1:
        raise ValueError("leader sequences need at least one voter chain")
    delta = params.delta_net
    st0 = _stats(trace, 0)
    n = st0.max_pub_height(t - delta)
    if electors is None:
        electors = [best_credible_tip(trace, j, t) for j in range(1, m + 1)]
    electors = [int(e) for e in electors]
    if len(electors) != m:
        raise ValueError("need one elector per voter chain")
    for j, e in enumerate(electors, start=1):
        stj = _stats(trace, j)
        if stj.cp[e] > t or stj.height[e] < stj.max_pub_height(t - delta):
            raise ValueError(f"elector {e} on chain {j} is not credible at {t}")

    index = _prism_index(trace)
    store0 = trace.store(0)
    if st0.linear:
        # one proposer per height, so the plurality winner is forced and the
        # election is elector-independent (the general tally below agrees)
        return LeaderSequence(
            leaders=tuple(range(1, n + 1)), elected_at=float(t), electors=tuple(electors)
        )
    votes_by_chain = [_first_votes(trace, j, electors[j - 1]) for j in range(1, m + 1)]
    leaders = []
    for h in range(1, n + 1):
        tally: dict[int, int] = {}
        for fv in votes_by_chain:
            pid = fv.get(h)
            if pid is not None:
                tally[pid] = tally.get(pid, 0) + 1
        cands = [
            bid
            for bid in (index.proposers_at[h] if h < len(index.proposers_at) else [])
            if st0.cp[bid] <= t
        ]
        if not cands:
            raise ValueError(f"no published proposer at height {h} by {t}")
        leaders.append(
            min(cands, key=lambda b: (-tally.get(b, 0), store0.pub[b], b))
        )
    return LeaderSequence(leaders=tuple(leaders), elected_at=float(t), electors=tuple(electors))


def _edges(trace, c: int, i: int):
    ch = trace.chains[c]
    if i > 0:
        yield (c, ch.parent[i])
    for _, pid in ch.votes[i]:
        yield (0, pid)
    for ref in ch.refs[i]:
        yield (ref[0], ref[1])


def build_ledger(trace, seq: LeaderSequence) -> Ledger:
    """Unroll a leader sequence into its transaction ledger.

    Epoch h adds the blocks reachable from leader h (by parent, vote, and
    reference links) that are published by the election time and not already
    included; within an epoch, blocks are ordered dependencies-first with
    ties by (chain, id), and a transaction is kept only if its id is new and
    none of its inputs was spent by an earlier kept transaction.
    """
    t = seq.elected_at
    visited: set = set()
    epochs = []
    txs: list[Tx] = []
    sources = []
    spent: set[int] = set()
    seen: set[str] = set()
    for h, leader in enumerate(seq.leaders, start=1):
        stack = [(0, leader)]
        nodes = []
        while stack:
            node = stack.pop()
            if node in visited:
                continue
            visited.add(node)
            c, i = node
            if trace.chains[c].pub[i] > t:
                continue
            if i > 0:
                nodes.append(node)
            stack.extend(_edges(trace, c, i))
        order = _topo(trace, nodes, t)
        blocks = []
        for c, i in order:
            blocks.append((c, i))
            for tx in trace.chains[c].txs[i]:
                if tx.id in seen:
                    continue
                if any(inp in spent for inp in tx.inputs):
                    continue
                seen.add(tx.id)
                spent.update(tx.inputs)
                txs.append(tx)
                sources.append(((c, i), h))
        epochs.append((h, tuple(blocks)))
    return Ledger(txs=tuple(txs), sources=tuple(sources), epochs=tuple(epochs))


def _topo(trace, nodes, t: float):
    nodeset = set(nodes)
    indeg = {x: 0 for x in nodes}
    children: dict[tuple, list] = {x: [] for x in nodes}
    for x in nodes:
        for e in _edges(trace, *x):
            if e in nodeset and e != x:
                indeg[x] += 1
                children[e].append(x)
    heap = [x for x, d in indeg.items() if d == 0]
    heapq.heapify(heap)
    out = []
    while heap:
        x = heapq.heappop(heap)
        out.append(x)
        for y in children[x]:
            indeg[y] -= 1
            if indeg[y] == 0:
                heapq.heappush(heap, y)
    if len(out) != len(nodes):  # defensive: reference cycles cannot normally form
        rest = sorted(nodeset - set(out))
        out.extend(rest)
    return out


def _tx_index(trace):
    got = trace._cache.get("tx_index")
    if got is None:
        by_id: dict[str, tuple] = {}
        by_input: dict[int, list] = {}
        for chain in trace.chains:
            for bid in range(1, len(chain)):
                pub = chain.pub[bid]
                for tx in chain.txs[bid]:
                    rec = by_id.get(tx.id)
                    if rec is None or pub < rec[1]:
                        by_id[tx.id] = (tx, pub)
        for tx, pub in by_id.values():
            for inp in tx.inputs:
                by_input.setdefault(inp, []).append((tx.id, pub))
        got = (by_id, by_input)
        trace._cache["tx_index"] = got
    return got


def tx_credible_until(trace, tx_id: str, t: float) -> bool:
    """True iff the transaction is in some block published by ``t`` and no
    conflicting transaction is in any block published by ``t``."""
    by_id, by_input = _tx_index(trace)
    rec = by_id.get(tx_id)
    if rec is None or rec[1] > t:
        return False
    tx = rec[0]
    for inp in tx.inputs:
        for other_id, pub in by_input.get(inp, ()):
            if other_id != tx_id and pub <= t:
                return False
    return True


def check_prism_theorems(
    trace,
    t: float,
    k: int,
    params=None,
    r_grid=None,
    elector_samples: int = 2,
    seed: int = 0,
    growth_s: float = 0.0,
) -> dict[str, CheckResult]:
    """Evaluate the four voting-protocol checks on one trace.

    Returns results for leader-sequence growth, leader-sequence quality,
    leader-prefix permanence, and transaction permanence. Precondition
    violations are reported in the results, never enforced.
    """
    from .sim import rng_stream

    params = params or trace.params
    m = params.m
    delta = params.delta_net
    dp = derive(params.alpha, delta, params.delta_typ)
    horizon = trace.params.horizon
    rng = rng_stream(seed, 9)

    proxies = {}
    proxy_notes = []
    s_ev = t - k / (2.0 * params.alpha) + delta
    for j in range(m + 1):
        try:
            proxies[j] = typical_event_proxy(trace, j, s_ev, t - delta, params)
        except IntervalTooShort:
            proxies[j] = False
            proxy_notes.append(f"chain {j}: event interval below the minimum")

    st0 = _stats(trace, 0)
    results: dict[str, CheckResult] = {}

    # leader-sequence growth on (growth_s, t]
    counts = interval_counts(trace, 0, growth_s + delta, t - delta)
    growth_event = good_event(counts, growth_s + delta, t - delta, params).ok
    n_t = st0.max_pub_height(t - delta)
    n_s = st0.max_pub_height(growth_s - delta) if growth_s > 0 else 0
    base = max(n_s, st0.max_pub_height(growth_s))
    need = base + dp.growth_coeff * dp.g * params.alpha * (t - growth_s)
    results["leader_growth"] = CheckResult(growth_event, n_t >= need)

    def electors_at(r):
        yield None  # the default election
        for _ in range(elector_samples):
            picks = []
            for j in range(1, m + 1):
                ids = _stats(trace, j).credible_ids(r)
                picks.append(int(ids[rng.integers(len(ids))]))
            yield picks

    # leader-sequence quality: adversarial share of the last k leaders
    kinds0 = trace.store(0).kind
    q_ok = True
    for electors in electors_at(t):
        seq = leader_sequence(trace, t, electors)
        kk = min(k, seq.height)
        adv = sum(1 for b in seq.leaders[seq.height - kk:] if kinds0[b] == ADVERSARIAL)
        if adv > dp.g * k:
            q_ok = False
            break
    results["leader_quality"] = CheckResult(
        bool(proxies[0]), q_ok, notes=tuple(proxy_notes)
    )

    grid = sorted({float(t), float(horizon), *map(float, r_grid or ())})
    grid = [r for r in grid if t <= r <= horizon]

    # leader-prefix permanence at the highest eligible height
    wait = k / (dp.growth_coeff * (1.0 - dp.g) * dp.g * params.alpha) if dp.g < 1 else math.inf
    index = _prism_index(trace)
    eligible = [
        int(h)
        for h in index.ripe_h
        if index.r[h] <= t - wait - delta
    ]
    h_star = max(eligible) if eligible else 0
    perm_pre = h_star >= 1
    perm_notes = list(proxy_notes)
    perm_event = all(proxies[j] for j in range(1, m + 1))
    perm_ok = True
    if perm_pre:
        reference = leader_sequence(trace, t).leaders[:h_star]
        for r in grid:
            for electors in electors_at(r):
                seq = leader_sequence(trace, r, electors)
                if seq.leaders[:h_star] != reference:
                    perm_ok = False
                    break
            if not perm_ok:
                break
    else:
        perm_notes.append("no proposer height is old enough for the permanence wait")
    results["leader_prefix"] = CheckResult(
        perm_event, perm_ok, preconditions_ok=perm_pre, notes=tuple(perm_notes)
    )

    # transaction permanence for the earliest credible transaction
    tx_event = all(proxies[j] for j in range(m + 1))
    denom = dp.growth_coeff ** 2 * dp.g ** 2 * (1.0 - dp.g) ** 2 * params.alpha
    r_pub = t - delta - 2.0 * (k + 1) / denom if denom > 0 else -math.inf
    tx_notes = list(proxy_notes)
    tx_pre = r_pub > 0
    tx_ok = True
    if tx_pre:
        by_id, _ = _tx_index(trace)
        target = None
        for tx_id, (tx, pub) in sorted(by_id.items(), key=lambda kv: (kv[1][1], kv[0])):
            if pub <= r_pub and tx_credible_until(trace, tx_id, t):
                target = tx_id
                break
        if target is None:
            tx_notes.append("no credible transaction published early enough")
        else:
            for r in grid:
                for electors in electors_at(r):
                    seq = leader_sequence(trace, r, electors)
                    if target not in set(build_ledger(trace, seq).tx_ids()):
                        tx_ok = False
                        break
                if not tx_ok:
                    break
    else:
        tx_notes.append("permanence wait exceeds the trace start; transaction check skipped")
    results["tx_permanence"] = CheckResult(
        tx_event, tx_ok, preconditions_ok=tx_pre, notes=tuple(tx_notes)
    )
    if k < 160.0 * params.alpha * (1.0 + delta) / params.delta_typ:
        for name in ("leader_quality", "leader_prefix", "tx_permanence"):
            res = results[name]
            results[name] = CheckResult(
                res.event_held,
                res.predicate_held,
                preconditions_ok=False,
                notes=res.notes + (f"k={k} below the depth minimum",),
            )
    return results
