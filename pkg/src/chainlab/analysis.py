"""Classify blocks, count intervals, evaluate events, and check theorem predicates.

All functions are pure over immutable traces. Per-chain derived arrays are
cached on the trace, so repeated queries on the same trace are cheap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bounds import derive
from .chain import ADVERSARIAL, HONEST

__all__ = [
    "IntervalTooShort",
    "IntervalCounts",
    "GoodEvent",
    "HonestBlockFlags",
    "CheckResult",
    "min_interval",
    "min_depth",
    "inner_typicality",
    "classify",
    "interval_counts",
    "good_event",
    "typical_event_proxy",
    "check_growth",
    "check_quality",
    "check_common_prefix",
    "structural_lemmas",
]

#: minimum interval length for the event lemmas, as a multiple of (1 + delay)/delta
MIN_INTERVAL_FACTOR = 80.0
#: minimum confirmation depth for the depth theorems, times alpha*(1 + delay)/delta
DEPTH_FACTOR = 160.0


class IntervalTooShort(ValueError):
    """Interval shorter than the event lemmas allow."""


def min_interval(params) -> float:
    return MIN_INTERVAL_FACTOR * (1.0 + params.delta_net) / params.delta_typ


def min_depth(params) -> float:
    return DEPTH_FACTOR * params.alpha * (1.0 + params.delta_net) / params.delta_typ


def inner_typicality(delta_typ: float) -> float:
    """Inner factor for the integer-grid event: the largest value such that
    grid membership implies the real-interval event once the interval exceeds
    the minimum length ((1-x)(1-d/40) >= 1-d and (1+x)(1+d/40) <= 1+d)."""
    return (39.0 * delta_typ / 40.0) / (1.0 + delta_typ / 40.0)


@dataclass(frozen=True)
class IntervalCounts:
    """Honest (n), lagger (x), loner (y), adversarial (z) counts on (s, t]."""

    n: int
    x: int
    y: int
    z: int


@dataclass(frozen=True)
class GoodEvent:
    e1: bool
    e2: bool
    e3: bool
    e4: bool

    @property
    def ok(self) -> bool:
        return self.e1 and self.e2 and self.e3 and self.e4


@dataclass(frozen=True)
class HonestBlockFlags:
    """Per honest block (genesis excluded, per-chain mining order):
    lagger/loner indicators. A loner flag whose trailing window runs past the
    horizon is unobserved and masked out via ``loner_known``."""

    times: np.ndarray
    lagger: np.ndarray
    loner: np.ndarray
    loner_known: np.ndarray

    @property
    def lagger_times(self) -> np.ndarray:
        return self.times[self.lagger]

    @property
    def loner_times(self) -> np.ndarray:
        return self.times[self.loner & self.loner_known]


@dataclass(frozen=True)
class CheckResult:
    event_held: bool
    predicate_held: bool
    preconditions_ok: bool = True
    notes: tuple[str, ...] = ()


class _ChainStats:
    """Cached per-chain arrays and queries."""

    def __init__(self, trace, chain_index: int):
        store = trace.store(chain_index)
        params = trace.params
        self.horizon = params.horizon
        self.delta_net = params.delta_net
        self.kind = store.kind_array()
        self.mined = store.mined_array()
        self.height = store.height_array()
        self.parent = store.parent_array()
        self.cp = store.chain_pub()
        self.linear = store.is_linear()
        self.store = store

        honest = np.flatnonzero(self.kind == HONEST)
        honest = honest[honest > 0]
        self.honest_idx = honest
        self.honest_times = self.mined[honest]
        self.adv_times = np.sort(self.mined[self.kind == ADVERSARIAL])

        t = self.honest_times
        delta = self.delta_net
        prev = np.concatenate([[0.0], t[:-1]])  # genesis is an honest block at 0
        lagger = (t - prev) > delta
        nxt = np.concatenate([t[1:], [math.inf]])
        loner = lagger & ((nxt - t) > delta)
        known = np.ones(len(t), dtype=bool)
        if len(t) and t[-1] + delta > self.horizon:
            known[-1] = False
        self.flags = HonestBlockFlags(times=t, lagger=lagger, loner=loner, loner_known=known)
        self.lagger_times = t[lagger]
        self.loner_times = t[loner & known]

        order = np.argsort(self.cp, kind="stable")
        self.cp_sorted = self.cp[order]
        self.cp_runmax = np.maximum.accumulate(self.height[order])

        if self.linear:
            self.advcnt = np.cumsum(self.kind == ADVERSARIAL)
        else:
            advcnt = np.zeros(len(self.kind), dtype=np.int64)
            parent = self.parent
            kind = self.kind
            for i in range(1, len(advcnt)):
                advcnt[i] = advcnt[parent[i]] + (kind[i] == ADVERSARIAL)
            self.advcnt = advcnt

        self._grids: dict[int, tuple] = {}

    def max_pub_height(self, t: float) -> int:
        i = np.searchsorted(self.cp_sorted, t, side="right")
        return int(self.cp_runmax[i - 1]) if i else 0

    def credible_ids(self, t: float) -> np.ndarray:
        floor = self.max_pub_height(t - self.delta_net)
        return np.flatnonzero((self.cp <= t) & (self.height >= floor))

    def anc(self, bid: int, h: int) -> int:
        if self.linear:
            return h
        b = bid
        parent = self.parent
        height = self.height
        while height[b] > h:
            b = parent[b]
        return b

    def grid_counts(self, h_max: int):
        """Prefix counts of honest/lagger/loner/adversarial times at the
        integers 0..h_max."""
        got = self._grids.get(h_max)
        if got is not None:
            return got
        def prefix(times):
            if len(times) == 0:
                return np.zeros(h_max + 1)
            bins = np.bincount(np.ceil(times).astype(np.int64), minlength=h_max + 1)
            return np.cumsum(bins[: h_max + 1]).astype(np.float64)
        out = (
            prefix(self.honest_times),
            prefix(self.lagger_times),
            prefix(self.loner_times),
            prefix(self.adv_times),
        )
        self._grids[h_max] = out
        return out


def _stats(trace, chain_index: int) -> _ChainStats:
    key = ("stats", chain_index)
    got = trace._cache.get(key)
    if got is None:
        got = _ChainStats(trace, chain_index)
        trace._cache[key] = got
    return got


def classify(trace, chain_index: int = 0) -> HonestBlockFlags:
    """Lagger/loner flags for the honest blocks of one chain.

    A block is a lagger when no other honest block of the same chain is mined
    in the closed window of width ``delta_net`` ending at its mining time,
    and a loner when the following window is empty as well.
    """
    return _stats(trace, chain_index).flags


def interval_counts(trace, chain_index: int, s: float, t: float) -> IntervalCounts:
    """Counts over (s, t]; zero for s >= t by convention."""
    if s >= t:
        return IntervalCounts(0, 0, 0, 0)
    st = _stats(trace, chain_index)

    def count(times):
        return int(np.searchsorted(times, t, side="right") - np.searchsorted(times, s, side="right"))

    return IntervalCounts(
        n=count(st.honest_times),
        x=count(st.lagger_times),
        y=count(st.loner_times),
        z=count(st.adv_times),
    )


def good_event(counts: IntervalCounts, s: float, t: float, params) -> GoodEvent:
    """The four count conditions on (s, t], all strict."""
    if not s < t:
        raise ValueError("need s < t")
    dt = t - s
    a = params.alpha
    d = params.delta_typ
    g = math.exp(-a * params.delta_net)
    return GoodEvent(
        e1=(1 - d) * dt * a < counts.n < (1 + d) * dt * a,
        e2=(1 - d) * dt * g * a < counts.x,
        e3=(1 - d) * dt * g * g * a < counts.y,
        e4=counts.z < dt * params.beta + dt * g * g * a * d,
    )


def typical_event_proxy(
    trace,
    chain_index: int,
    s: float,
    t: float,
    params=None,
    horizon: float | None = None,
    inner: float | None = None,
) -> bool:
    """Countable stand-in for the typical event on (s, t].

    True iff the inner-factor good event holds on (k, l] for every integer
    pair with k in 0..ceil(s) and l in floor(t)..floor(horizon) (the grid
    past the horizon is unobservable and trimmed away). The per-pair checks
    are evaluated in separable form: each condition compares a prefix-count
    score array over the k-range against the l-range, which is equivalent to
    checking all pairs.

    Note: one published statement requires only (t-s) > 80/delta for the
    integer-existence device; the (1+delay) factor used here follows the
    legible depth-theorem constant and is the conservative choice.
    """
    params = params or trace.params
    if t - s <= min_interval(params):
        raise IntervalTooShort(
            f"interval {t - s} not above the minimum {min_interval(params)}"
        )
    if horizon is None:
        horizon = trace.params.horizon
    horizon = min(horizon, trace.params.horizon)
    d_inner = inner_typicality(params.delta_typ) if inner is None else inner
    st = _stats(trace, chain_index)

    h_max = int(math.floor(horizon + 1e-9))
    ks = max(int(math.ceil(s - 1e-9)), 0)
    tl = min(int(math.floor(t + 1e-9)), h_max)
    if ks >= tl:
        raise IntervalTooShort("integer grid collapsed; interval too short")

    n_, x_, y_, z_ = st.grid_counts(h_max)
    idx = np.arange(h_max + 1, dtype=np.float64)
    a = params.alpha
    g = math.exp(-a * params.delta_net)

    def lo_cond(counts, rate):
        f = counts - rate * idx
        return f[tl:].min() > f[: ks + 1].max()

    def hi_cond(counts, rate):
        f = counts - rate * idx
        return f[tl:].max() < f[: ks + 1].min()

    return bool(
        lo_cond(n_, (1 - d_inner) * a)
        and hi_cond(n_, (1 + d_inner) * a)
        and lo_cond(x_, (1 - d_inner) * g * a)
        and lo_cond(y_, (1 - d_inner) * g * g * a)
        and hi_cond(z_, params.beta + d_inner * g * g * a)
    )


def check_growth(trace, chain_index: int, s: float, t: float, params=None) -> CheckResult:
    """Growth theorem: under the good event on (s+D, t-D], every t-credible
    chain is at least growth_coeff*g*alpha*(t-s) higher than every s-credible
    chain."""
    params = params or trace.params
    if t - s <= min_interval(params):
        raise IntervalTooShort(
            f"interval {t - s} not above the minimum {min_interval(params)}"
        )
    delta = params.delta_net
    dp = derive(params.alpha, delta, params.delta_typ)
    counts = interval_counts(trace, chain_index, s + delta, t - delta)
    event = good_event(counts, s + delta, t - delta, params).ok

    st = _stats(trace, chain_index)
    min_h_t = st.max_pub_height(t - delta)   # the lowest t-credible height
    max_h_s = st.max_pub_height(s)           # the highest s-credible height
    required = max_h_s + dp.growth_coeff * dp.g * params.alpha * (t - s)
    return CheckResult(event_held=event, predicate_held=min_h_t >= required)


def _quality_event(trace, chain_index, t, k, params):
    notes = []
    s_ev = t - k / (2.0 * params.alpha) + params.delta_net
    t_ev = t - params.delta_net
    try:
        event = typical_event_proxy(trace, chain_index, s_ev, t_ev, params)
    except IntervalTooShort:
        event = False
        notes.append("event interval below the minimum; event treated as not held")
    return event, notes


def check_quality(trace, chain_index: int, t: float, k: int, params=None) -> CheckResult:
    """Quality theorem: under the typical-event proxy, at most g*k of the last
    k blocks of every t-credible chain are adversarial."""
    params = params or trace.params
    dp = derive(params.alpha, params.delta_net, params.delta_typ)
    notes = []
    pre = True
    if k < min_depth(params):
        pre = False
        notes.append(f"k={k} below the depth minimum {min_depth(params):.1f}")
    if t < k / (dp.growth_coeff * dp.g * params.alpha):
        pre = False
        notes.append("t below the depth theorem's minimum time")
    event, ev_notes = _quality_event(trace, chain_index, t, k, params)
    notes.extend(ev_notes)

    st = _stats(trace, chain_index)
    ceiling = dp.g * k
    ok = True
    for tip in st.credible_ids(t):
        h = int(st.height[tip])
        kk = min(k, h)
        if kk == 0:
            continue
        base = st.anc(int(tip), h - kk)
        if st.advcnt[tip] - st.advcnt[base] > ceiling:
            ok = False
            break
    return CheckResult(event, ok, preconditions_ok=pre, notes=tuple(notes))


def check_common_prefix(
    trace,
    chain_index: int,
    t: float,
    k: int,
    r_grid=None,
    params=None,
) -> CheckResult:
    """Common-prefix theorem: under the typical-event proxy, the (k-1)-deep
    prefix of every t-credible chain is an ancestor of every r-credible chain
    for all r in the grid (the grid always contains t and the horizon)."""
    params = params or trace.params
    dp = derive(params.alpha, params.delta_net, params.delta_typ)
    notes = []
    pre = True
    if k < min_depth(params):
        pre = False
        notes.append(f"k={k} below the depth minimum {min_depth(params):.1f}")
    if t < k / (dp.growth_coeff * dp.g * params.alpha):
        pre = False
        notes.append("t below the depth theorem's minimum time")
    event, ev_notes = _quality_event(trace, chain_index, t, k, params)
    notes.extend(ev_notes)

    st = _stats(trace, chain_index)
    horizon = trace.params.horizon
    grid = sorted({float(t), float(horizon), *map(float, r_grid or ())})
    grid = [r for r in grid if t <= r <= horizon]

    prefixes = []
    for tip in st.credible_ids(t):
        h = int(st.height[tip])
        prefixes.append(st.anc(int(tip), max(h - (k - 1), 0)))
    ok = True
    for r in grid:
        for c in st.credible_ids(r):
            hc = int(st.height[c])
            for q in prefixes:
                hq = int(st.height[q])
                if hc < hq or st.anc(int(c), hq) != q:
                    ok = False
                    break
            if not ok:
                break
        if not ok:
            break
    return CheckResult(event, ok, preconditions_ok=pre, notes=tuple(notes))


def structural_lemmas(trace, chain_index: int = 0, consensus_samples: int = 200) -> dict:
    """The three structural claims, checked exhaustively on one chain:
    laggers occupy distinct heights, a loner is the only honest block at its
    height, and heights seen by the credibility rule never regress across a
    propagation delay."""
    st = _stats(trace, chain_index)
    flags = st.flags
    honest_heights = st.height[st.honest_idx]

    lagger_heights = honest_heights[flags.lagger]
    distinct = len(lagger_heights) == len(np.unique(lagger_heights))

    loner_unique = True
    if len(honest_heights):
        counts = np.bincount(honest_heights)
        loner_heights = honest_heights[flags.loner & flags.loner_known]
        loner_unique = bool(np.all(counts[loner_heights] == 1)) if len(loner_heights) else True

    delta = st.delta_net
    sample_times = st.cp[np.isfinite(st.cp)]
    sample_times = np.unique(sample_times)
    if len(sample_times) > consensus_samples:
        pick = np.linspace(0, len(sample_times) - 1, consensus_samples).astype(int)
        sample_times = sample_times[pick]
    consensus = True
    for u in sample_times:
        u = float(u)
        ids_now = st.credible_ids(u)
        # (u + delta)-credible chains, with the cutoff (u + delta) - delta
        # simplified to u to avoid a float round-trip
        later = np.flatnonzero(
            (st.cp <= u + delta) & (st.height >= st.max_pub_height(u))
        )
        if len(ids_now) and len(later):
            if st.height[later].min() < st.height[ids_now].max():
                consensus = False
                break
    return {
        "distinct_lagger_heights": bool(distinct),
        "loner_unique": bool(loner_unique),
        "height_consensus": bool(consensus),
    }
