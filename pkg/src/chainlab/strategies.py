"""Adversary strategies.

A strategy is a state machine driven by the events it can observe (its own
budget points, honest block arrivals) plus the public view; it never sees
future arrivals. It decides whether to mine at each budget point, which
parent to build on, and when to publish its withheld blocks.
"""

from __future__ import annotations

__all__ = [
    "Strategy",
    "NullAdversary",
    "PrivateChain",
    "SelfishMining",
    "CensorVotes",
    "make_strategy",
    "STRATEGIES",
]


class Strategy:
    """Base strategy: does nothing at every budget point."""

    name = "null"
    #: immediate-publication, best-tip-extension strategies admit the
    #: vectorized engine
    fast_path = False

    def reset(self, params, rng) -> None:
        self.params = params
        self.rng = rng

    def mines_every_budget_point(self) -> bool:
        return False

    def on_budget(self, view, chain: int, t: float):
        """Return a parent block id to mine on, or None to skip the point."""
        return None

    def on_self_block(self, view, chain: int, bid: int) -> None:
        pass

    def on_honest_block(self, view, chain: int, bid: int) -> None:
        pass

    def choose_honest_tip(self, view, chain: int, candidates: list[int]) -> int:
        """Steering hook: pick among the maximum-height credible tips."""
        return candidates[0]

    # payload hooks for adversarial blocks on voting chains
    def adversarial_votes(self, ctx, chain: int, bid: int) -> tuple:
        return ()

    def adversarial_refs(self, ctx, bid: int) -> tuple:
        return ()

    def trial_stats(self) -> dict:
        return {}


class NullAdversary(Strategy):
    name = "null"
    fast_path = True


class PrivateChain(Strategy):
    """Double-spend attack: fork privately from the block preceding the target
    transaction's block; publish only once the fork is strictly longer than the
    public chain and the target is at least ``k_confirm`` deep publicly."""

    name = "private-chain"

    def __init__(self, k_confirm: int = 6, chain: int = 0):
        if k_confirm < 1:
            raise ValueError("k_confirm must be >= 1")
        self.k_confirm = k_confirm
        self.chain = chain

    def reset(self, params, rng) -> None:
        super().reset(params, rng)
        self.target: int | None = None
        self.fork_root = 0
        self.fork: list[int] = []
        self.done = False
        self.success = False

    def on_budget(self, view, chain, t):
        if chain != self.chain or self.done or self.target is None:
            return None
        return self.fork[-1] if self.fork else self.fork_root

    def on_self_block(self, view, chain, bid):
        self.fork.append(bid)
        self._maybe_publish(view)

    def on_honest_block(self, view, chain, bid):
        if chain != self.chain or self.done:
            return
        if self.target is None:
            # the first honest block carries the transaction being double-spent
            self.target = bid
            self.fork_root = view.parent(chain, bid)
            return
        self._maybe_publish(view)

    def _target_depth(self, view) -> int:
        tip = view.best_tip(self.chain)
        h_tip = view.height(self.chain, tip)
        h_t = view.height(self.chain, self.target)
        if h_tip < h_t:
            return 0
        if view.ancestor_at_height(self.chain, tip, h_t) != self.target:
            return 0
        return h_tip - h_t + 1

    def _maybe_publish(self, view) -> None:
        if not self.fork:
            return
        fork_h = view.height(self.chain, self.fork[-1])
        if fork_h <= view.best_height(self.chain):
            return
        if self._target_depth(view) < self.k_confirm:
            return
        for bid in self.fork:
            view.publish(self.chain, bid)
        self.done = True
        self.success = True

    def trial_stats(self) -> dict:
        return {"success": self.success}


class SelfishMining(Strategy):
    """Lead-based withhold-and-release.

    Mines on its private tip; on each honest block it compares its private
    height against the public height: behind, it abandons; level, it
    publishes the withheld remainder and races; one ahead (a lead of two cut
    down), it publishes everything and overrides; further ahead, it releases
    one matching-height block. Races are won only when the honest tie-break
    is adversary-steered.
    """

    name = "selfish-mining"

    def __init__(self, chain: int = 0):
        self.chain = chain

    def reset(self, params, rng) -> None:
        super().reset(params, rng)
        self.branch: list[int] = []
        self.unpublished: list[int] = []
        self.mine: set[int] = set()

    def on_budget(self, view, chain, t):
        if chain != self.chain:
            return None
        return self.branch[-1] if self.branch else view.best_tip(chain)

    def on_self_block(self, view, chain, bid):
        self.branch.append(bid)
        self.unpublished.append(bid)
        self.mine.add(bid)

    def on_honest_block(self, view, chain, bid):
        if chain != self.chain or not self.branch:
            return
        public_h = view.best_height(chain)
        private_h = view.height(chain, self.branch[-1])
        if private_h < public_h:
            self.branch.clear()
            self.unpublished.clear()
        elif private_h <= public_h + 1:
            for b in self.unpublished:
                view.publish(chain, b)
            self.unpublished.clear()
            if private_h == public_h + 1:
                # the published branch overrides; future mining continues on it
                pass
        else:
            while self.unpublished and view.height(chain, self.unpublished[0]) <= public_h:
                view.publish(chain, self.unpublished.pop(0))

    def choose_honest_tip(self, view, chain, candidates):
        for c in candidates:
            if c in self.mine:
                return c
        return candidates[0]


class CensorVotes(Strategy):
    """Voting-protocol censorship: mines openly on the best tip of every
    chain, publishing immediately, but its voter blocks carry no votes and
    its proposer blocks carry no reference links."""

    name = "censor-votes"
    fast_path = True

    def mines_every_budget_point(self) -> bool:
        return True

    def on_budget(self, view, chain, t):
        return view.best_tip(chain)

    def on_self_block(self, view, chain, bid):
        view.publish(chain, bid)


STRATEGIES = {
    "null": NullAdversary,
    "private-chain": PrivateChain,
    "selfish-mining": SelfishMining,
    "censor-votes": CensorVotes,
}


def make_strategy(spec) -> Strategy:
    """Accept a Strategy instance, a name, or {"name": ..., "params": {...}}."""
    if spec is None:
        return NullAdversary()
    if isinstance(spec, Strategy):
        return spec
    if isinstance(spec, str):
        name, kwargs = spec, {}
    elif isinstance(spec, dict):
        name = spec["name"]
        kwargs = dict(spec.get("params", {}))
    else:
        raise ValueError(f"cannot build a strategy from {spec!r}")
    try:
        cls = STRATEGIES[name]
    except KeyError:
        raise ValueError(f"unknown strategy {name!r}") from None
    return cls(**kwargs)
