"""Append-only block store with parent links, heights, and credibility queries.

Blocks on one chain are indexed densely in mining order (genesis is block 0).
A chain is identified by its tip block; a chain counts as published once every
block on it is published, so each block carries both its own publication time
and a derived whole-chain publication time.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "HONEST",
    "ADVERSARIAL",
    "NEVER",
    "Tx",
    "Block",
    "ChainStore",
    "ChainError",
    "UnknownParent",
    "NonCausalParent",
    "CrossChainParent",
    "DepthExceedsHeight",
    "append_block",
    "k_deep",
    "credible_tips",
    "block_to_row",
    "block_from_row",
]

HONEST = 0
ADVERSARIAL = 1
NEVER = math.inf

_KIND_NAMES = {HONEST: "honest", ADVERSARIAL: "adversarial"}
_KIND_CODES = {v: k for k, v in _KIND_NAMES.items()}


class ChainError(Exception):
    pass


class UnknownParent(ChainError):
    pass


class NonCausalParent(ChainError):
    """Parent mined at or after the child."""


class CrossChainParent(ChainError):
    """Parent lives on a different chain index."""


class DepthExceedsHeight(ChainError):
    pass


@dataclass(frozen=True)
class Tx:
    """A transaction: opaque id, the outpoints it spends, the outpoints it creates."""

    id: str
    inputs: tuple[int, ...]
    outputs: tuple[int, ...] = ()

    def conflicts(self, other: "Tx") -> bool:
        return self.id != other.id and bool(set(self.inputs) & set(other.inputs))


@dataclass(frozen=True)
class Block:
    id: int
    chain: int
    kind: int
    parent: int
    mined_time: float
    publish_time: float = NEVER
    votes: tuple[tuple[int, int], ...] = ()   # (proposer height, proposer id)
    refs: tuple[tuple[int, int], ...] = ()    # (chain, id)
    txs: tuple[Tx, ...] = ()

    @property
    def is_honest(self) -> bool:
        return self.kind == HONEST


class ChainStore:
    """Blocks of a single chain, stored column-wise.

    Stores are built by appending in mining order; analysis code reads the
    columns back as numpy arrays. One writer at a time; completed stores are
    safe to share read-only.
    """

    def __init__(self, chain_index: int = 0):
        self.chain_index = chain_index
        self.kind: list[int] = [HONEST]
        self.parent: list[int] = [-1]
        self.mined: list[float] = [0.0]
        self.pub: list[float] = [0.0]
        self.height: list[int] = [0]
        self.votes: list[tuple] = [()]
        self.refs: list[tuple] = [()]
        self.txs: list[tuple] = [()]
        self._arrays: dict[str, np.ndarray] = {}

    @classmethod
    def from_arrays(
        cls,
        chain_index: int,
        kind: np.ndarray,
        parent: np.ndarray,
        mined: np.ndarray,
        pub: np.ndarray,
        height: np.ndarray,
    ) -> "ChainStore":
        """Adopt prebuilt columns (genesis row included). The numeric columns
        stay numpy-backed; ``append`` converts them back to lists on demand."""
        store = cls.__new__(cls)
        store.chain_index = chain_index
        n = len(mined)
        store.kind = np.asarray(kind, dtype=np.int8)
        store.parent = np.asarray(parent, dtype=np.int64)
        store.mined = np.asarray(mined, dtype=np.float64)
        store.pub = np.asarray(pub, dtype=np.float64)
        store.height = np.asarray(height, dtype=np.int64)
        store.votes = [()] * n
        store.refs = [()] * n
        store.txs = [()] * n
        store._arrays = {
            "kind": store.kind,
            "parent": store.parent,
            "mined": store.mined,
            "pub": store.pub,
            "height": store.height,
        }
        return store

    def _listify(self) -> None:
        if isinstance(self.mined, np.ndarray):
            for name in ("kind", "parent", "mined", "pub", "height"):
                setattr(self, name, getattr(self, name).tolist())
            self._arrays.clear()

    def __len__(self) -> int:
        return len(self.mined)

    def append(
        self,
        kind: int,
        parent: int,
        mined_time: float,
        publish_time: float = NEVER,
        votes: tuple = (),
        refs: tuple = (),
        txs: tuple = (),
    ) -> int:
        self._listify()
        if not 0 <= parent < len(self.mined):
            raise UnknownParent(f"parent {parent} not in store of size {len(self.mined)}")
        if not self.mined[parent] < mined_time:
            raise NonCausalParent(
                f"parent mined at {self.mined[parent]}, child at {mined_time}"
            )
        if mined_time < self.mined[-1]:
            raise ValueError("blocks must be appended in mining order")
        if publish_time < mined_time:
            raise ValueError("publish_time must be >= mined_time")
        bid = len(self.mined)
        self.kind.append(kind)
        self.parent.append(parent)
        self.mined.append(mined_time)
        self.pub.append(publish_time)
        self.height.append(self.height[parent] + 1)
        self.votes.append(tuple(votes))
        self.refs.append(tuple(refs))
        self.txs.append(tuple(txs))
        self._arrays.clear()
        return bid

    def set_publish(self, bid: int, time: float) -> None:
        self._listify()
        if self.pub[bid] != NEVER:
            raise ValueError(f"block {bid} already published")
        if time < self.mined[bid]:
            raise ValueError("publish_time must be >= mined_time")
        self.pub[bid] = time
        self._arrays.pop("pub", None)
        self._arrays.pop("chain_pub", None)

    def set_payload(self, bid: int, votes: tuple = (), refs: tuple = (), txs: tuple | None = None) -> None:
        self.votes[bid] = tuple(votes)
        self.refs[bid] = tuple(refs)
        if txs is not None:
            self.txs[bid] = tuple(txs)

    def block(self, bid: int) -> Block:
        return Block(
            id=bid,
            chain=self.chain_index,
            kind=int(self.kind[bid]),
            parent=int(self.parent[bid]),
            mined_time=float(self.mined[bid]),
            publish_time=float(self.pub[bid]),
            votes=self.votes[bid],
            refs=self.refs[bid],
            txs=self.txs[bid],
        )

    # -- column access ----------------------------------------------------

    def _col(self, name: str, dtype) -> np.ndarray:
        arr = self._arrays.get(name)
        if arr is None or len(arr) != len(self.mined):
            arr = np.asarray(getattr(self, name), dtype=dtype)
            self._arrays[name] = arr
        return arr

    def kind_array(self) -> np.ndarray:
        return self._col("kind", np.int8)

    def parent_array(self) -> np.ndarray:
        return self._col("parent", np.int64)

    def mined_array(self) -> np.ndarray:
        return self._col("mined", np.float64)

    def pub_array(self) -> np.ndarray:
        return self._col("pub", np.float64)

    def height_array(self) -> np.ndarray:
        return self._col("height", np.int64)

    def chain_pub(self) -> np.ndarray:
        """Whole-chain publication time per block: max own publication over the
        path to genesis (infinite while any ancestor is withheld)."""
        arr = self._arrays.get("chain_pub")
        if arr is not None and len(arr) == len(self.mined):
            return arr
        pub = self.pub_array()
        if self.is_linear():
            cp = np.maximum.accumulate(pub)
        else:
            parent = self.parent
            cp = pub.copy()
            for i in range(1, len(cp)):
                p = cp[parent[i]]
                if p > cp[i]:
                    cp[i] = p
        self._arrays["chain_pub"] = cp
        return cp

    def is_linear(self) -> bool:
        """True when every block extends its predecessor (a single path)."""
        arr = self._arrays.get("linear")
        if arr is None or arr.shape[0] != len(self.mined):
            parent = self.parent_array()
            flag = bool(np.all(parent[1:] == np.arange(len(parent) - 1)))
            arr = np.full(len(self.mined), flag)
            self._arrays["linear"] = arr
        return bool(arr[0]) if len(arr) else True

    # -- queries -----------------------------------------------------------

    def ancestor_at_height(self, bid: int, h: int) -> int:
        if h > self.height[bid] or h < 0:
            raise DepthExceedsHeight(f"block {bid} has height {self.height[bid]}, asked {h}")
        if self.is_linear():
            return h
        b = bid
        while self.height[b] > h:
            b = self.parent[b]
        return b

    def k_deep(self, tip: int, k: int) -> tuple[int, int]:
        """The k-deep block of chain ``tip`` and the tip of its k-deep prefix."""
        h = self.height[tip]
        if not 1 <= k <= h:
            raise DepthExceedsHeight(f"k={k} outside 1..height({tip})={h}")
        block = self.ancestor_at_height(tip, h - k + 1)
        return block, self.parent[block]

    def max_height_published_by(self, t: float) -> int:
        cp = self.chain_pub()
        mask = cp <= t
        if not mask.any():
            return 0
        return int(self.height_array()[mask].max())

    def credible_tips(self, t: float, delta_net: float) -> list[int]:
        """Blocks whose chain is published by ``t`` and at least as high as every
        chain published by ``t - delta_net``."""
        cp = self.chain_pub()
        floor = self.max_height_published_by(t - delta_net)
        hits = np.flatnonzero((cp <= t) & (self.height_array() >= floor))
        return hits.tolist()

    def is_ancestor(self, anc: int, desc: int) -> bool:
        ha = self.height[anc]
        if ha > self.height[desc]:
            return False
        return self.ancestor_at_height(desc, ha) == anc


def append_block(store: ChainStore, block: Block) -> int:
    """Append a Block record, enforcing the cross-chain guard."""
    if block.chain != store.chain_index:
        raise CrossChainParent(
            f"block for chain {block.chain} appended to store {store.chain_index}"
        )
    return store.append(
        block.kind,
        block.parent,
        block.mined_time,
        block.publish_time,
        block.votes,
        block.refs,
        block.txs,
    )


def k_deep(store: ChainStore, tip: int, k: int) -> tuple[int, int]:
    return store.k_deep(tip, k)


def credible_tips(store: ChainStore, t: float, delta_net: float) -> list[int]:
    return store.credible_tips(t, delta_net)


# -- trace row serialization ----------------------------------------------


def block_to_row(store: ChainStore, bid: int) -> str:
    pub = float(store.pub[bid])
    row = {
        "chain": store.chain_index,
        "id": bid,
        "kind": _KIND_NAMES[int(store.kind[bid])],
        "parent": int(store.parent[bid]) if bid else None,
        "t_mined": float(store.mined[bid]),
        "t_pub": None if pub == NEVER else pub,
        "votes": [list(v) for v in store.votes[bid]],
        "refs": [list(r) for r in store.refs[bid]],
        "txs": [
            {"id": tx.id, "ins": list(tx.inputs), "outs": list(tx.outputs)}
            for tx in store.txs[bid]
        ],
    }
    return json.dumps(row, separators=(",", ":"))


def block_from_row(line: str) -> Block:
    row = json.loads(line)
    pub = row["t_pub"]
    return Block(
        id=row["id"],
        chain=row["chain"],
        kind=_KIND_CODES[row["kind"]],
        parent=-1 if row["parent"] is None else row["parent"],
        mined_time=row["t_mined"],
        publish_time=NEVER if pub is None else pub,
        votes=tuple((v[0], v[1]) for v in row["votes"]),
        refs=tuple((r[0], r[1]) for r in row["refs"]),
        txs=tuple(
            Tx(id=t["id"], inputs=tuple(t["ins"]), outputs=tuple(t["outs"]))
            for t in row["txs"]
        ),
    )
