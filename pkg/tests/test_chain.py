"""Block store invariants: heights, depth queries, credibility, serialization."""

import numpy as np
import pytest

from chainlab.chain import (
    ADVERSARIAL,
    HONEST,
    NEVER,
    Block,
    ChainStore,
    CrossChainParent,
    DepthExceedsHeight,
    NonCausalParent,
    Tx,
    UnknownParent,
    append_block,
    block_from_row,
    block_to_row,
    credible_tips,
    k_deep,
)
from chainlab.sim import ProtocolParams, Trace, run_simulation


def linear_store(times, kinds=None):
    store = ChainStore(0)
    for i, t in enumerate(times):
        kind = HONEST if kinds is None else kinds[i]
        store.append(kind, i, t, publish_time=t)
    return store


def test_append_first_extension():
    store = ChainStore(0)
    bid = store.append(HONEST, 0, 1.0, publish_time=1.0)
    assert bid == 1
    assert store.height[1] == 1


def test_append_equal_time_parent_rejected():
    store = linear_store([1.0])
    with pytest.raises(NonCausalParent):
        store.append(HONEST, 1, 1.0)


def test_append_unknown_parent():
    store = ChainStore(0)
    with pytest.raises(UnknownParent):
        store.append(HONEST, 5, 1.0)


def test_append_block_cross_chain():
    store = ChainStore(0)
    block = Block(id=1, chain=2, kind=HONEST, parent=0, mined_time=1.0, publish_time=1.0)
    with pytest.raises(CrossChainParent):
        append_block(store, block)


def test_heights_by_parent_walk():
    store = linear_store([1.0, 2.0, 3.5, 4.0, 9.0])
    assert store.height[1:] == [1, 2, 3, 4, 5]
    for bid in range(len(store)):
        # independent recount: walk to genesis
        steps, b = 0, bid
        while store.parent[b] >= 0:
            b = store.parent[b]
            steps += 1
        assert steps == store.height[bid]


def test_random_store_height_additivity():
    rng = np.random.default_rng(7)
    store = ChainStore(0)
    t = 0.0
    for _ in range(300):
        t += float(rng.exponential(1.0))
        parent = int(rng.integers(len(store)))
        store.append(int(rng.integers(2)), parent, t, publish_time=t)
    for bid in range(1, len(store)):
        assert store.height[bid] == store.height[store.parent[bid]] + 1


def test_k_deep_examples():
    store = linear_store([1.0, 2.0, 3.0])
    assert k_deep(store, 3, 1) == (3, 2)
    assert k_deep(store, 3, 3) == (1, 0)
    with pytest.raises(DepthExceedsHeight):
        k_deep(store, 3, 4)
    with pytest.raises(DepthExceedsHeight):
        k_deep(store, 3, 0)


def test_k_deep_parent_walk_oracle():
    store = linear_store([float(i) for i in range(1, 21)])
    for k in range(1, 21):
        block, prefix = k_deep(store, 20, k)
        b = 20
        for _ in range(k - 1):
            b = store.parent[b]
        assert block == b
        assert prefix == store.parent[b]


def test_credible_tips_sole_genesis():
    store = ChainStore(0)
    assert credible_tips(store, 0.5, 0.3) == [0]


def test_credible_tips_forked_example():
    store = ChainStore(0)
    store.append(HONEST, 0, 1.0, publish_time=1.0)   # b1, height 1
    store.append(HONEST, 0, 1.2, publish_time=1.2)   # b2, height 1, forking
    assert credible_tips(store, 1.25, 0.3) == [0, 1, 2]  # cutoff 0.95 sees height 0
    assert credible_tips(store, 1.5, 0.3) == [1, 2]      # cutoff 1.2 sees height 1


def test_withheld_block_never_credible():
    store = ChainStore(0)
    store.append(HONEST, 0, 1.0, publish_time=1.0)
    store.append(ADVERSARIAL, 1, 1.5)  # never published
    for t in (1.0, 2.0, 10.0, 1e6):
        assert 2 not in credible_tips(store, t, 0.2)


def test_chain_publication_requires_ancestors():
    # child published while its parent is withheld: the chain is not published
    store = ChainStore(0)
    store.append(ADVERSARIAL, 0, 1.0)             # withheld parent
    store.append(ADVERSARIAL, 1, 2.0, publish_time=2.5)
    assert 2 not in credible_tips(store, 3.0, 0.1)
    store.set_publish(1, 4.0)
    cp = store.chain_pub()
    assert cp[1] == 4.0 and cp[2] == 4.0
    assert 2 in credible_tips(store, 4.0, 0.1)


def test_monotone_credibility_floor():
    params = ProtocolParams(alpha=2.0, beta=0.8, delta_net=0.2, horizon=60.0)
    trace = run_simulation(params, strategy={"name": "private-chain", "params": {"k_confirm": 2}}, seed=11)
    store = trace.store()
    prev = -1
    for t in np.linspace(0.0, 60.0, 121):
        tips = credible_tips(store, float(t), 0.2)
        top = max(store.height[b] for b in tips)
        assert top >= prev
        prev = top


def test_honest_chain_credible_at_mining_time():
    params = ProtocolParams(alpha=1.5, beta=0.5, delta_net=0.3, horizon=80.0)
    trace = run_simulation(params, strategy="selfish-mining", seed=3)
    store = trace.store()
    for bid in range(1, len(store)):
        if store.kind[bid] == HONEST:
            assert bid in credible_tips(store, store.mined[bid], 0.3)


def test_row_roundtrip():
    store = ChainStore(3)
    store.append(
        ADVERSARIAL,
        0,
        1.25,
        votes=((2, 5),),
        refs=((0, 7),),
        txs=(Tx("t3.1", (4,), (9,)),),
    )
    row = block_to_row(store, 1)
    block = block_from_row(row)
    assert block.chain == 3 and block.kind == ADVERSARIAL
    assert block.publish_time == NEVER
    assert block.votes == ((2, 5),) and block.refs == ((0, 7),)
    assert block.txs[0].inputs == (4,)


def test_trace_jsonl_roundtrip():
    params = ProtocolParams(alpha=2.0, beta=0.5, delta_net=0.1, m=1, horizon=25.0)
    trace = run_simulation(params, strategy="censor-votes", seed=5, tx_mode="unique")
    text = trace.dumps()
    back = Trace.from_jsonl(text, params, seed=5)
    assert back.dumps() == text


def test_from_arrays_matches_append():
    times = np.array([0.5, 1.5, 2.25])
    built = linear_store(list(times))
    adopted = ChainStore.from_arrays(
        0,
        kind=np.zeros(4, dtype=np.int8),
        parent=np.arange(4) - 1,
        mined=np.concatenate([[0.0], times]),
        pub=np.concatenate([[0.0], times]),
        height=np.arange(4),
    )
    assert [block_to_row(adopted, i) for i in range(4)] == [
        block_to_row(built, i) for i in range(4)
    ]
    # appending to an adopted store keeps working
    adopted.append(HONEST, 3, 5.0, publish_time=5.0)
    assert adopted.height[4] == 4
