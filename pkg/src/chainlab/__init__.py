"""chainlab: continuous-time mining simulation and security-bound evaluation
for longest-chain and proposer/voter backbone protocols.

The library has three layers: closed-form bound evaluation (`bounds`),
seeded trace simulation under adversarial strategies (`chain`, `sim`,
`strategies`), and trace analysis that classifies blocks, evaluates the
count events, and checks every theorem predicate (`analysis`, `prism`).
`harness` orchestrates Monte Carlo experiments; `cli` exposes everything
on the command line.
"""

from .bounds import (
    Admissibility,
    DerivedParams,
    EpsilonTooLarge,
    EventBounds,
    InvalidDelta,
    admissible,
    depth_bound,
    derive,
    event_bounds,
    prism_leader_time,
    prism_tx_time,
)
from .chain import (
    ADVERSARIAL,
    HONEST,
    NEVER,
    Block,
    ChainError,
    ChainStore,
    CrossChainParent,
    DepthExceedsHeight,
    NonCausalParent,
    Tx,
    UnknownParent,
    append_block,
    credible_tips,
    k_deep,
)
from .sim import ProtocolParams, StrategyViolation, Trace, run_simulation, sample_poisson_arrivals
from .strategies import (
    STRATEGIES,
    CensorVotes,
    NullAdversary,
    PrivateChain,
    SelfishMining,
    Strategy,
    make_strategy,
)
from .analysis import (
    CheckResult,
    GoodEvent,
    HonestBlockFlags,
    IntervalCounts,
    IntervalTooShort,
    check_common_prefix,
    check_growth,
    check_quality,
    classify,
    good_event,
    interval_counts,
    structural_lemmas,
    typical_event_proxy,
)
from .prism import (
    LeaderSequence,
    Ledger,
    Vote,
    best_credible_tip,
    build_ledger,
    check_prism_theorems,
    first_publication_time,
    honest_votes,
    leader_sequence,
    reference_links,
    sortition,
    tx_credible_until,
)

__version__ = "0.1.0"
