"""Monte Carlo orchestration: configs, per-trial seeding, checks, reports.

Per-trial seeds come from a splitmix64 hash of (base_seed + trial * golden),
so trials are reproducible and independent without coordination. Reports
aggregate one row per (trial, check) and carry exact one-sided
Clopper-Pearson intervals for bound comparisons.
"""

from __future__ import annotations

import json
import math
import time
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import beta as _beta

from .analysis import (
    check_common_prefix,
    check_growth,
    check_quality,
    classify,
    good_event,
    interval_counts,
    structural_lemmas,
    typical_event_proxy,
    IntervalTooShort,
)
from .bounds import derive
from .chain import ADVERSARIAL
from .prism import check_prism_theorems
from .sim import ProtocolParams, run_simulation
from .strategies import make_strategy

__all__ = [
    "ExperimentConfig",
    "ExperimentReport",
    "ConfigInvalid",
    "trial_seed",
    "clopper_pearson_upper",
    "clopper_pearson_interval",
    "run_experiment",
    "CHECKS",
]

#: splitmix64 increment; the documented per-trial mixing constant
GOLDEN64 = 0x9E3779B97F4A7C15
_MASK = (1 << 64) - 1


class ConfigInvalid(ValueError):
    pass


def splitmix64(x: int) -> int:
    x &= _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return (x ^ (x >> 31)) & _MASK


def trial_seed(base_seed: int, index: int) -> int:
    """Seed for one trial: splitmix64(base + index * golden)."""
    return splitmix64((base_seed + index * GOLDEN64) & _MASK)


def clopper_pearson_upper(failures: int, trials: int, confidence: float = 0.99) -> float:
    """Exact one-sided upper confidence bound on a binomial proportion."""
    if trials <= 0:
        return 1.0
    if failures >= trials:
        return 1.0
    return float(_beta.ppf(confidence, failures + 1, trials - failures))

def clopper_pearson_interval(successes: int, trials: int, confidence: float = 0.95):
    """Exact two-sided confidence interval on a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    a = (1.0 - confidence) / 2.0
    lo = 0.0 if successes == 0 else float(_beta.ppf(a, successes, trials - successes + 1))
    hi = 1.0 if successes == trials else float(_beta.ppf(1 - a, successes + 1, trials - successes))
    return (lo, hi)


# -- checks -------------------------------------------------------------------


def _row(check, trial, *, chain=0, s=None, t=None, k=None, event=None, pred=None, **extra):
    row = {
        "check": check,
        "trial": trial,
        "chain": chain,
        "s": s,
        "t": t,
        "k": k,
        "event_held": event,
        "predicate_held": pred,
    }
    row.update(extra)
    return row


def _check_growth(trace, spec, trial):
    res = check_growth(trace, spec.get("chain", 0), spec["s"], spec["t"])
    return [_row("growth", trial, chain=spec.get("chain", 0), s=spec["s"], t=spec["t"],
                 event=res.event_held, pred=res.predicate_held)]


def _check_quality(trace, spec, trial):
    res = check_quality(trace, spec.get("chain", 0), spec["t"], spec["k"])
    return [_row("quality", trial, chain=spec.get("chain", 0), t=spec["t"], k=spec["k"],
                 event=res.event_held, pred=res.predicate_held)]


def _check_common_prefix(trace, spec, trial):
    res = check_common_prefix(
        trace, spec.get("chain", 0), spec["t"], spec["k"], spec.get("r_grid")
    )
    return [_row("common-prefix", trial, chain=spec.get("chain", 0), t=spec["t"], k=spec["k"],
                 event=res.event_held, pred=res.predicate_held)]


def _check_structural(trace, spec, trial):
    rows = []
    for j in range(trace.params.n_chains):
        res = structural_lemmas(trace, j)
        ok = all(res.values())
        rows.append(_row("structural", trial, chain=j, event=True, pred=ok, **res))
    return rows


def _check_prism(trace, spec, trial):
    results = check_prism_theorems(
        trace,
        spec["t"],
        spec["k"],
        r_grid=spec.get("r_grid"),
        elector_samples=spec.get("elector_samples", 2),
        seed=trace.seed,
    )
    rows = []
    for name, res in results.items():
        rows.append(_row(name, trial, t=spec["t"], k=spec["k"],
                         event=res.event_held, pred=res.predicate_held,
                         preconditions_ok=res.preconditions_ok))
    return rows


def _check_good_event(trace, spec, trial):
    counts = interval_counts(trace, spec.get("chain", 0), spec["s"], spec["t"])
    held = good_event(counts, spec["s"], spec["t"], trace.params).ok
    return [_row("good-event", trial, chain=spec.get("chain", 0), s=spec["s"], t=spec["t"],
                 event=held, pred=held)]


def _check_typical_event(trace, spec, trial):
    try:
        held = typical_event_proxy(trace, spec.get("chain", 0), spec["s"], spec["t"])
    except IntervalTooShort:
        held = False
    return [_row("typical-event", trial, chain=spec.get("chain", 0), s=spec["s"], t=spec["t"],
                 event=held, pred=held)]


def _check_lagger_freq(trace, spec, trial):
    flags = classify(trace, spec.get("chain", 0))
    known = flags.loner_known
    return [_row("lagger-freq", trial, chain=spec.get("chain", 0), event=True, pred=True,
                 laggers=int(flags.lagger.sum()), blocks=int(len(flags.times)),
                 loners=int((flags.loner & known).sum()), loner_blocks=int(known.sum()))]


def _check_double_spend(trace, spec, trial):
    success = bool(trace.strategy_stats.get("success", False))
    return [_row("double-spend", trial, event=True, pred=not success, success=success)]


def _check_chain_share(trace, spec, trial):
    from .prism import best_credible_tip

    tip = best_credible_tip(trace, 0, trace.params.horizon)
    store = trace.store(0)
    adv = 0
    b = tip
    total = store.height[tip]
    while b > 0:
        adv += store.kind[b] == ADVERSARIAL
        b = store.parent[b]
    share = adv / total if total else 0.0
    return [_row("chain-share", trial, event=True, pred=True, adversarial=adv,
                 chain_blocks=total, share=share)]


CHECKS = {
    "growth": _check_growth,
    "quality": _check_quality,
    "common-prefix": _check_common_prefix,
    "structural": _check_structural,
    "prism": _check_prism,
    "good-event": _check_good_event,
    "typical-event": _check_typical_event,
    "lagger-freq": _check_lagger_freq,
    "double-spend": _check_double_spend,
    "chain-share": _check_chain_share,
}


# -- experiment driver --------------------------------------------------------


@dataclass(frozen=True)
class ExperimentConfig:
    params: ProtocolParams
    strategy: dict = field(default_factory=lambda: {"name": "null"})
    trials: int = 100
    base_seed: int = 0
    checks: tuple = ()
    honest_tie_break: str = "default"
    tx_mode: object = "none"
    workers: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["params"] = asdict(self.params)
        d["checks"] = [dict(c) for c in self.checks]
        tx = self.tx_mode
        d["tx_mode"] = list(tx) if isinstance(tx, tuple) else tx
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        try:
            params = ProtocolParams(**d["params"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigInvalid(str(exc)) from exc
        strategy = d.get("strategy", {"name": "null"})
        if isinstance(strategy, str):
            strategy = {"name": strategy}
        tx = d.get("tx_mode", "none")
        if isinstance(tx, list):
            tx = tuple(tx)
        trials = int(d.get("trials", 100))
        if trials < 0:
            raise ConfigInvalid("trials must be non-negative")
        checks = tuple(dict(c) for c in d.get("checks", ()))
        for c in checks:
            if c.get("name") not in CHECKS:
                raise ConfigInvalid(f"unknown check {c.get('name')!r}")
        return cls(
            params=params,
            strategy=dict(strategy),
            trials=trials,
            base_seed=int(d.get("seed", d.get("base_seed", 0))),
            checks=checks,
            honest_tie_break=d.get("honest_tie_break", "default"),
            tx_mode=tx,
            workers=int(d.get("workers", 0)),
        )

    @classmethod
    def from_file(cls, path) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass
class ExperimentReport:
    config: dict
    summaries: list
    rows: list
    wall_time_s: float = 0.0

    def deterministic_view(self) -> dict:
        cfg = {k: v for k, v in self.config.items() if k != "workers"}
        return {"config": cfg, "summaries": self.summaries, "rows": self.rows}

    def to_json(self) -> str:
        out = self.deterministic_view()
        out["wall_time_s"] = self.wall_time_s
        return json.dumps(out, indent=2, sort_keys=True)

    def csv_summary(self) -> str:
        lines = ["check,trials,violations,frequency,bound,ci_high"]
        for s in self.summaries:
            bound = "" if s["bound"] is None else repr(s["bound"])
            lines.append(
                f"{s['check']},{s['trials']},{s['violations']},"
                f"{s['frequency']!r},{bound},{s['ci_high']!r}"
            )
        return "\n".join(lines) + "\n"


def run_trial(config: ExperimentConfig, index: int) -> list:
    seed = trial_seed(config.base_seed, index)
    strategy = make_strategy(dict(config.strategy))
    trace = run_simulation(
        config.params,
        honest_policy=config.honest_tie_break,
        strategy=strategy,
        seed=seed,
        tx_mode=config.tx_mode,
    )
    rows = []
    for spec in config.checks:
        rows.extend(CHECKS[spec["name"]](trace, spec, index))
    return rows


def _trial_job(cfg_dict: dict, index: int) -> list:
    return run_trial(ExperimentConfig.from_dict(cfg_dict), index)


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all trials, aggregate per check, and report.

    Deterministic given (config, base seed); parallel and serial execution
    produce the same report because rows aggregate in trial order.
    """
    start = time.perf_counter()
    all_rows: list = []
    if config.workers and config.trials:
        cfg_dict = config.to_dict()
        cfg_dict["seed"] = config.base_seed
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for rows in pool.map(_trial_job, [cfg_dict] * config.trials, range(config.trials)):
                all_rows.extend(rows)
    else:
        for i in range(config.trials):
            all_rows.extend(run_trial(config, i))

    by_check: dict[str, dict] = {}
    bounds_by_name = {c["name"]: c.get("bound") for c in config.checks}
    for row in all_rows:
        name = row["check"]
        agg = by_check.setdefault(
            name,
            {"check": name, "trials": 0, "events": 0, "predicates": 0, "violations": 0,
             "extra": {}},
        )
        agg["trials"] += 1
        agg["events"] += bool(row["event_held"])
        agg["predicates"] += bool(row["predicate_held"])
        agg["violations"] += bool(row["event_held"]) and not row["predicate_held"]
        for key, val in row.items():
            if key not in ("check", "trial", "chain", "s", "t", "k",
                           "event_held", "predicate_held") and isinstance(val, (int, float, bool)):
                agg["extra"][key] = agg["extra"].get(key, 0) + val

    summaries = []
    for name in sorted(by_check):
        agg = by_check[name]
        n = agg["trials"]
        if name in ("good-event", "typical-event"):
            failures = n - agg["events"]
        else:
            failures = agg["violations"]
        freq = failures / n if n else 0.0
        summaries.append(
            {
                "check": name,
                "trials": n,
                "events": agg["events"],
                "predicates": agg["predicates"],
                "violations": failures,
                "frequency": freq,
                "bound": bounds_by_name.get(name),
                "ci_high": clopper_pearson_upper(failures, n),
                "extra": agg["extra"],
            }
        )
    wall = time.perf_counter() - start
    cfg = config.to_dict()
    return ExperimentReport(config=cfg, summaries=summaries, rows=all_rows, wall_time_s=wall)


# -- accelerated transaction-permanence suite ---------------------------------


def fast_tx_permanence_trial(
    params: ProtocolParams,
    seed: int,
    k: int,
    grid,
    strategy="censor-votes",
) -> dict:
    """Transaction-permanence row for one trial in the immediate-publication
    regime, without materializing votes, links, or ledgers.

    With every block published at its mining time each chain is a single
    path, so there is exactly one proposer per height and one leader
    sequence regardless of electors, and a block enters the ledger at the
    first honest proposer that observes it (the reference-link rule covers
    everything at least one delay old). Membership therefore reduces to
    index lookups. `run_simulation` + `check_prism_theorems` on the same
    seed must, and in the acceptance suite does, reproduce these rows
    exactly on a subsample.
    """
    trace = run_simulation(params, strategy=strategy, seed=seed, fill_payload=False)
    delta = params.delta_net
    dp = derive(params.alpha, delta, params.delta_typ)
    t = max(grid[0], min(grid))
    grid = sorted(set(grid))

    event = True
    s_ev = t - k / (2.0 * params.alpha) + delta
    for j in range(params.m + 1):
        try:
            if not typical_event_proxy(trace, j, s_ev, t - delta, params):
                event = False
                break
        except IntervalTooShort:
            event = False
            break

    denom = dp.growth_coeff ** 2 * dp.g ** 2 * (1.0 - dp.g) ** 2 * params.alpha
    r_pub = t - delta - 2.0 * (k + 1) / denom
    if r_pub <= 0:
        return {"check": "tx_permanence", "event_held": event, "predicate_held": True,
                "preconditions_ok": False, "t": t, "k": k}

    store0 = trace.store(0)
    mined0 = store0.mined_array()
    assert store0.is_linear(), "fast evaluator needs the immediate-publication regime"
    honest0 = np.flatnonzero(store0.kind_array() == 0)

    # earliest non-genesis block published by r_pub carries the target
    target = None
    for chain in trace.chains:
        if len(chain) > 1 and chain.mined[1] <= r_pub:
            cand = (chain.mined[1], chain.chain_index, 1)
            if target is None or cand < target:
                target = cand
    if target is None:
        return {"check": "tx_permanence", "event_held": event, "predicate_held": True,
                "preconditions_ok": True, "t": t, "k": k, "note": "no early block"}
    t_pub, t_chain, t_bid = target

    if t_chain == 0:
        cover = t_bid  # the proposer is its own leader slot
    else:
        pos = np.searchsorted(mined0[honest0], t_pub + delta, side="left")
        cover = int(honest0[pos]) if pos < len(honest0) else None

    ok = True
    for r in grid:
        n_r = int(np.searchsorted(mined0, r - delta, side="right")) - 1
        if cover is None or cover > n_r:
            ok = False
            break
    return {"check": "tx_permanence", "event_held": event, "predicate_held": ok,
            "preconditions_ok": k >= 160.0 * params.alpha * (1.0 + delta) / params.delta_typ,
            "t": t, "k": k, "target": f"{t_chain}.{t_bid}"}
