"""Command-line surface: bounds | simulate | montecarlo | prism-sim | verify.

Values in a --config file override the corresponding flags. Machine-readable
output goes to --out; a human-readable table goes to standard output. Usage
errors exit 2; `verify --strict` exits 1 when a check is violated.
"""

from __future__ import annotations

import argparse
import json
import sys

from .bounds import admissible, depth_bound, derive, event_bounds, prism_leader_time, prism_tx_time, reference_notes, EpsilonTooLarge
from .harness import CHECKS, ExperimentConfig, run_experiment
from .prism import build_ledger, leader_sequence
from .sim import ProtocolParams, run_simulation


def _add_param_flags(p: argparse.ArgumentParser, horizon_default=100.0):
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.0)
    p.add_argument("--delta-net", type=float, default=0.0)
    p.add_argument("--delta-typ", type=float, default=0.3)
    p.add_argument("--m", type=int, default=0)
    p.add_argument("--horizon", type=float, default=horizon_default)
    p.add_argument("--config", help="JSON config; its values override flags")


def _params_from(args) -> ProtocolParams:
    cfg = {}
    if getattr(args, "config", None):
        with open(args.config) as fh:
            cfg = json.load(fh)
    fields = {
        "alpha": args.alpha,
        "beta": args.beta,
        "delta_net": args.delta_net,
        "delta_typ": args.delta_typ,
        "m": args.m,
        "horizon": args.horizon,
    }
    for key in fields:
        if key in cfg:
            fields[key] = cfg[key]
    return ProtocolParams(**fields), cfg


def _cmd_bounds(args) -> int:
    params, _ = _params_from(args)
    d = derive(params.alpha, params.delta_net, params.delta_typ)
    adm = admissible(params.alpha, params.beta, params.delta_net, params.delta_typ)
    out = {
        "g": d.g,
        "eta": d.eta,
        "mu": d.mu,
        "growth_coeff": d.growth_coeff,
        "admissible_lhs": adm.lhs,
        "admissible": adm.ok,
    }
    print(f"g            = {d.g:.9f}")
    print(f"eta          = {d.eta:.9f}")
    print(f"mu           = {d.mu:.6g}")
    print(f"growth coeff = {d.growth_coeff:.9f}")
    print(f"rate margin  = {adm.lhs:.6f} (> beta={params.beta:g}: {'yes' if adm.ok else 'no'})")
    if args.interval:
        ev = event_bounds(d, 0.0, args.interval)
        out["event_bounds"] = {"good": ev.good, "typical": ev.typical,
                               "good_vacuous": ev.good_vacuous,
                               "typical_vacuous": ev.typical_vacuous}
        good_tag = " (vacuous)" if ev.good_vacuous else ""
        typ_tag = " (vacuous)" if ev.typical_vacuous else ""
        print(f"P(good event fails)    <= {ev.good:.6g}{good_tag}  on an interval of {args.interval:g}")
        print(f"P(typical event fails) <= {ev.typical:.6g}{typ_tag}")
    if args.k:
        db = depth_bound(d, params.alpha, args.k, params.delta_net)
        out["depth_bound"] = db
        print(f"depth bound (k={args.k}) = {db:.6g}")
        if args.mu_override:
            db2 = depth_bound(d.with_mu(args.mu_override), params.alpha, args.k, params.delta_net)
            out["depth_bound_mu_override"] = db2
            print(f"depth bound (k={args.k}, mu={args.mu_override:g}) = {db2:.6g}")
    if args.eps:
        try:
            lt = prism_leader_time(0.0, args.eps, max(params.m, 1), d, params.alpha, params.delta_net)
            kk, tt = prism_tx_time(0.0, args.eps, max(params.m, 1), d, params.alpha, params.delta_net)
            out["leader_wait"] = lt
            out["tx_depth"] = kk
            out["tx_wait"] = tt
            print(f"leader-prefix wait (eps={args.eps:g}) = {lt:.6g}")
            print(f"tx confirmation depth/wait (eps={args.eps:g}) = {kk} / {tt:.6g}")
        except EpsilonTooLarge as exc:
            out["confirmation_error"] = str(exc)
            print(f"confirmation formulas: {exc}")
    notes = reference_notes(params.alpha, params.beta, params.delta_net, params.delta_typ)
    if notes:
        out["reference_notes"] = notes
        print("reference notes:")
        for n in notes:
            print(f"  - {n}")
    if args.out:
        with open(args.out, "w") as fh:
            json.dump(out, fh, indent=2, sort_keys=True)
    return 0


def _strategy_from(args, cfg) -> dict:
    spec = {"name": args.strategy, "params": json.loads(args.strategy_params or "{}")}
    if "strategy" in cfg:
        raw = cfg["strategy"]
        spec = {"name": raw} if isinstance(raw, str) else dict(raw)
    return spec


def _cmd_simulate(args, require_m: bool = False) -> int:
    params, cfg = _params_from(args)
    if require_m and params.m < 1:
        print("prism-sim needs --m >= 1", file=sys.stderr)
        return 2
    strategy = _strategy_from(args, cfg)
    tie = cfg.get("honest_tie_break", args.tie_break)
    seed = cfg.get("seed", args.seed)
    tx_mode = cfg.get("tx_mode", args.tx_mode)
    if isinstance(tx_mode, list):
        tx_mode = tuple(tx_mode)
    if params.m >= 1 and tx_mode == "none":
        tx_mode = "unique"
    trace = run_simulation(params, honest_policy=tie, strategy=strategy, seed=seed, tx_mode=tx_mode)
    if args.out:
        trace.to_jsonl(args.out)
    for store in trace.chains:
        adv = sum(1 for kind in store.kind if kind)
        print(
            f"chain {store.chain_index}: {len(store) - 1} blocks, "
            f"max height {max(store.height)}, adversarial {adv}"
        )
    if require_m:
        seq = leader_sequence(trace, params.horizon)
        ledger = build_ledger(trace, seq)
        print(f"leader sequence height {seq.height}; ledger holds {len(ledger.txs)} transactions")
        if args.ledger_out:
            with open(args.ledger_out, "w") as fh:
                fh.write(ledger.dumps())
    return 0


def _cmd_montecarlo(args) -> int:
    config = ExperimentConfig.from_file(args.config)
    report = run_experiment(config)
    for s in report.summaries:
        print(
            f"{s['check']}: trials={s['trials']} violations={s['violations']} "
            f"frequency={s['frequency']:.6g} ci_high={s['ci_high']:.6g}"
            + (f" bound={s['bound']:.6g}" if s["bound"] is not None else "")
        )
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(report.to_json())
    if args.csv:
        with open(args.csv, "w") as fh:
            fh.write(report.csv_summary())
    return 0


def _cmd_verify(args) -> int:
    params, cfg = _params_from(args)
    spec = {"name": args.check}
    if args.s is not None:
        spec["s"] = args.s
    if args.t is not None:
        spec["t"] = args.t
    if args.k is not None:
        spec["k"] = args.k
    if args.grid:
        spec["r_grid"] = json.loads(args.grid)
    config = ExperimentConfig(
        params=params,
        strategy=_strategy_from(args, cfg),
        trials=cfg.get("trials", args.trials),
        base_seed=cfg.get("seed", args.seed),
        checks=(spec,),
        honest_tie_break=cfg.get("honest_tie_break", args.tie_break),
        tx_mode="unique" if params.m >= 1 else "none",
    )
    report = run_experiment(config)
    lines = [
        json.dumps({key: row.get(key) for key in
                    ("check", "trial", "s", "t", "k", "event_held", "predicate_held")})
        for row in report.rows
    ]
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    else:
        for line in lines:
            print(line)
    bad = sum(1 for s in report.summaries if s["violations"])
    for s in report.summaries:
        print(
            f"# {s['check']}: trials={s['trials']} violations={s['violations']}",
            file=sys.stderr,
        )
    if args.strict and bad:
        return 1
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="chainlab")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bounds", help="evaluate the closed-form quantities and bounds")
    _add_param_flags(p)
    p.add_argument("--interval", type=float, default=0.0, help="interval length for the event bounds")
    p.add_argument("--k", type=int, default=0, help="confirmation depth for the depth bound")
    p.add_argument("--eps", type=float, default=0.0, help="failure budget for the confirmation formulas")
    p.add_argument("--mu-override", type=float, default=0.0, help="evaluate the depth bound at a substituted prefactor")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_bounds)

    for name, require_m in (("simulate", False), ("prism-sim", True)):
        p = sub.add_parser(name, help=f"run one seeded trial{' with voter chains' if require_m else ''}")
        _add_param_flags(p)
        p.add_argument("--seed", type=int, required=True)
        p.add_argument("--strategy", default="null")
        p.add_argument("--strategy-params", default="{}")
        p.add_argument("--tie-break", default="default",
                       choices=["default", "adversary-steered"])
        p.add_argument("--tx-mode", default="none")
        p.add_argument("--out", help="trace output (JSON lines)")
        if require_m:
            p.add_argument("--ledger-out", help="ledger dump (epoch, tx id rows)")
        p.set_defaults(func=_cmd_simulate, _require_m=require_m)

    p = sub.add_parser("montecarlo", help="run a configured experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--csv")
    p.set_defaults(func=_cmd_montecarlo)

    p = sub.add_parser("verify", help="evaluate one check over seeded trials")
    _add_param_flags(p)
    p.add_argument("--check", required=True, choices=sorted(CHECKS))
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--strategy", default="null")
    p.add_argument("--strategy-params", default="{}")
    p.add_argument("--tie-break", default="default", choices=["default", "adversary-steered"])
    p.add_argument("--s", type=float)
    p.add_argument("--t", type=float)
    p.add_argument("--k", type=int)
    p.add_argument("--grid", help="JSON list of extra grid times")
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=_cmd_verify)

    args = parser.parse_args(argv)
    if getattr(args, "_require_m", None) is not None:
        return args.func(args, require_m=args._require_m)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
