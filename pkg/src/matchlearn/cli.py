"""Experiment runner: market generation, simulation campaigns, exact analysis,
and stochastic-stability prediction from one command-line entry point."""

from __future__ import annotations

import argparse
import json
import multiprocessing
import sys
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

from .chain import StateCapExceeded, matching_mass, stationary_distribution, symbolic_reachable_chain
from .engine import (
    ATL,
    ATL_STAR,
    PolicyCombo,
    RecordPolicy,
    acceptor_optimal_mass,
    run,
    stable_mass,
    summary_csv_lines,
    trajectory_jsonl_lines,
)
from .market import (
    ENUMERATION_CAP,
    Market,
    Side,
    TooLarge,
    deferred_acceptance,
    enumerate_stable,
    market_from_json,
    market_to_json,
    random_market,
)
from .resistance import build_resistance_graph, min_in_tree_roots

CONFIG_SCHEMA = "matchlearn-config-1"


@dataclass
class ExperimentConfig:
    market_file: str | None = None
    random_n: int | None = None
    random_m: int | None = None
    market_seed: int = 0
    acceptor_policy: str = ATL
    epsilon: float = 0.01
    horizon: int = 1_000_000
    burn_in_fraction: float = 0.5
    delta: float = 0.1
    replications: int = 1
    master_seed: int = 0
    out_dir: str = "out"
    record: str = "summary"  # "full" | "thin:K" | "summary"
    workers: int = 1
    epsilons: list = field(default_factory=lambda: [0.2, 0.1, 0.05])

    def validate(self) -> None:
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if not 0 < self.delta <= 1:
            raise ValueError("delta must lie in (0, 1]")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.burn_in_fraction < 1:
            raise ValueError("burn_in_fraction must lie in [0, 1)")
        if self.acceptor_policy not in (ATL, ATL_STAR):
            raise ValueError(f"unknown acceptor policy {self.acceptor_policy!r}")
        if (self.market_file is None) == (self.random_n is None or self.random_m is None):
            raise ValueError("specify exactly one of --market or --random N M")

    @staticmethod
    def from_file(path: str) -> "ExperimentConfig":
        data = json.loads(Path(path).read_text())
        if data.pop("schema", CONFIG_SCHEMA) != CONFIG_SCHEMA:
            raise ValueError(f"unsupported config schema in {path}")
        return ExperimentConfig(**data)

    def record_policy(self) -> RecordPolicy:
        if self.record == "full":
            return RecordPolicy.full()
        if self.record == "summary":
            return RecordPolicy.summary_only()
        if self.record.startswith("thin:"):
            return RecordPolicy.thin(int(self.record.split(":", 1)[1]))
        raise ValueError(f"unknown record policy {self.record!r}")

    def combo(self, epsilon=None) -> PolicyCombo:
        eps = self.epsilon if epsilon is None else epsilon
        if self.acceptor_policy == ATL_STAR:
            return PolicyCombo.atl_star(eps)
        return PolicyCombo.atl(eps)

    def load_market(self) -> Market:
        if self.market_file is not None:
            return market_from_json(Path(self.market_file).read_text())
        return random_market(self.random_n, self.random_m, self.market_seed)


def _apply_overrides(config: ExperimentConfig, args: argparse.Namespace) -> ExperimentConfig:
    if getattr(args, "market", None):
        config.market_file = args.market
        config.random_n = config.random_m = None
    if getattr(args, "random", None):
        config.random_n, config.random_m = args.random
        config.market_file = None
    for attr, key in [
        ("market_seed", "market_seed"),
        ("policy", "acceptor_policy"),
        ("epsilon", "epsilon"),
        ("horizon", "horizon"),
        ("burn_in", "burn_in_fraction"),
        ("delta", "delta"),
        ("replications", "replications"),
        ("seed", "master_seed"),
        ("out_dir", "out_dir"),
        ("record", "record"),
        ("workers", "workers"),
    ]:
        value = getattr(args, attr, None)
        if value is not None:
            setattr(config, key, value)
    if getattr(args, "epsilons", None):
        config.epsilons = args.epsilons
    return config


def _simulate_one(payload) -> tuple[int, int, float, float]:
    market_json, policy, epsilon, horizon, burn_in, seed, rep, out_dir, record = payload
    market = market_from_json(market_json)
    combo = PolicyCombo.atl_star(epsilon) if policy == ATL_STAR else PolicyCombo.atl(epsilon)
    trajectory = run(market, combo, horizon, seed, record_policy=record)
    s_mass = stable_mass(trajectory, market, burn_in)
    a_mass = acceptor_optimal_mass(trajectory, market, burn_in)
    if out_dir is not None:
        directory = Path(out_dir)
        directory.mkdir(parents=True, exist_ok=True)
        with open(directory / f"run_{rep:03d}.jsonl", "w") as handle:
            for line in trajectory_jsonl_lines(trajectory):
                handle.write(line + "\n")
        with open(directory / f"run_{rep:03d}_summary.csv", "w") as handle:
            for line in summary_csv_lines(trajectory, market, burn_in):
                handle.write(line + "\n")
    return rep, seed, s_mass, a_mass


def cmd_gen_market(args) -> int:
    market = random_market(args.n, args.m, args.seed)
    text = market_to_json(market)
    Path(args.out).write_text(text + "\n")
    print(f"wrote {args.n}x{args.m} market (seed {args.seed}) to {args.out}")
    if max(args.n, args.m) <= ENUMERATION_CAP:
        stable = enumerate_stable(market)
        print(f"stable matchings: {len(stable)}")
        print(f"proposer-optimal: {deferred_acceptance(market, Side.PROPOSER).to_list()}")
        print(f"acceptor-optimal: {deferred_acceptance(market, Side.ACCEPTOR).to_list()}")
    else:
        print(f"market larger than {ENUMERATION_CAP}x{ENUMERATION_CAP}; stable-set summary skipped")
    return 0


def cmd_simulate(args) -> int:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    config = _apply_overrides(config, args)
    config.validate()
    market = config.load_market()
    record = config.record_policy()
    out_dir = config.out_dir
    Path(out_dir).mkdir(parents=True, exist_ok=True)

    payloads = [
        (
            market_to_json(market),
            config.acceptor_policy,
            config.epsilon,
            config.horizon,
            config.burn_in_fraction,
            config.master_seed ^ rep,
            rep,
            out_dir,
            record,
        )
        for rep in range(config.replications)
    ]
    if config.workers > 1:
        with multiprocessing.Pool(config.workers) as pool:
            results = pool.map(_simulate_one, payloads)
    else:
        results = [_simulate_one(p) for p in payloads]
    results.sort()

    target = ATL_STAR == config.acceptor_policy
    lines = ["replication,seed,stable_mass,acceptor_optimal_mass"]
    for rep, seed, s_mass, a_mass in results:
        lines.append(f"{rep},{seed},{s_mass:.9f},{a_mass:.9f}")
    aggregate = sum(r[3] if target else r[2] for r in results) / len(results)
    metric = "acceptor_optimal_mass" if target else "stable_mass"
    mean_stable = sum(r[2] for r in results) / len(results)
    mean_optimal = sum(r[3] for r in results) / len(results)
    lines.append(f"aggregate,,{mean_stable:.9f},{mean_optimal:.9f}")
    campaign = Path(out_dir) / "campaign.csv"
    campaign.write_text("\n".join(lines) + "\n")

    threshold = 1 - config.delta
    verdict = "PASS" if aggregate >= threshold else "FAIL"
    print(f"market {market.n}x{market.m} fingerprint {market.fingerprint()}")
    print(f"combo PTL+{config.acceptor_policy} eps={config.epsilon} horizon={config.horizon}")
    print(f"aggregate {metric} = {aggregate:.4f} (threshold {threshold:.4f}): {verdict}")
    print(f"wrote {campaign}")
    return 0 if aggregate >= threshold else 1


def cmd_exact(args) -> int:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    config = _apply_overrides(config, args)
    if config.market_file is None and config.random_n is None:
        raise ValueError("specify --market or --random N M")
    market = config.load_market()
    epsilons = sorted((Fraction(str(e)) for e in config.epsilons), reverse=True)
    combo = config.combo(epsilons[0])
    try:
        symbolic = symbolic_reachable_chain(market, combo)
    except StateCapExceeded as exc:
        print(f"state cap exceeded while building the chain: {exc}", file=sys.stderr)
        return 2
    rows = ["epsilon,states,stable_mass,acceptor_optimal_mass,residual"]
    for eps in epsilons:
        chain = symbolic.instantiate(eps)
        pi = stationary_distribution(chain)
        masses = matching_mass(chain, pi, market)
        rows.append(
            f"{float(eps):.6g},{chain.num_states()},{float(masses.stable_mass):.9f},"
            f"{float(masses.acceptor_optimal_mass):.9f},{pi.residual:.3e}"
        )
    text = "\n".join(rows)
    print(text)
    if args.out:
        Path(args.out).write_text(text + "\n")
        print(f"wrote {args.out}")
    return 0


def cmd_predict(args) -> int:
    config = ExperimentConfig.from_file(args.config) if args.config else ExperimentConfig()
    config = _apply_overrides(config, args)
    if config.market_file is None and config.random_n is None:
        raise ValueError("specify --market or --random N M")
    market = config.load_market()
    combo = config.combo()
    try:
        graph = build_resistance_graph(market, combo)
        predicted = min_in_tree_roots(graph)
    except TooLarge as exc:
        print(f"market too large for prediction: {exc}", file=sys.stderr)
        return 2
    stable = enumerate_stable(market)
    stable_set = set(stable)
    optimal = deferred_acceptance(market, Side.ACCEPTOR)

    print(f"market {market.n}x{market.m} fingerprint {market.fingerprint()}")
    print(f"resistance graph: {len(graph.nodes)} matchings, {len(graph.edges)} edges")
    print(f"stable matchings: {len(stable)}; acceptor-optimal: {optimal.to_list()}")
    print(f"predicted stochastically stable set ({combo.label()}):")
    for mu in sorted(predicted, key=lambda m: m.to_list()):
        print(f"  {mu.to_list()}")
    contained = predicted <= stable_set
    print(f"predicted subset of stable matchings: {'PASS' if contained else 'FAIL'}")
    ok = contained
    if combo.acceptor_policy == ATL_STAR:
        selected = predicted == {optimal}
        print(f"predicted set equals the acceptor-optimal matching: {'PASS' if selected else 'FAIL'}")
        ok = ok and selected
    if args.dot:
        Path(args.dot).write_text(graph.to_dot() + "\n")
        print(f"wrote {args.dot}")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="matchlearn",
        description="Decentralized matching with trial-and-error learning: simulate, analyze, predict.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-market", help="generate a random market file")
    gen.add_argument("n", type=int)
    gen.add_argument("m", type=int)
    gen.add_argument("seed", type=int)
    gen.add_argument("out")
    gen.set_defaults(handler=cmd_gen_market)

    def common(p):
        p.add_argument("--config", help="JSON config file; flags override its fields")
        p.add_argument("--market", help="market JSON file")
        p.add_argument("--random", nargs=2, type=int, metavar=("N", "M"))
        p.add_argument("--market-seed", type=int, dest="market_seed")
        p.add_argument("--policy", choices=[ATL, ATL_STAR])
        p.add_argument("--epsilon", type=float)

    sim = sub.add_parser("simulate", help="run seeded simulation replications")
    common(sim)
    sim.add_argument("--horizon", type=int)
    sim.add_argument("--burn-in", type=float, dest="burn_in")
    sim.add_argument("--delta", type=float)
    sim.add_argument("--replications", type=int)
    sim.add_argument("--seed", type=int)
    sim.add_argument("--out-dir", dest="out_dir")
    sim.add_argument("--record", help="full | thin:K | summary")
    sim.add_argument("--workers", type=int)
    sim.set_defaults(handler=cmd_simulate)

    exact = sub.add_parser("exact", help="exact stationary analysis over an epsilon sweep")
    common(exact)
    exact.add_argument("--epsilons", nargs="+", type=float)
    exact.add_argument("--out")
    exact.set_defaults(handler=cmd_exact)

    pred = sub.add_parser("predict", help="resistance-graph stochastic-stability prediction")
    common(pred)
    pred.add_argument("--dot", help="write the resistance graph in DOT format")
    pred.set_defaults(handler=cmd_predict)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
