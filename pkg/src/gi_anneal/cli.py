"""Command-line entry point.

Every subcommand accepts ``--config FILE`` with flat ``key=value`` lines whose
keys are long option names (dashes or underscores); flags given on the
command line win over the file.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

from .chimera import (
    DEFAULT_SCALE,
    DEFAULT_TRIES,
    EmbeddingError,
    apply_gauge,
    chimera,
    default_hardware,
    embed_ising,
    find_embedding_for,
    parse_embedding,
    parse_mask,
    Embedding,
    designate_couplers,
    validate_embedding,
)
from .decode import DEFAULT_KMAX, SolveConfig, solve_gi
from .graphs import GraphFormatError, gen_iso_pair, gen_noniso_pair, parse_pair, write_pair
from .hamiltonian import H1, H2, compile_pair, write_ising, write_qubo
from .harness import (
    ACCURACY_FIELDS,
    EMBED_FIELDS,
    SCALING_FIELDS,
    ExperimentConfig,
    accuracy_experiment,
    config_dict,
    embeddability_experiment,
    scaling_experiment,
    scaling_fits,
    write_outputs,
)
from .samplers import DEFAULT_READS, DEFAULT_SWEEPS, JobParams, run_job
from .seeding import derive_seed

log = logging.getLogger("gi_anneal")

TRUE = {"1", "true", "yes", "on"}
FALSE = {"0", "false", "no", "off"}


class ConfigError(ValueError):
    pass


def read_config(path: str | Path) -> dict[str, str]:
    """Flat ``key=value`` file; ``#`` starts a comment, blank lines are skipped."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{path}:{lineno}: empty key")
        out[key.replace("-", "_")] = value
    return out


def parse_sizes(text: str) -> tuple[int, ...]:
    """``"10:100:10"`` (inclusive stop), ``"3-8"``, or ``"4,6,8"``."""
    text = text.strip()
    try:
        if ":" in text:
            parts = [int(x) for x in text.split(":")]
            start, stop = parts[0], parts[1]
            step = parts[2] if len(parts) > 2 else 1
            sizes = tuple(range(start, stop + 1, step))
        elif "-" in text and "," not in text:
            a, b = (int(x) for x in text.split("-"))
            sizes = tuple(range(a, b + 1))
        else:
            sizes = tuple(int(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad size list {text!r}") from None
    if not sizes or any(s < 1 for s in sizes):
        raise argparse.ArgumentTypeError(f"bad size list {text!r}")
    return sizes


def _hardware(args):
    if getattr(args, "mask", None):
        return chimera(8, 8, 4, parse_mask(Path(args.mask).read_text()))
    return default_hardware()


def _read_pair(path: str):
    text = sys.stdin.read() if path == "-" else Path(path).read_text()
    return parse_pair(text)


def _hamiltonian(args) -> str:
    return H1 if args.h1 else H2


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _job_params(args) -> JobParams:
    return JobParams(reads=args.reads, sweeps=args.sweeps, beta_range=(args.beta_start, args.beta_end),
                     seed=derive_seed(args.seed, "job", 0))


def cmd_generate(args) -> int:
    if args.noniso:
        g1, g2 = gen_noniso_pair(args.n, args.p, args.seed)
        mapping = None
    else:
        g1, g2, mapping = gen_iso_pair(args.n, args.p, args.seed)
    _emit(write_pair(g1, g2), args.output)
    if mapping is not None and args.mapping:
        Path(args.mapping).write_text(" ".join(map(str, mapping)) + "\n")
    return 0


def cmd_compile(args) -> int:
    g1, g2 = _read_pair(args.pair)
    c = compile_pair(g1, g2, _hamiltonian(args))
    _emit(write_ising(c.ising) if args.ising else write_qubo(c.qubo), args.output)
    r = c.report
    print(f"variables={r.n_variables} interactions={r.n_interactions} components={r.n_components} "
          f"cannot_reach_zero={r.cannot_reach_zero}", file=sys.stderr)
    return 0


def cmd_embed(args) -> int:
    g1, g2 = _read_pair(args.pair)
    m = compile_pair(g1, g2, _hamiltonian(args), connect=args.connect).prepared
    hw = _hardware(args)
    e = find_embedding_for(m, hw, tries=args.tries, seed=args.seed)
    if e is None:
        print("no embedding found", file=sys.stderr)
        return 3
    _emit(e.to_text(), args.output)
    print(f"variables={m.n} qubits={e.n_qubits} max_chain={e.max_chain}", file=sys.stderr)
    return 0


def cmd_sample(args) -> int:
    g1, g2 = _read_pair(args.pair)
    m = compile_pair(g1, g2, _hamiltonian(args), connect=True).prepared
    hw = _hardware(args)
    if args.embedding:
        chains = parse_embedding(Path(args.embedding).read_text())
        e = Embedding(chains, designate_couplers(chains, m.edges, hw))
        problems = validate_embedding(e, m.edges, hw)
        if problems:
            print("invalid embedding: " + "; ".join(problems), file=sys.stderr)
            return 2
    else:
        e = find_embedding_for(m, hw, tries=args.tries, seed=derive_seed(args.seed, "embed", 0))
        if e is None:
            print("no embedding found", file=sys.stderr)
            return 3
    em = embed_ising(m, e, hw, args.scale, args.chain_strength)
    em = apply_gauge(em, seed=derive_seed(args.seed, "gauge", 0))
    _emit(run_job(em, _job_params(args)).to_text(), args.output)
    return 0


def cmd_solve(args) -> int:
    g1, g2 = _read_pair(args.pair)
    cfg = SolveConfig(
        hamiltonian=_hamiltonian(args),
        strategy="discard" if args.discard else "majority_vote",
        k_max=args.kmax,
        tries=args.tries,
        scale=args.scale,
        chain_strength=args.chain_strength,
        job=replace(_job_params(args), seed=0),
        seed=args.seed,
        short_circuit=not args.no_short_circuit,
    )
    v = solve_gi(g1, g2, cfg, _hardware(args), problem_id=args.problem_id or Path(args.pair).stem)
    _emit(v.to_json() + "\n", args.output)
    return 0


def _experiment_config(args, **over) -> ExperimentConfig:
    fields = dict(sizes=args.sizes, pairs=args.pairs, p=args.p, seed=args.seed, out_dir=args.out)
    for name in ("tries", "k_max", "reads", "sweeps", "beta_start", "beta_end", "chain_strength", "scale"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    if getattr(args, "hamiltonians", None):
        fields["hamiltonians"] = tuple(args.hamiltonians.split(","))
    fields.update(over)
    return ExperimentConfig(**fields)


def cmd_bench_scaling(args) -> int:
    cfg = _experiment_config(args)
    rows, summary = scaling_experiment(cfg)
    fits = {k: {"a": f.a, "b": f.b, "r2": f.r2} for k, f in scaling_fits(summary).items()}
    paths = write_outputs(args.out, "scaling", rows, summary, SCALING_FIELDS, config_dict(cfg), {"fits": fits})
    print("\n".join(map(str, paths)))
    return 0


def cmd_bench_embed(args) -> int:
    cfg = _experiment_config(args)
    rows, summary = embeddability_experiment(cfg, _hardware(args))
    paths = write_outputs(args.out, "embeddability", rows, summary, EMBED_FIELDS, config_dict(cfg))
    print("\n".join(map(str, paths)))
    return 0


def cmd_bench_accuracy(args) -> int:
    cfg = _experiment_config(args)
    rows, summary = accuracy_experiment(cfg, _hardware(args))
    paths = write_outputs(args.out, "accuracy", rows, summary, ACCURACY_FIELDS, config_dict(cfg))
    print("\n".join(map(str, paths)))
    return 0


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file; command-line flags override it")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-v", "--verbose", action="store_true")


def _add_model(p) -> None:
    g = p.add_mutually_exclusive_group()
    g.add_argument("--h1", action="store_true", help="baseline model with N^2 variables")
    g.add_argument("--h2", action="store_true", help="compact model (default)")


def _add_embed(p) -> None:
    p.add_argument("--tries", type=int, default=DEFAULT_TRIES)
    p.add_argument("--mask", help="file of dead qubit ids for Chimera(8,8,4); default: built-in 8-qubit mask")


def _add_anneal(p) -> None:
    p.add_argument("--reads", type=int, default=DEFAULT_READS)
    p.add_argument("--sweeps", type=int, default=DEFAULT_SWEEPS)
    p.add_argument("--beta-start", type=float, default=0.1)
    p.add_argument("--beta-end", type=float, default=5.0)
    p.add_argument("--scale", type=float, default=DEFAULT_SCALE)
    p.add_argument("--chain-strength", type=float, default=-1.0)


def _add_bench(p, sizes: str) -> None:
    p.add_argument("--sizes", type=parse_sizes, default=parse_sizes(sizes), help="start:stop:step, a-b, or a,b,c")
    p.add_argument("--pairs", type=int, default=100)
    p.add_argument("--p", type=float, default=0.5)
    p.add_argument("--out", default="results")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gi-anneal", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a random G(N, p) pair file")
    _add_common(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=float, default=0.5)
    kind = p.add_mutually_exclusive_group()
    kind.add_argument("--iso", action="store_true", help="isomorphic pair (default)")
    kind.add_argument("--noniso", action="store_true")
    p.add_argument("--mapping", help="also write the hidden mapping (g2 vertex -> g1 vertex)")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("compile", help="print the QUBO (or Ising) model of a pair")
    _add_common(p)
    _add_model(p)
    p.add_argument("--ising", action="store_true")
    p.add_argument("pair")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_compile)

    p = sub.add_parser("embed", help="minor-embed a pair's model")
    _add_common(p)
    _add_model(p)
    _add_embed(p)
    p.add_argument("--connect", action="store_true", help="join model components with placeholder couplings")
    p.add_argument("pair")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_embed)

    p = sub.add_parser("sample", help="run one simulated-annealing job on the embedded model")
    _add_common(p)
    _add_model(p)
    _add_embed(p)
    _add_anneal(p)
    p.add_argument("--embedding", help="embedding file to use instead of searching")
    p.add_argument("pair")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("solve", help="decide isomorphism of a pair; prints a verdict record")
    _add_common(p)
    _add_model(p)
    _add_embed(p)
    _add_anneal(p)
    strat = p.add_mutually_exclusive_group()
    strat.add_argument("--vote", action="store_true", help="majority-vote broken chains (default)")
    strat.add_argument("--discard", action="store_true", help="drop reads with broken chains")
    p.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    p.add_argument("--no-short-circuit", action="store_true", help="sample even when no zero state can exist")
    p.add_argument("--problem-id")
    p.add_argument("pair")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("bench-scaling", help="variable and interaction counts for both models")
    _add_common(p)
    _add_bench(p, "10:100:10")
    p.set_defaults(func=cmd_bench_scaling)

    p = sub.add_parser("bench-embed", help="embeddability on the masked Chimera graph")
    _add_common(p)
    _add_bench(p, "3:20:1")
    _add_embed(p)
    p.add_argument("--hamiltonians", default="h1,h2")
    p.set_defaults(func=cmd_bench_embed)

    p = sub.add_parser("bench-accuracy", help="solver accuracy per model, strategy, and job budget")
    _add_common(p)
    _add_bench(p, "3:20:1")
    _add_embed(p)
    _add_anneal(p)
    p.add_argument("--k-max", type=int, default=DEFAULT_KMAX)
    p.add_argument("--hamiltonians", default="h1,h2")
    p.set_defaults(func=cmd_bench_accuracy)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    try:
        values = read_config(args.config)
    except (OSError, ConfigError) as exc:
        parser.error(str(exc))
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, value in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help"):
            parser.error(f"{args.config}: unknown key {key!r} for {args.command}")
        if action.nargs == 0:
            low = value.lower()
            if low not in TRUE | FALSE:
                parser.error(f"{args.config}: {key} expects a boolean, got {value!r}")
            defaults[key] = low in TRUE
        else:
            defaults[key] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = _apply_config(parser, sys.argv[1:] if argv is None else list(argv))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); nothing left to report
        sys.stderr.close()
        return 0
    except (GraphFormatError, EmbeddingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
