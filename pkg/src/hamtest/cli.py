"""Command-line front end.

Exit codes: 0 on success, 1 when a verification check fails, 2 for usage
errors and invalid parameters.  ``--config FILE`` supplies ``key = value``
defaults for the chosen subcommand; explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .config import default_seed
from .errors import HamtestError
from .evolution import EvolutionOracle
from .hamiltonian import (
    PauliHamiltonian,
    PropertySet,
    load_hamiltonian,
    load_property_file,
    property_k_local,
    random_property_hamiltonian,
)
from .harness import ScenarioSpec, acceptance_sweep, emit_report
from .mub import build_mub_family, dump_family, load_family
from .oracles import (
    CYCLE_TYPES,
    gadget_separation_stats,
    mub_invariant_suite,
    norm_relation_probe,
    weingarten_monte_carlo,
    weingarten_value,
    SIGMAS,
)
from .pauli import all_paulis
from .rng import make_rng, substreams
from .testers import run_multi_test

OK, FAILED, USAGE = 0, 1, 2


def _add_seed(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None, help="RNG seed (default: $HAMTEST_SEED or 0)")


def _add_reports(p: argparse.ArgumentParser) -> None:
    p.add_argument("--jsonl", help="write per-trial or per-check JSON lines here")
    p.add_argument("--csv", help="write the aggregated CSV here")


def _add_property(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, default=None, help="k-local property")
    p.add_argument("--property-file", help="property file, one Pauli literal per line")


def _add_scenario(p: argparse.ArgumentParser, tolerant: bool = False) -> None:
    p.add_argument("--n", type=int, required=True)
    _add_property(p)
    p.add_argument("--hypothesis", choices=("null", "far", "custom"), default="null")
    p.add_argument("--hamiltonian", help="Hamiltonian fixture for --hypothesis custom")
    if tolerant:
        p.add_argument("--eps1", type=float, required=True)
        p.add_argument("--eps2", type=float, required=True)
    else:
        p.add_argument("--eps", type=float, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--t", type=float, default=None, help="override the evolution time")
    p.add_argument("--rounds", type=int, default=None, help="override the number of rounds")
    p.add_argument("--far-coefficient", type=float, default=None)
    p.add_argument("--workers", type=int, default=1)
    _add_seed(p)
    _add_reports(p)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hamtest", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="key = value defaults for the subcommand")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("build-mub", help="print the stabilizer basis family as a text fixture")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--out", help="write here instead of stdout")

    p = sub.add_parser("verify", help="run the basis-family invariant checks")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--fixture", help="verify a family loaded from a text fixture")
    _add_reports(p)

    for name, tolerant, what in (
        ("test", False, "single-property tester"),
        ("ancilla-test", False, "ancilla-padded tester"),
        ("tolerant", True, "tolerant tester"),
    ):
        _add_scenario(sub.add_parser(name, help=f"verdict frequencies of the {what}"), tolerant)

    p = sub.add_parser("multi-test", help="several properties from one data set")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--hamiltonian", help="Hamiltonian fixture (default: random in the first property)")
    p.add_argument("--k-list", default="", help="comma-separated localities, one property each")
    p.add_argument("--property-files", default="", help="comma-separated property files")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--trials", type=int, default=10)
    _add_seed(p)
    _add_reports(p)

    p = sub.add_parser("sweep", help="run a grid of scenarios given as JSON lines")
    p.add_argument("--grid", required=True, help="one ScenarioSpec object per line")
    p.add_argument("--workers", type=int, default=1)
    _add_reports(p)

    p = sub.add_parser("gadget-stats", help="moments of the learning-gadget separation")
    p.add_argument("--n", type=int, default=3)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=10_000)
    _add_seed(p)
    _add_reports(p)

    p = sub.add_parser("haar-moments", help="Weingarten table against Monte Carlo Haar integrals")
    p.add_argument("--d", type=int, default=4)
    p.add_argument("--samples", type=int, default=100_000)
    _add_seed(p)
    _add_reports(p)

    p = sub.add_parser("norm-probe", help="short-time slopes of Choi and operator distances")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--pairs", type=int, default=5, help="random pairs when no fixtures are given")
    p.add_argument("--h", dest="h_file", help="first Hamiltonian fixture")
    p.add_argument("--h2", dest="h2_file", help="second Hamiltonian fixture")
    p.add_argument("--times", default="0.01,0.005,0.0025")
    _add_seed(p)
    _add_reports(p)
    return parser


def _read_config(path: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise HamtestError(f"{path}:{lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _apply_config(parser: argparse.ArgumentParser, argv: list[str]) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, rest = pre.parse_known_args(argv)
    if not known.config:
        return
    values = _read_config(known.config)
    command = next((a for a in rest if not a.startswith("-")), None)
    subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    target = subparsers.choices.get(command)
    if target is None:
        return
    dests = {a.dest: a for a in target._actions}
    for key, value in values.items():
        if key not in dests:
            parser.error(f"config key {key!r} is not an option of {command}")
        action = dests[key]
        action.required = False  # a config value satisfies a required flag
        target.set_defaults(**{key: value})


def _seed(args) -> int:
    return default_seed() if args.seed is None else int(args.seed)


def _write_reports(args, results) -> None:
    if getattr(args, "jsonl", None):
        emit_report(results, "jsonl", args.jsonl)
    if getattr(args, "csv", None):
        emit_report(results, "csv", args.csv)


def _print_checks(checks) -> int:
    for c in checks:
        status = "PASS" if c.passed else "FAIL"
        print(f"{status} {c.name}: measured={c.measured} reference={c.reference} "
              f"deviation={c.deviation:.3e} tolerance={c.tolerance:.3e}")
    return OK if all(c.passed for c in checks) else FAILED


def cmd_build_mub(args) -> int:
    text = dump_family(build_mub_family(args.n))
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return OK


def cmd_verify(args) -> int:
    if args.fixture:
        family = load_family(Path(args.fixture).read_text())
    elif args.n is not None:
        family = build_mub_family(args.n)
    else:
        raise HamtestError("verify needs --n or --fixture")
    checks = mub_invariant_suite(family)
    _write_reports(args, checks)
    return _print_checks(checks)


def _scenario(args, tester: str) -> ScenarioSpec:
    hypothesis = "custom" if args.hamiltonian else args.hypothesis
    k = args.k if args.k is not None or args.property_file else 1
    return ScenarioSpec(
        n=args.n,
        hypothesis=hypothesis,
        k=k,
        property_file=args.property_file,
        hamiltonian_file=args.hamiltonian,
        eps=getattr(args, "eps", 0.5) if tester != "tolerant" else 0.5,
        eps1=getattr(args, "eps1", None),
        eps2=getattr(args, "eps2", None),
        trials=args.trials,
        seed=_seed(args),
        tester=tester,
        t=args.t,
        n_rounds=args.rounds,
        far_coefficient=args.far_coefficient,
    )


def _print_summaries(report) -> None:
    for s in report.scenarios:
        correct = "n/a" if s.correct_frequency is None else f"{s.correct_frequency:.4f}"
        print(
            f"scenario {s.scenario}: n={s.spec.n} {s.spec.tester}/{s.spec.hypothesis} "
            f"accept(H0)={s.accept_frequency:.4f} correct={correct} "
            f"wilson95=[{s.ci_low:.4f}, {s.ci_high:.4f}] trials={s.trials} "
            f"mean_queries={s.mean_queries:.1f} mean_time={s.mean_time:.4f} "
            f"size_hypothesis={s.size_hypothesis} promise_ok={s.promise_ok}"
        )


def _run_scenario(tester: str):
    def run(args) -> int:
        report = acceptance_sweep([_scenario(args, tester)], workers=args.workers)
        _print_summaries(report)
        _write_reports(args, report)
        return OK
    return run


def cmd_multi_test(args) -> int:
    props: list[PropertySet] = [property_k_local(args.n, int(k)) for k in args.k_list.split(",") if k.strip()]
    props += [load_property_file(f) for f in args.property_files.split(",") if f.strip()]
    if not props:
        raise HamtestError("multi-test needs --k-list or --property-files")
    family = build_mub_family(args.n)
    rows = []
    h0_counts = np.zeros(len(props), dtype=int)
    for trial, seq in enumerate(substreams(_seed(args), args.trials)):
        inst_seq, tester_seq = seq.spawn(2)
        h = (load_hamiltonian(Path(args.hamiltonian).read_text()) if args.hamiltonian
             else random_property_hamiltonian(props[0], inst_seq))
        oracle = EvolutionOracle(h)
        report = run_multi_test(oracle, family, props, args.eps, args.delta, tester_seq)
        h0_counts += np.array([v == "H0" for v in report.verdicts])
        rows.append({"trial": trial, "verdicts": report.verdicts, "violation_rates": report.violation_rates,
                     "threshold": report.threshold, "queries": report.queries_used,
                     "total_time": report.total_evolution_time})
    for idx, count in enumerate(h0_counts.tolist()):
        print(f"property {idx}: accept(H0)={count / args.trials:.4f} over {args.trials} trials")
    _write_reports(args, rows)
    return OK


def cmd_sweep(args) -> int:
    grid = []
    for line in Path(args.grid).read_text().splitlines():
        if line.strip():
            spec = json.loads(line)
            if spec.get("property_labels") is not None:
                spec["property_labels"] = tuple(spec["property_labels"])
            grid.append(ScenarioSpec(**spec))
    report = acceptance_sweep(grid, workers=args.workers)
    _print_summaries(report)
    _write_reports(args, report)
    return OK


def cmd_gadget_stats(args) -> int:
    res = gadget_separation_stats(args.n, args.eps, args.samples, make_rng(_seed(args)))
    _write_reports(args, [res])
    print(f"fourth moment {res.details['fourth']:.6f} (bound {res.details['fourth_bound']:.6f}, "
          f"exact {res.details['fourth_exact']:.6f})")
    return _print_checks([res])


def cmd_haar_moments(args) -> int:
    from .oracles import CheckResult

    estimates = weingarten_monte_carlo(args.d, args.samples, make_rng(_seed(args)))
    checks = []
    for ct in CYCLE_TYPES:
        mean, se = estimates[ct]
        ref = weingarten_value(ct, args.d)
        dev = abs(mean - ref)
        checks.append(CheckResult(f"weingarten{ct}", mean, ref, dev, SIGMAS * se, dev <= SIGMAS * se, {"sigma": se}))
    _write_reports(args, checks)
    return _print_checks(checks)


def cmd_norm_probe(args) -> int:
    times = [float(v) for v in args.times.split(",")]
    if args.h_file and args.h2_file:
        pairs = [(load_hamiltonian(Path(args.h_file).read_text()), load_hamiltonian(Path(args.h2_file).read_text()))]
    else:
        rng = make_rng(_seed(args))
        paulis = list(all_paulis(args.n, include_identity=False))
        pairs = []
        for _ in range(args.pairs):
            pairs.append(tuple(
                PauliHamiltonian(args.n, dict(zip(paulis, rng.uniform(-1, 1, len(paulis)) / len(paulis))))
                for _ in range(2)
            ))
    checks = []
    for h, h2 in pairs:
        res = norm_relation_probe(h, h2, times)
        checks.append(res)
        print(f"choi slope {res.measured:.6f} vs {res.reference:.6f}; dist_inf slope "
              f"{res.details['dist_inf_slope']:.6f} vs half spectral width "
              f"{res.details['spectral_half_width']:.6f} (operator norm {res.details['operator_norm']:.6f})")
    _write_reports(args, checks)
    return _print_checks(checks)


COMMANDS = {
    "build-mub": cmd_build_mub,
    "verify": cmd_verify,
    "test": _run_scenario("single"),
    "ancilla-test": _run_scenario("ancilla"),
    "tolerant": _run_scenario("tolerant"),
    "multi-test": cmd_multi_test,
    "sweep": cmd_sweep,
    "gadget-stats": cmd_gadget_stats,
    "haar-moments": cmd_haar_moments,
    "norm-probe": cmd_norm_probe,
}


def run_cli(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and USAGE
    except (HamtestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    try:
        return COMMANDS[args.command](args)
    except (HamtestError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE


def main() -> None:
    sys.exit(run_cli())


__all__ = ["build_parser", "main", "run_cli"]
