"""Command-line interface: inspect, synth, simulate, oracle.

Exit codes: 0 success, 1 certification failure (oracle), 2 infeasible
specification, 3 input error, 4 resource cap exceeded.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .formats import (FormatError, load_strategy, model_digest, parse_hoa, parse_model, save_strategy,
                      sha256_text, write_report)
from .graph import compute_maecs, mec_decompose
from .model import ModelError, build_product
from .reduction import DEFAULT_ACTION_CAP, ActionCapExceeded
from .simulation import SimulationError, run_cycles, run_rounds, summarize
from .synthesis import (CompositeController, FiniteMemoryController, InfeasibleError, ProjectedController,
                        RoundTimeout, synthesize)

EXIT_OK, EXIT_FAIL, EXIT_INFEASIBLE, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3, 4


def _read(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_model(path):
    return parse_model(_read(path))


def cmd_inspect(args) -> int:
    m = _load_model(args.model)
    print(f"states\t{m.n_states}")
    print(f"actions\t{m.n_actions}")
    print(f"initial\t{m.state_names[m.initial] if m.initial is not None else '-'}")
    print(f"surveillance\t{m.surveillance or '-'}")
    mecs = mec_decompose(m)
    print(f"mecs\t{len(mecs)}")
    for i, ec in enumerate(mecs):
        names = ",".join(m.state_names[s] for s in sorted(ec.states))
        print(f"mec\t{i}\t{len(ec.states)}\t{names}")
    if args.hoa:
        dra = parse_hoa(_read(args.hoa))
        p = build_product(m, dra, args.sur)
        maecs = compute_maecs(p)
        print(f"dra_states\t{dra.n_states}")
        print(f"acceptance_pairs\t{len(dra.acc)}")
        print(f"product_states\t{p.n_states}")
        print(f"surveillance_states\t{len(p.surveillance)}")
        print(f"maecs\t{len(maecs)}")
        for i, e in enumerate(maecs):
            print(f"maec\t{i}\tpair={e.pair_index}\t{len(e.states)}\tsurveillance={len(e.states & p.surveillance)}")
    return EXIT_OK


def cmd_synth(args) -> int:
    model_text, hoa_text = _read(args.model), _read(args.hoa)
    m = parse_model(model_text)
    dra = parse_hoa(hoa_text)
    res = synthesize(m, dra, args.sur, action_cap=args.action_cap, tol=args.tol,
                     early_exit=not args.no_early_exit, l_floor=args.l_floor, shortcut=args.shortcut)
    save_strategy(res, m, hoa_text, args.output)
    inputs = {"model_sha256": sha256_text(model_text), "hoa_sha256": sha256_text(hoa_text)}
    if args.report:
        write_report(res, args.report, inputs=inputs)
    print(f"optimal_value\t{res.optimal_value:.12g}")
    print(f"product_states\t{res.product.n_states}")
    print(f"maecs\t{len(res.maecs)}")
    print(f"maec_star\t{','.join(map(str, res.selection.maec_star))}")
    print(f"shortcut\t{'used' if res.use_shortcut else ('available' if res.shortcut_available else 'no')}")
    print(f"strategy\t{args.output}")
    return EXIT_OK


def _one_run(job):
    strategy_text, model_text, seed, rounds, cycles, shortcut = job
    m = parse_model(model_text)
    st = load_strategy(strategy_text, m)
    inner = FiniteMemoryController(st.tables) if shortcut else CompositeController(st.tables)
    ctrl = ProjectedController(inner, st.product)
    sur = m.surveillance_states()
    if shortcut:
        rep, _ = run_cycles(ctrl, m, cycles, seed, sur=sur)
    else:
        rep, _ = run_rounds(ctrl, m, rounds, seed, sur=sur, keep_trace=False)
    return rep


def cmd_simulate(args) -> int:
    strategy_text, model_text = _read(args.strategy), _read(args.model)
    m = parse_model(model_text)
    st = load_strategy(strategy_text, m)
    shortcut = st.use_shortcut if args.shortcut is None else args.shortcut
    if shortcut and not st.shortcut_available:
        raise FormatError("strategy: the finite-memory shortcut is not available for this strategy")
    seeds = [args.seed + k for k in range(args.batch)]
    jobs = [(strategy_text, model_text, sd, args.rounds, args.cycles, shortcut) for sd in seeds]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as ex:
            reports = list(ex.map(_one_run, jobs))
    else:
        reports = [_one_run(j) for j in jobs]
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    summary = summarize(reports) if reports else {}
    doc = {
        "kind": "simulation",
        "optimal_value": st.optimal_value,
        "rounds_requested": args.rounds,
        "controller": "finite-memory" if shortcut else "composite",
        "runs": [r.to_dict(include_timing=args.timing) for r in reports],
        "summary": summary,
        "inputs": {"model_sha256": sha256_text(model_text), "strategy_sha256": sha256_text(strategy_text),
                   "model_digest": model_digest(m)},
    }
    write_report(doc, out / "report.json")
    with open(out / "rounds.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["seed", "round", "k", "phase1_cost", "cycles", "phase2_cost", "average", "cap", "exit"])
        for r in reports:
            for x in r.rounds:
                w.writerow([r.seed, x["round"], x["k"], repr(x["phase1_cost"]), x["cycles"],
                            repr(x["phase2_cost"]), repr(x["average"]), x["cap"], x["exit"]])
    if not args.no_plots and reports:
        from .plotting import plot_cycles, plot_trajectory
        plot_trajectory(reports, st.optimal_value, out / "acpc_trajectory.png")
        if not shortcut:
            plot_cycles(reports, out / "cycles_per_round.png")
    print("seed\tsteps\tcycles\tacpc\tacpc_sharp\tbad_visits")
    for r in reports:
        acpc = "nan" if r.acpc is None else f"{r.acpc:.6f}"
        print(f"{r.seed}\t{r.total_steps}\t{r.cycles}\t{acpc}\t{r.acpc_sharp:.6f}\t{r.bad_visits}")
    if summary:
        print(f"# mean_acpc_sharp\t{summary['mean_acpc_sharp']:.6f}\toptimal\t{st.optimal_value:.6f}")
        print(f"# cycles_per_round mean\t{summary['mean_cycles_per_round']:.2f}\tmedian\t{summary['median_cycles_per_round']}")
    print(f"# report\t{out / 'report.json'}")
    return EXIT_OK


def cmd_oracle(args) -> int:
    from . import certify
    m = _load_model(args.model)
    dra = parse_hoa(_read(args.hoa)) if args.hoa else None
    results = certify.certify_model(m, dra, args.sur, limit=args.limit)
    failed = 0
    for r in results:
        print(f"{r.status}\t{r.name}\t{r.detail}")
        failed += r.status == "FAIL"
    return EXIT_FAIL if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="acpc-synth", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("inspect", help="validate a model and list its (accepting) end components")
    p.add_argument("model")
    p.add_argument("--hoa", help="Rabin automaton in the HOA subset")
    p.add_argument("--sur", help="surveillance proposition (default: from the model)")
    p.set_defaults(func=cmd_inspect)

    p = sub.add_parser("synth", help="synthesize an optimal controller")
    p.add_argument("model")
    p.add_argument("hoa")
    p.add_argument("--sur", help="surveillance proposition (default: from the model)")
    p.add_argument("-o", "--output", default="strategy.json")
    p.add_argument("--report", help="write a synthesis report (JSON)")
    p.add_argument("--action-cap", type=int, default=DEFAULT_ACTION_CAP)
    p.add_argument("--tol", type=float, default=1e-10, help="span tolerance of relative value iteration")
    p.add_argument("--no-early-exit", action="store_true")
    p.add_argument("--l-floor", type=int, default=1)
    p.add_argument("--shortcut", action="store_true", help="use the finite-memory controller when available")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("simulate", help="simulate a strategy on its model")
    p.add_argument("strategy")
    p.add_argument("model")
    p.add_argument("--rounds", type=int, default=100)
    p.add_argument("--cycles", type=int, default=10_000, help="cycles per run for the finite-memory controller")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--batch", type=int, default=1)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out-dir", default="sim_out")
    p.add_argument("--no-plots", action="store_true")
    p.add_argument("--timing", action="store_true", help="include wall time (breaks byte-identity)")
    g = p.add_mutually_exclusive_group()
    g.add_argument("--shortcut", dest="shortcut", action="store_true", default=None)
    g.add_argument("--composite", dest="shortcut", action="store_false")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("oracle", help="certify the solvers on a model with brute-force oracles")
    p.add_argument("model")
    p.add_argument("--hoa")
    p.add_argument("--sur")
    p.add_argument("--limit", type=int, default=200_000, help="policy enumeration limit")
    p.set_defaults(func=cmd_oracle)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ActionCapExceeded, RoundTimeout, SimulationError) as exc:
        print(f"resource cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (ModelError, OSError, json.JSONDecodeError, UnicodeDecodeError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
