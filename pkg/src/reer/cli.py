"""Command-line front end: ``reer simulate | stream | eval``.

Exit status is 0 on success, 1 on a runtime or data failure and 2 on a
usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import List, Optional

from .baselines import (
    DcerState,
    PaerState,
    WeightMode,
    dcer_finalize,
    dcer_init,
    dcer_update,
    paer_finalize,
    paer_init,
    paer_update,
)
from .expectile import Coefficients, IrlsConfig, NoConvergenceError, check_tau
from .linalg import SingularMatrixError
from .renewable import SummaryState, init_state, renew_update
from .simulation import METHODS, CASES, Scenario, SimConfig, run_experiment
from .streams import (
    CsvBatchReader,
    MalformedRowError,
    StateFormatError,
    StreamSpec,
    evaluate_mpe,
    format_float,
    load_state,
    save_state,
)

EXIT_OK, EXIT_FAILURE, EXIT_USAGE = 0, 1, 2


class _Failure(Exception):
    """Runtime failure reported with exit status 1."""


def _tau(text: str) -> float:
    try:
        return check_tau(float(text))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {value}")
    return value


def _names(text: str) -> List[str]:
    names = [t.strip() for t in text.split(",") if t.strip()]
    if not names:
        raise argparse.ArgumentTypeError("expected a comma-separated list of names")
    return names


def _methods(text: str) -> List[str]:
    names = [n.lower() for n in _names(text)]
    bad = [n for n in names if n not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {', '.join(bad)}; choose from {', '.join(METHODS)}")
    return names


def _add_csv_args(p: argparse.ArgumentParser, batching: bool) -> None:
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--response", required=True, help="response column name")
    p.add_argument("--features", required=True, type=_names, help="comma-separated feature column names")
    p.add_argument("--no-intercept", action="store_true", help="do not prepend a column of ones")
    p.add_argument("--drop-bad-rows", action="store_true",
                   help="skip rows with missing or non-numeric values instead of failing")
    if batching:
        g = p.add_mutually_exclusive_group(required=True)
        g.add_argument("--batch-size", type=_positive_int, help="chunk rows in file order")
        g.add_argument("--batch-column", help="one batch per (contiguous) value of this column")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="reer", description="Streaming expectile regression.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="{simulate,stream,eval}")

    sim = sub.add_parser("simulate", help="Monte-Carlo comparison on synthetic streams",
                         description="Run replications of a synthetic experiment and write a BIAS/MSE/time CSV.")
    sim.add_argument("--case", type=int, choices=sorted(CASES), default=1)
    sim.add_argument("--scenario", choices=[s.value for s in Scenario], default="s2")
    sim.add_argument("--tau", type=_tau, default=0.25)
    sim.add_argument("--batch-size", type=_positive_int, default=300, help="rows per batch (n_k)")
    sim.add_argument("--num-batches", type=_positive_int,
                     help="batches per stream (default 100; under s1, total-n / batch-size)")
    sim.add_argument("--total-n", type=_positive_int, default=30000,
                     help="total rows under s1 when --num-batches is not given")
    sim.add_argument("--reps", type=_positive_int, default=200)
    sim.add_argument("--seed", type=int, default=0)
    sim.add_argument("--methods", type=_methods, default=list(METHODS), help="comma-separated subset of "
                     + ",".join(METHODS))
    sim.add_argument("--paer-weight", choices=[m.value for m in WeightMode], default=WeightMode.FINAL_FRACTION.value)
    sim.add_argument("--workers", type=_positive_int, help="worker processes (default REER_THREADS or CPU count)")
    sim.add_argument("--allow-failures", action="store_true",
                     help="drop failed replications instead of exiting with status 1")
    sim.add_argument("--out", help="output CSV (default stdout)")
    sim.set_defaults(func=cmd_simulate)

    st = sub.add_parser("stream", help="replay a CSV file as a batch stream",
                        description="Feed CSV batches to an estimator, optionally resuming from a saved state.")
    _add_csv_args(st, batching=True)
    st.add_argument("--method", choices=["reer", "paer", "dcer"], default="reer")
    st.add_argument("--tau", type=_tau, help="expectile level (required unless resuming)")
    st.add_argument("--state", help="state JSON to resume from")
    st.add_argument("--state-out", help="write the final state JSON here")
    st.add_argument("--trace", help="write the per-batch estimate trajectory CSV here")
    st.add_argument("--paer-weight", choices=[m.value for m in WeightMode], default=WeightMode.FINAL_FRACTION.value)
    st.add_argument("--tol", type=float, default=1e-8, help="IRLS tolerance for local fits")
    st.add_argument("--max-iter", type=_positive_int, default=100, help="IRLS iteration cap for local fits")
    st.set_defaults(func=cmd_stream)

    ev = sub.add_parser("eval", help="mean expectile prediction error on held-out data",
                        description="Evaluate the coefficients of a state or coefficients file on a test CSV.")
    ev.add_argument("--state", required=True, help="state or coefficients JSON")
    _add_csv_args(ev, batching=False)
    ev.add_argument("--out", help="also write the report as JSON here")
    ev.set_defaults(func=cmd_eval)
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    num_batches = args.num_batches
    if num_batches is None:
        if args.scenario == Scenario.S1.value:
            if args.total_n % args.batch_size:
                raise _Failure(f"--total-n {args.total_n} is not a multiple of --batch-size {args.batch_size}")
            num_batches = args.total_n // args.batch_size
        else:
            num_batches = 100
    cfg = SimConfig(
        case=args.case, scenario=args.scenario, tau=args.tau, n_k=args.batch_size, num_batches=num_batches,
        reps=args.reps, seed=args.seed, paer_weight=args.paer_weight,
    )
    table = run_experiment(cfg, args.methods, workers=args.workers)
    if table.failures and not args.allow_failures:
        rep, method, msg = table.failures[0]
        raise _Failure(f"replication {rep} failed in {method}: {msg} "
                       f"({len(table.failures)} failed replication(s); --allow-failures drops them)")
    _write_text(args.out, table.to_csv())
    return EXIT_OK


def _write_text(path: Optional[str], text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)


def _check_resume(state, args, p: int) -> float:
    kinds = {SummaryState: "reer", PaerState: "paer", DcerState: "dcer"}
    kind = kinds.get(type(state))
    if kind is None:
        raise StateFormatError("a coefficients file cannot be resumed; pass a reer/paer/dcer state")
    if kind != args.method:
        raise StateFormatError(f"state holds a {kind} estimator but --method is {args.method}")
    if args.tau is not None and args.tau != state.tau:
        raise StateFormatError(f"state was built at tau={state.tau!r}, --tau is {args.tau!r}")
    if state.p != p:
        raise StateFormatError(f"state has p={state.p} but the data give p={p} columns")
    if isinstance(state, PaerState) and state.weight_mode.value != args.paer_weight:
        raise StateFormatError(f"state uses PAER weight {state.weight_mode.value}, --paer-weight is {args.paer_weight}")
    return state.tau


def _estimate(state):
    if isinstance(state, SummaryState):
        return state.beta
    if isinstance(state, PaerState):
        return paer_finalize(state).beta
    return dcer_finalize(state).beta


def cmd_stream(args: argparse.Namespace) -> int:
    spec = StreamSpec(
        source=args.data, response_column=args.response, feature_columns=args.features,
        batch_column=args.batch_column, batch_size=args.batch_size,
        add_intercept=not args.no_intercept, drop_bad_rows=args.drop_bad_rows,
    )
    cfg = IrlsConfig(tol=args.tol, max_iter=args.max_iter)
    state = None
    if args.state is not None:
        state = load_state(args.state)
        tau = _check_resume(state, args, spec.p)
    elif args.tau is None:
        raise _Failure("--tau is required unless resuming with --state")
    else:
        tau = args.tau
        if args.method == "paer":
            state = paer_init(spec.p, tau, args.paer_weight)
        elif args.method == "dcer":
            state = dcer_init(spec.p, tau)

    reader = CsvBatchReader(spec)
    trace = open(args.trace, "w", encoding="utf-8") if args.trace else None
    fed = 0
    try:
        if trace:
            trace.write(",".join(["batch_index", "n"] + [f"beta_{j}" for j in range(spec.p)]) + "\n")
        for batch in reader:
            index = (state.batches_seen if state is not None else 0) + 1
            try:
                if state is None:
                    state = init_state(batch, tau, cfg)
                elif isinstance(state, SummaryState):
                    state = renew_update(state, batch)
                elif isinstance(state, PaerState):
                    state = paer_update(state, batch, cfg)
                else:
                    state = dcer_update(state, batch, cfg)
            except (ValueError, SingularMatrixError, NoConvergenceError) as exc:
                raise _Failure(f"batch {index} ({batch.n} rows): {exc}") from None
            fed += 1
            if trace:
                beta = _estimate(state)
                trace.write(",".join([str(index), str(batch.n)] + [format_float(b) for b in beta]) + "\n")
    finally:
        if trace:
            trace.close()

    if state is None or state.batches_seen == 0:
        raise _Failure(f"{args.data} contains no data rows")
    if args.state_out:
        save_state(state, args.state_out)
    beta = _estimate(state)
    print(f"method={args.method} tau={format_float(tau)} batches={fed} rows={reader.rows_read} "
          f"dropped_rows={reader.dropped_rows} total_batches={state.batches_seen} n_seen={state.n_seen}")
    print("beta=" + ",".join(format_float(b) for b in beta))
    return EXIT_OK


def cmd_eval(args: argparse.Namespace) -> int:
    state = load_state(args.state)
    if isinstance(state, Coefficients):
        beta, method = state.beta, "coefficients"
    else:
        beta = _estimate(state)
        method = {SummaryState: "reer", PaerState: "paer", DcerState: "dcer"}[type(state)]
    spec = StreamSpec(
        source=args.data, response_column=args.response, feature_columns=args.features,
        batch_size=10_000, add_intercept=not args.no_intercept, drop_bad_rows=args.drop_bad_rows,
    )
    if spec.p != beta.size:
        raise StateFormatError(f"coefficients have p={beta.size} but the test data give p={spec.p} columns")
    reader = CsvBatchReader(spec)
    report = evaluate_mpe(beta, state.tau, reader, method=method)
    doc = report.to_dict()
    doc["dropped_rows"] = reader.dropped_rows
    text = json.dumps(doc)
    print(text)
    if args.out:
        _write_text(args.out, text + "\n")
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return args.func(args)
    except (_Failure, MalformedRowError, StateFormatError, ValueError, SingularMatrixError,
            NoConvergenceError, OSError) as exc:
        print(f"reer {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
