"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 input error, 3 limit reached.
"""

from __future__ import annotations

import json
import math
import statistics
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click

from .approx import MergePolicy, build_approx
from .catalog import CATALOG
from .follower import FollowerOracle
from .formats import load_instance, save_instance, write_native
from .generator import GeneratorConfig, budget_schedule, generate_structured
from .instance import InstanceError
from .milp import BACKENDS, DEFAULT_BACKEND
from .network import NetworkTooLarge, build_state_network, network_stats, reduce, to_dot, variable_order
from .oracle import DEFAULT_CAP, OracleTooLarge, brute_force_bilevel
from .reformulation import compute_big_m
from .solver import SolvePolicy, solve_exact, solve_relaxation
from .strengthen import RobustModelParams, SampleSet, default_epsilon, strengthen_network

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_LIMIT = 0, 1, 2, 3


class LimitReached(click.ClickException):
    exit_code = EXIT_LIMIT


class InputError(click.ClickException):
    exit_code = EXIT_INPUT


def _load(path: str, aux: str | None = None):
    if path.startswith("catalog:"):
        key = path.split(":", 1)[1]
        if key not in CATALOG:
            raise InputError(f"unknown catalog instance {key!r}; known: {', '.join(sorted(CATALOG))}")
        return CATALOG[key]()
    try:
        return load_instance(path, aux)
    except InstanceError as exc:
        raise InputError(str(exc)) from exc


def _budget(value: str | None, n_l: int) -> int | None:
    if value is None or value == "auto":
        return budget_schedule(n_l)
    if value in ("inf", "exact"):
        return None
    try:
        b = int(value)
    except ValueError:
        raise click.BadParameter(f"expected an integer, 'auto' or 'inf', got {value!r}") from None
    if b < 1:
        raise click.BadParameter("budget must be at least 1")
    return b


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        click.echo(text, nl=not text.endswith("\n"))


_backend = click.option("--backend", type=click.Choice(BACKENDS), default=DEFAULT_BACKEND, show_default=True)
_budget_opt = click.option("--budget", default="auto", show_default=True,
                           help="Nodes per layer: an integer, 'auto' (by leader size) or 'inf' (exact network).")


@click.group()
def cli() -> None:
    """Value-network bounds and exact solutions for binary bilevel programs."""


@cli.command()
@click.option("--n-l", "n_l", type=int, required=True)
@click.option("--m", type=int, required=True)
@click.option("--n-f", "n_f", type=int, default=10, show_default=True)
@click.option("--alpha", type=int, default=1, show_default=True)
@click.option("--beta", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--m-l", "m_l", type=int, default=None, help="Leader rows (default: m).")
@click.option("-o", "--output", default=None, help="Output file (.json or .mps); stdout JSON when omitted.")
def generate(n_l, m, n_f, alpha, beta, seed, m_l, output):
    """Write a seeded random instance."""
    try:
        cfg = GeneratorConfig(n_l=n_l, m=m, alpha=alpha, beta=beta, seed=seed, n_f=n_f, m_L=m_l)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    inst = generate_structured(cfg)
    if output:
        for p in save_instance(inst, output):
            click.echo(f"wrote {p}", err=True)
    else:
        click.echo(write_native(inst), nl=False)


@cli.command()
@click.argument("source")
@click.argument("target")
@click.option("--aux", default=None, help="AUX file of an MPS source (default: same stem).")
def convert(source, target, aux):
    """Convert between native JSON and MPS+AUX (chosen by file suffix)."""
    inst = _load(source, aux)
    try:
        for p in save_instance(inst, target):
            click.echo(f"wrote {p}", err=True)
    except InstanceError as exc:
        raise InputError(str(exc)) from exc


@cli.command()
@click.argument("source")
@click.option("--exact", is_flag=True, help="Build the exact state network.")
@_budget_opt
@click.option("--strategy", type=click.Choice(["longest_path", "first_pair"]), default="longest_path")
@click.option("--order", type=click.Choice(["native", "coef_sum"]), default="native")
@click.option("--strengthen/--no-strengthen", default=False)
@click.option("--dot", default=None, help="Write the network in DOT format here.")
@_backend
def network(source, exact, budget, strategy, order, strengthen, dot, backend):
    """Build a network and print its statistics as JSON."""
    inst = _load(source)
    oracle = FollowerOracle(inst, backend=backend)
    t0 = time.perf_counter()
    try:
        if exact or _budget(budget, inst.n_l) is None:
            raw = build_state_network(inst, oracle, variable_order(inst, order))
        else:
            raw = build_approx(inst, MergePolicy(_budget(budget, inst.n_l), strategy, order=order), oracle,
                               reduce_output=False)
    except NetworkTooLarge as exc:
        raise LimitReached(str(exc)) from exc
    net = reduce(raw)
    if strengthen and not exact:
        big = compute_big_m(inst, oracle=oracle, backend=backend)
        net = strengthen_network(inst, net, SampleSet(inst.n_f, big.samples) if big.samples else None,
                                 RobustModelParams(epsilon=default_epsilon(inst)), oracle, backend)
    stats = network_stats(net, raw)
    stats["kind"] = "exact" if exact else "approx"
    stats["seconds"] = round(time.perf_counter() - t0, 6)
    if dot:
        Path(dot).write_text(to_dot(net, inst.name or "network"))
    click.echo(json.dumps(stats, sort_keys=True))


def _policy(inst, budget, strengthen, max_strengthen_iters, max_iters, time_limit, backend) -> SolvePolicy:
    params = RobustModelParams(epsilon=default_epsilon(inst), max_iterations=max_strengthen_iters)
    return SolvePolicy(budget=_budget(budget, inst.n_l), strengthen=strengthen, strengthen_params=params,
                       max_iterations=max_iters, time_limit=time_limit, backend=backend)


@cli.command()
@click.argument("source")
@click.option("--variant", type=click.Choice(["hpr", "dd", "ddmaxmin"]), default="dd", show_default=True)
@_budget_opt
@click.option("--max-strengthen-iters", type=int, default=5, show_default=True)
@click.option("--known-optimum", type=float, default=None, help="Report the gap against this value.")
@click.option("--time-limit", type=float, default=None)
@_backend
def bound(source, variant, budget, max_strengthen_iters, known_optimum, time_limit, backend):
    """Solve a relaxation and print the lower bound and gap."""
    inst = _load(source)
    policy = _policy(inst, budget, variant == "ddmaxmin", max_strengthen_iters, 500, time_limit, backend)
    try:
        report = solve_relaxation(inst, variant, policy, known_optimum)
    except NetworkTooLarge as exc:
        raise LimitReached(str(exc)) from exc
    click.echo(report.to_json())
    if report.status == "LimitReached":
        sys.exit(EXIT_LIMIT)


@cli.command()
@click.argument("source")
@_budget_opt
@click.option("--strengthen/--no-strengthen", default=True, show_default=True)
@click.option("--max-strengthen-iters", type=int, default=5, show_default=True)
@click.option("--max-iters", type=int, default=500, show_default=True)
@click.option("--time-limit", type=float, default=None)
@click.option("--known-optimum", type=float, default=None)
@click.option("--log", "log_path", default=None, help="Write the per-iteration log (TSV) here.")
@click.option("--report", "report_path", default=None, help="Write the JSON report here instead of stdout.")
@_backend
def solve(source, budget, strengthen, max_strengthen_iters, max_iters, time_limit, known_optimum, log_path,
          report_path, backend):
    """Solve to optimality with blocking cuts and print the JSON report."""
    inst = _load(source)
    policy = _policy(inst, budget, strengthen, max_strengthen_iters, max_iters, time_limit, backend)
    try:
        report = solve_exact(inst, policy, known_optimum)
    except NetworkTooLarge as exc:
        raise LimitReached(str(exc)) from exc
    if log_path:
        Path(log_path).write_text(report.log_tsv())
    _emit(report.to_json() + "\n", report_path)
    if report.status not in ("Optimal", "Infeasible"):
        sys.exit(EXIT_LIMIT)


@cli.command()
@click.argument("source")
@click.option("--cap", type=int, default=DEFAULT_CAP, show_default=True,
              help="Largest 2^n_l * 2^n_f the enumeration may face.")
def oracle(source, cap):
    """Solve by exhaustive enumeration."""
    inst = _load(source)
    try:
        res = brute_force_bilevel(inst, cap)
    except OracleTooLarge as exc:
        raise LimitReached(str(exc)) from exc
    out = {"status": res.status, "objective": res.value if res.feasible else None,
           "x": list(res.x) if res.x else None, "y": list(res.y) if res.y else None, "keys": res.keys}
    click.echo(json.dumps(out, sort_keys=True))


def _sweep_row(args):
    cfg, budget, time_limit, backend = args
    inst = generate_structured(cfg)
    policy = SolvePolicy(budget=budget if budget is not None else budget_schedule(cfg.n_l),
                         time_limit=time_limit, backend=backend)
    t0 = time.perf_counter()
    try:
        best = brute_force_bilevel(inst).value
        reference = "oracle"
    except OracleTooLarge:
        exact = solve_exact(inst, policy)
        best, reference = exact.objective, "incumbent"
    oracle_time = time.perf_counter() - t0
    row = {"reference": reference, "optimum": best, "oracle_s": oracle_time}
    for variant in ("hpr", "dd", "ddmaxmin"):
        rep = solve_relaxation(inst, variant, policy, best if best is not None and math.isfinite(best) else None)
        row[f"{variant}_gap"] = rep.gap
        row[f"{variant}_s"] = rep.timings.get("total", 0.0)
        if variant == "dd":
            row["nodes"] = rep.network.get("nodes", 0)
    return cfg, row


def _mean_std(values) -> str:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    if not vals:
        return "-"
    sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return f"{100 * statistics.fmean(vals):.2f}% [{100 * sd:.2f}%]"


def _mean_std_plain(values) -> str:
    vals = [v for v in values if v is not None]
    if not vals:
        return "-"
    sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
    return f"{statistics.fmean(vals):.3f} [{sd:.3f}]"


def _ints(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {text!r}") from None


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {text!r}") from None


@cli.command()
@click.option("--n-l", "n_ls", default="25", show_default=True, help="Comma-separated leader sizes.")
@click.option("--m", "ms", default="1,10,20", show_default=True)
@click.option("--alpha", "alphas", default="1,3,5", show_default=True)
@click.option("--beta", "betas", default="0.1,0.3,0.5", show_default=True)
@click.option("--n-f", "n_f", type=int, default=10, show_default=True)
@click.option("--seeds", type=int, default=5, show_default=True, help="Instances per configuration.")
@click.option("--budget", type=int, default=None, help="Nodes per layer (default: by leader size).")
@click.option("--time-limit", type=float, default=None)
@click.option("--jobs", type=int, default=1, show_default=True)
@click.option("-o", "--output", default=None, help="TSV output file (stdout when omitted).")
@_backend
def sweep(n_ls, ms, alphas, betas, n_f, seeds, budget, time_limit, jobs, output, backend):
    """Gap, size and time table over a grid of generated instances (mean [std])."""
    tasks = []
    for n_l in _ints(n_ls):
        for m in _ints(ms):
            for alpha in _ints(alphas):
                for beta in _floats(betas):
                    for seed in range(seeds):
                        try:
                            cfg = GeneratorConfig(n_l=n_l, m=m, alpha=alpha, beta=beta, seed=seed, n_f=n_f)
                        except ValueError as exc:
                            raise click.BadParameter(str(exc)) from exc
                        tasks.append((cfg, budget, time_limit, backend))
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as pool:
            results = list(pool.map(_sweep_row, tasks))
    else:
        results = [_sweep_row(t) for t in tasks]
    groups: dict[tuple, list[dict]] = {}
    for cfg, row in results:
        groups.setdefault((cfg.n_l, cfg.m, cfg.alpha, cfg.beta), []).append(row)
    lines = ["n_l\tm\talpha\tbeta\tcount\thpr_gap\tdd_gap\tddmaxmin_gap\tdd_nodes\tdd_s\tddmaxmin_s"]
    for (n_l, m, alpha, beta), rows in groups.items():
        lines.append("\t".join([
            str(n_l), str(m), str(alpha), f"{beta:g}", str(len(rows)),
            _mean_std(r["hpr_gap"] for r in rows), _mean_std(r["dd_gap"] for r in rows),
            _mean_std(r["ddmaxmin_gap"] for r in rows), _mean_std_plain(r["nodes"] for r in rows),
            _mean_std_plain(r["dd_s"] for r in rows), _mean_std_plain(r["ddmaxmin_s"] for r in rows),
        ]))
    _emit("\n".join(lines) + "\n", output)


def main(argv: list[str] | None = None) -> int:
    """Run the CLI and return its exit code."""
    try:
        cli.main(args=argv, prog_name="valuenet", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return exc.exit_code
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    return EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
