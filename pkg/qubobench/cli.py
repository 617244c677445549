import csv
import io
import logging
import math
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from click import Context as ClickContext
from click import UsageError
from rich.console import Console
from rich.table import Table
from typer import Argument, Context, Exit, Option, Typer
from typer.core import TyperGroup

from qubobench import __version__
from qubobench.analysis.metrics import SUMMARY_HEADER
from qubobench.benchmark import run_batch
from qubobench.config import load_config, parse_value
from qubobench.constants import (
    CHAIN_STRENGTH,
    CHIMERA_SHORE,
    DEFAULT_KAPPA,
    DEFAULT_N_VACANCIES,
    DEFAULT_SUPERCELL_DIM,
    EXIT_CONFIG,
    EXIT_NO_EMBEDDING,
    METHOD_LAMBDA,
    MINOR_MAX_TRIES,
    N_EXPERIMENTS,
    SA_LAMBDA,
    TT_EPSILON,
)
from qubobench.errors import ConfigError, EmbeddingError, GuardError, QuboBenchError
from qubobench.harness.grid import GridSpec, grid_search, parse_axis
from qubobench.harness.records import InstanceSpec
from qubobench.harness.report import emit_report
from qubobench.harness.scaling import scaling_run
from qubobench.harness.store import ExperimentStore
from qubobench.harness.verify import run_oracle_checks
from qubobench.problem.lattice import build_supercell
from qubobench.problem.qubo import QuboInstance, constrained_extrema, to_ising
from qubobench.solvers.embedding import (
    chimera_topology,
    clique_embedding,
    embedding_stats,
    logical_edges,
    logical_graph,
    minor_embedding,
    parse_topology,
    validate_embedding,
)
from qubobench.utils import configure_logging, prepare_output_dir


class QubobenchGroup(TyperGroup):
    """Reports command line usage errors with the configuration exit code."""

    def make_context(self, *args: Any, **kwargs: Any) -> ClickContext:
        try:
            return super().make_context(*args, **kwargs)
        except UsageError as error:
            error.exit_code = EXIT_CONFIG
            raise

    def invoke(self, ctx: ClickContext) -> Any:
        try:
            return super().invoke(ctx)
        except UsageError as error:
            error.exit_code = EXIT_CONFIG
            raise


app = Typer(add_completion=False, cls=QubobenchGroup)
console = Console()

# Exit code of an all-failed batch, by the exception class named in the failure marker
FAILURE_EXIT_CODES = {
    "GuardError": GuardError.exit_code,
    "EmbeddingError": EmbeddingError.exit_code,
    "ConfigError": ConfigError.exit_code,
}


def version_func(flag: bool):
    if flag:
        print("qubobench version:", __version__)
        raise Exit(code=0)


@contextmanager
def cli_errors():
    try:
        yield
    except QuboBenchError as error:
        console.print(f"[bold red]Error:[/bold red] {error}")
        raise Exit(code=error.exit_code)


def parse_params(params: Optional[List[str]]) -> Dict[str, Any]:
    parsed: Dict[str, Any] = {}
    for item in params or []:
        key, separator, value = item.partition("=")
        if not separator or not key.strip():
            raise ConfigError(f"Hyperparameter '{item}' must look like key=value.")
        parsed[key.strip().replace("-", "_")] = parse_value(value)
    return parsed


def resolve_instance(
    method: str,
    supercell_dim: int,
    kappa: float,
    lambda_coeff: Optional[float],
    n_vacancies: int,
    qubo: Optional[Path],
) -> Union[InstanceSpec, QuboInstance]:
    if qubo is not None:
        return QuboInstance.from_json(qubo.read_text(encoding="utf-8"))
    if lambda_coeff is None:
        lambda_coeff = METHOD_LAMBDA.get(method, SA_LAMBDA)
    return InstanceSpec(supercell_dim, kappa, lambda_coeff, n_vacancies)


def csv_rows(text: str) -> List[List[str]]:
    return [row for row in csv.reader(io.StringIO(text)) if row]


def summary_table(title: str, rows: List[List[str]], header: List[str] = SUMMARY_HEADER) -> Table:
    table = Table(title=title)
    for name in header:
        table.add_column(name)
    for row in rows:
        table.add_row(*[str(cell) for cell in row])
    return table


@app.callback()
def qubobench(
    ctx: Context,
    version: bool = Option(None, "--version", "-v", callback=version_func, is_eager=True),
    verbose: bool = Option(False, "--verbose", "-V", help="Log at DEBUG level."),
    config: Optional[Path] = Option(
        None,
        "--config",
        "-c",
        help="TOML file with option defaults (top level for every command, [command] tables).",
    ),
) -> None:
    """qubobench: graphene vacancy QUBO benchmark over classical and quantum-inspired solvers."""
    configure_logging(logging.DEBUG if verbose else logging.INFO)
    if config is not None:
        with cli_errors():
            ctx.default_map = load_config(config)


@app.command()
def lattice(
    supercell_dim: int = Option(DEFAULT_SUPERCELL_DIM, "--dim", "-n", help="Supercell dimension."),
    output: Optional[Path] = Option(
        None, "--output", "--out", "-o", help="Edge-list file to write."
    ),
) -> None:
    """Build the periodic graphene supercell graph."""
    with cli_errors():
        graph = build_supercell(supercell_dim)
    text = graph.to_edge_list_text()
    if output is not None:
        output.write_text(text, encoding="utf-8")
        console.print(f"Lattice written to {output}")
    else:
        console.out(text, end="")
    console.print(
        f"N = {graph.n_sites}, {graph.n_edges} bonds, bipartite={graph.is_bipartite()}, "
        f"connected={graph.is_connected()}"
    )


@app.command()
def qubo(
    supercell_dim: int = Option(DEFAULT_SUPERCELL_DIM, "--dim", "-n", help="Supercell dimension."),
    kappa: float = Option(DEFAULT_KAPPA, "--kappa", help="Bond energy."),
    lambda_coeff: float = Option(SA_LAMBDA, "--lambda", "-l", help="Penalty coefficient."),
    n_vacancies: int = Option(DEFAULT_N_VACANCIES, "--vacancies", "-k", help="Vacancy count."),
    output: Optional[Path] = Option(None, "--output", "-o", help="QUBO json file to write."),
) -> None:
    """Build the penalty-encoded QUBO and report its constrained extrema."""
    with cli_errors():
        instance = InstanceSpec(supercell_dim, kappa, lambda_coeff, n_vacancies).build()
    if output is not None:
        output.write_text(instance.to_json(), encoding="utf-8")
        console.print(f"QUBO written to {output}")
    ising = to_ising(instance)
    console.print(
        f"{instance.n_vars} variables, constant offset {instance.constant_offset:g}, "
        f"Ising offset {ising.energy_offset:g}"
    )
    try:
        e_min, e_max, n_ground = constrained_extrema(instance)
    except GuardError as error:
        console.print(f"[yellow]No exact extrema:[/yellow] {error}")
        return
    console.print(f"E_min = {e_min:g} ({n_ground} ground states), E_max = {e_max:g}")


@app.command()
def solve(
    method: str = Option(
        "sa", "--method", "-m", help="brute, random, sa, vqe, anneal-sim or embedded-sa."
    ),
    supercell_dim: int = Option(DEFAULT_SUPERCELL_DIM, "--dim", "-n", help="Supercell dimension."),
    kappa: float = Option(DEFAULT_KAPPA, "--kappa", help="Bond energy."),
    lambda_coeff: Optional[float] = Option(
        None, "--lambda", "-l", help="Penalty coefficient. Defaults to the method's tuned value."
    ),
    n_vacancies: int = Option(DEFAULT_N_VACANCIES, "--vacancies", "-k", help="Vacancy count."),
    qubo: Optional[Path] = Option(
        None, "--qubo", "--instance", "-q", help="QUBO json file instead of a supercell."
    ),
    reads: Optional[int] = Option(None, "--reads", help="SA reads per experiment."),
    sweeps: Optional[int] = Option(None, "--sweeps", help="SA sweeps per read."),
    beta_min: Optional[float] = Option(None, "--beta-min", help="Initial SA inverse temperature."),
    beta_max: Optional[float] = Option(None, "--beta-max", help="Final SA inverse temperature."),
    ansatz: Optional[str] = Option(None, "--ansatz", help="VQE ansatz, realamp or qaoa."),
    reps: Optional[int] = Option(None, "--reps", "--p", help="Ansatz repetitions or QAOA depth."),
    alpha: Optional[float] = Option(None, "--alpha", help="CVaR fraction."),
    shots: Optional[int] = Option(None, "--shots", help="VQE or annealer shots."),
    tol: Optional[float] = Option(None, "--tol", help="Optimizer tolerance."),
    max_iters: Optional[int] = Option(None, "--max-iters", help="Optimizer iteration cap."),
    anneal_time: Optional[float] = Option(None, "--anneal-time", help="Annealing time."),
    steps: Optional[int] = Option(None, "--steps", help="Annealer time steps."),
    param: Optional[List[str]] = Option(None, "--param", "-p", help="Hyperparameter key=value."),
    experiments: int = Option(N_EXPERIMENTS, "--experiments", "--repeats", "-e", help="Repeats."),
    seed: int = Option(0, "--seed", "-s", help="Base seed."),
    epsilon: float = Option(TT_EPSILON, "--epsilon", help="Relative gap of TT_epsilon."),
    threads: Optional[int] = Option(
        None, "--threads", "-t", envvar="QUBOBENCH_THREADS", help="Worker pool size."
    ),
    output: Optional[Path] = Option(
        None, "--output", "--out", "-o", help="JSONL store to append to."
    ),
    samples_output: Optional[Path] = Option(
        None, "--samples-out", help="JSONL file for the pooled samples of every experiment."
    ),
) -> None:
    """Run repeated experiments of one method and print the summary row."""
    flags = {
        "reads": reads,
        "sweeps": sweeps,
        "beta_min": beta_min,
        "beta_max": beta_max,
        "ansatz": ansatz,
        "reps": reps,
        "alpha": alpha,
        "shots": shots,
        "tol": tol,
        "max_iters": max_iters,
        "anneal_time": anneal_time,
        "steps": steps,
    }
    with cli_errors():
        params = parse_params(param)
        # Dedicated flags win over --param
        params.update({key: value for key, value in flags.items() if value is not None})
        instance = resolve_instance(method, supercell_dim, kappa, lambda_coeff, n_vacancies, qubo)
        batch = run_batch(
            method,
            instance,
            params,
            experiments,
            seed,
            threads=threads,
            store_path=output,
            epsilon=epsilon,
        )
    pooled = batch.pooled_samples()
    if samples_output is not None and pooled is not None:
        samples_output.write_text(pooled.to_jsonl(), encoding="utf-8")
        console.print(f"Samples written to {samples_output}")
    for record in batch.failures:
        console.print(f"[yellow]Experiment {record.index} failed:[/yellow] {record.failure}")
    if batch.report is None:
        console.print("[bold red]No experiment succeeded.[/bold red]")
        first = batch.failures[0].failure if batch.failures else ""
        raise Exit(code=FAILURE_EXIT_CODES.get(first.split(":", 1)[0], 1))
    console.print(summary_table(f"{method} summary", [batch.report.summary_row(method)]))
    if output is not None:
        console.print(f"Records appended to {output}")


@app.command()
def embed(
    supercell_dim: int = Option(DEFAULT_SUPERCELL_DIM, "--dim", "-n", help="Supercell dimension."),
    kappa: float = Option(DEFAULT_KAPPA, "--kappa", help="Bond energy."),
    lambda_coeff: float = Option(
        METHOD_LAMBDA["embedded-sa"], "--lambda", "-l", help="Penalty coefficient."
    ),
    n_vacancies: int = Option(DEFAULT_N_VACANCIES, "--vacancies", "-k", help="Vacancy count."),
    topology: Optional[str] = Option(
        None, "--topology", "--topo", "-g", help="chimera:m,t or a PHYS edge-list file."
    ),
    mode: str = Option("clique", "--mode", help="clique or minor."),
    chain_strength: float = Option(CHAIN_STRENGTH, "--chain-strength", help="Chain coupling."),
    max_tries: int = Option(MINOR_MAX_TRIES, "--max-tries", help="Minor embedding restarts."),
    seed: int = Option(0, "--seed", "-s", help="Seed of the minor embedding heuristic."),
    output: Optional[Path] = Option(None, "--output", "-o", help="Embedding json file to write."),
) -> None:
    """Embed the instance's Ising graph onto a hardware topology."""
    with cli_errors():
        ising = to_ising(InstanceSpec(supercell_dim, kappa, lambda_coeff, n_vacancies).build())
        if topology is None:
            topo = chimera_topology(math.ceil(ising.n_spins / CHIMERA_SHORE), CHIMERA_SHORE)
        else:
            topo = parse_topology(topology)
        if mode == "clique":
            embedding = clique_embedding(ising.n_spins, topo, chain_strength)
        elif mode == "minor":
            embedding = minor_embedding(logical_graph(ising), topo, seed, max_tries, chain_strength)
        else:
            raise ConfigError(f"Unknown embedding mode '{mode}'. Use clique or minor.")
    if embedding is None:
        console.print(f"[bold red]No embedding found after {max_tries} tries.[/bold red]")
        raise Exit(code=EXIT_NO_EMBEDDING)
    violations = validate_embedding(
        embedding, logical_edges(ising), topo, variables=range(ising.n_spins)
    )
    stats = embedding_stats(embedding)
    console.print(
        f"{stats['n_chains']} chains on {stats['n_qubits']} of {topo.n_physical} qubits, "
        f"mean chain length {stats['mean_chain_length']:.3g}, max {stats['max_chain_length']}"
    )
    if violations:
        for violation in violations:
            console.print(f"[red]{violation}[/red]")
        raise Exit(code=EXIT_NO_EMBEDDING)
    if output is not None:
        output.write_text(embedding.to_json(), encoding="utf-8")
        console.print(f"Embedding written to {output}")


@app.command()
def sweep(
    method: str = Option("sa", "--method", "-m", help="Method id."),
    axis: Optional[List[str]] = Option(None, "--axis", "-a", help="Grid axis name=v1,v2,..."),
    objective: str = Option("max_mean_ps", "--objective", help="max_mean_ps or min_runtime."),
    repeats: int = Option(1, "--repeats", "-r", help="Experiments per grid point."),
    supercell_dim: int = Option(DEFAULT_SUPERCELL_DIM, "--dim", "-n", help="Supercell dimension."),
    kappa: float = Option(DEFAULT_KAPPA, "--kappa", help="Bond energy."),
    lambda_coeff: Optional[float] = Option(None, "--lambda", "-l", help="Penalty coefficient."),
    n_vacancies: int = Option(DEFAULT_N_VACANCIES, "--vacancies", "-k", help="Vacancy count."),
    param: Optional[List[str]] = Option(
        None, "--param", "-p", help="Fixed hyperparameter key=value."
    ),
    seed: int = Option(0, "--seed", "-s", help="Base seed of every grid point."),
    threads: Optional[int] = Option(
        None, "--threads", "-t", envvar="QUBOBENCH_THREADS", help="Worker pool size."
    ),
    output: Optional[Path] = Option(None, "--output", "-o", help="CSV file for the surface."),
    store: Optional[Path] = Option(None, "--store", help="JSONL store for every record."),
) -> None:
    """Grid search over hyperparameters, instance keys included."""
    with cli_errors():
        axes = dict(parse_axis(item) for item in axis or [])
        grid = GridSpec(axes=axes, objective=objective, repeats_per_point=repeats)
        instance = resolve_instance(method, supercell_dim, kappa, lambda_coeff, n_vacancies, None)
        result = grid_search(
            method,
            instance,
            grid,
            seed,
            base_params=parse_params(param),
            threads=threads,
            store_path=store,
        )
    surface = result.to_csv()
    rows = csv_rows(surface)
    console.print(summary_table(f"{method} grid", rows[1:], rows[0]))
    console.print(f"Best point: {result.best_point.params} (Ps = {result.best_point.mean_ps:.4f})")
    if output is not None:
        output.write_text(surface, encoding="utf-8")
        console.print(f"Surface written to {output}")


@app.command()
def scale(
    method: str = Option("sa", "--method", "-m", help="Method id."),
    dims: str = Option("3,4,5", "--dims", "-d", help="Comma separated supercell dimensions."),
    kappa: float = Option(DEFAULT_KAPPA, "--kappa", help="Bond energy."),
    lambda_coeff: Optional[float] = Option(None, "--lambda", "-l", help="Penalty coefficient."),
    n_vacancies: int = Option(DEFAULT_N_VACANCIES, "--vacancies", "-k", help="Vacancy count."),
    param: Optional[List[str]] = Option(None, "--param", "-p", help="Hyperparameter key=value."),
    repeats: int = Option(N_EXPERIMENTS, "--repeats", "-r", help="Experiments per size."),
    seed: int = Option(0, "--seed", "-s", help="Base seed."),
    threads: Optional[int] = Option(
        None, "--threads", "-t", envvar="QUBOBENCH_THREADS", help="Worker pool size."
    ),
    output: Optional[Path] = Option(None, "--output", "-o", help="CSV file for the table."),
    store: Optional[Path] = Option(None, "--store", help="JSONL store for every record."),
) -> None:
    """Runtime and Ps against problem size at fixed hyperparameters."""
    with cli_errors():
        try:
            supercell_dims = [int(value) for value in dims.split(",") if value.strip()]
        except ValueError as error:
            raise ConfigError(f"Dimensions must be integers, got '{dims}'.") from error
        template = resolve_instance(
            method, DEFAULT_SUPERCELL_DIM, kappa, lambda_coeff, n_vacancies, None
        )
        table = scaling_run(
            method,
            supercell_dims,
            parse_params(param),
            repeats,
            seed,
            template=template,
            threads=threads,
            store_path=store,
        )
    text = table.to_csv()
    rows = csv_rows(text)
    console.print(summary_table(f"{method} scaling", rows[1:], rows[0]))
    if table.slope is not None:
        console.print(f"Log-log runtime slope: {table.slope:.3f}")
    if output is not None:
        output.write_text(text, encoding="utf-8")
        console.print(f"Scaling table written to {output}")


@app.command()
def report(
    store: Path = Argument(..., help="JSONL store to summarise."),
    output_dir: Optional[Path] = Option(None, "--output-dir", "-o", help="Directory for the CSVs."),
) -> None:
    """Summary table, energy distributions and convergence data from a store."""
    with cli_errors():
        records = ExperimentStore(store).load()
        data = emit_report(records)
    console.print(summary_table("summary", csv_rows(data.summary_csv)[1:]))
    if output_dir is not None:
        prepare_output_dir(output_dir)
        output_dir.joinpath("summary.csv").write_text(data.summary_csv, encoding="utf-8")
        output_dir.joinpath("distribution.csv").write_text(data.distribution_data, encoding="utf-8")
        output_dir.joinpath("convergence.csv").write_text(data.convergence_data, encoding="utf-8")
        console.print(f"Report written to {output_dir}")


@app.command()
def verify() -> None:
    """Oracle cross-checks of the instance builder, Ising mapping and embeddings."""
    with cli_errors():
        results = run_oracle_checks()
    table = Table(title="oracle checks")
    table.add_column("check")
    table.add_column("result")
    table.add_column("detail")
    for result in results:
        status = "[green]ok[/green]" if result.passed else "[red]FAILED[/red]"
        table.add_row(result.name, status, result.detail)
    console.print(table)
    if not all(result.passed for result in results):
        raise Exit(code=1)
