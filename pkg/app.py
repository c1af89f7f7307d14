import logging
import sys
import time
from functools import wraps
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import click
from dotenv import load_dotenv

from config.constants import CSV_HEADERS, MCMC_CONSTANTS, TOLERANCES, TOOL_NAME, TOOL_VERSION, get_csv_header
from config.settings import get_setting
from core.runner import DimerEfpRunner
from utils.config_manager import ConfigManager
from utils.error_handler import ErrorHandler
from utils.output_writer import OutputWriter, RunManifest
from utils.system_checker import SystemChecker

load_dotenv()

logger = logging.getLogger(__name__)


def configure_logging(level: str) -> None:
    # stderr only, so CSV on stdout stays byte-identical
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.WARNING),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def _columns(subcommand: str) -> str:
    return "CSV columns: " + ",".join(CSV_HEADERS[subcommand])


class RunContext:
    """Global options shared by every subcommand."""

    def __init__(self, output: Optional[Path], manifest: Optional[Path], with_json: bool, threads: int):
        self.output = output
        self.manifest = manifest
        self.with_json = with_json
        self.runner = DimerEfpRunner(workers=threads)
        self.started = time.perf_counter()

    def emit(self, subcommand: str, rows: List[Dict[str, Any]], parameters: Dict[str, Any], seeds=()) -> None:
        manifest = None
        if self.output is not None or self.manifest is not None:
            manifest = RunManifest(
                command=list(sys.argv),
                subcommand=subcommand,
                parameters=parameters,
                seeds=list(seeds),
                system=SystemChecker.get_system_info(),
                settings=ConfigManager.snapshot(),
            )
            manifest.wall_time_seconds = time.perf_counter() - self.started
            manifest.metrics = self.runner.get_metrics_summary()
        OutputWriter.emit(get_csv_header(subcommand), rows, self.output, manifest, self.manifest, self.with_json)


def reports_errors(func: Callable) -> Callable:
    """Turn toolkit errors into a module-qualified message and the mapped exit code."""

    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except click.exceptions.Exit:
            raise
        except click.ClickException:
            raise
        except Exception as e:
            ErrorHandler.handle_error(ErrorHandler.classify_error(e), str(e))
            click.echo(ErrorHandler.format_error_for_display(e), err=True)
            click.get_current_context().exit(ErrorHandler.exit_code(e))

    return wrapper


def lattice_options(func: Callable) -> Callable:
    func = click.option("--M", "M", type=int, required=True, help="Vertical extent")(func)
    func = click.option("--N", "N", type=int, required=True, help="Horizontal extent (even)")(func)
    return func


@click.group()
@click.version_option(TOOL_VERSION, prog_name=TOOL_NAME)
@click.option("--log-level", default=None, help="DEBUG, INFO, WARNING or ERROR (env DIMER_EFP_LOG_LEVEL)")
@click.option("--threads", type=int, default=None, help="Worker budget (env DIMER_EFP_THREADS, default CPU count)")
@click.option("--max-states", type=int, default=None, help="Cap on transfer-matrix row states")
@click.option("--max-configs", type=int, default=None, help="Cap on enumerated configurations")
@click.option("--max-dim", type=int, default=None, help="Cap on the dense Kasteleyn matrix dimension")
@click.option("--output", type=click.Path(dir_okay=False, path_type=Path), default=None, help="CSV file (default stdout)")
@click.option("--manifest", type=click.Path(dir_okay=False, path_type=Path), default=None, help="Run manifest path")
@click.option("--json", "with_json", is_flag=True, help="Also write a JSON mirror next to --output")
@click.pass_context
def cli(ctx, log_level, threads, max_states, max_configs, max_dim, output, manifest, with_json):
    """Dimer model EFP toolkit: exact, Kasteleyn, Monte Carlo and spin-chain checks."""
    configure_logging(log_level or get_setting("log_level"))
    ConfigManager.apply_overrides({
        "threads": threads,
        "max_states": max_states,
        "max_configs": max_configs,
        "max_dim": max_dim,
    })
    issues = ConfigManager.validate_config()
    for issue in issues:
        logger.warning(f"config: {issue}")
    ctx.obj = RunContext(output, manifest, with_json, threads or 0)


@cli.command(help="Partition functions by enumeration, transfer matrix and Kasteleyn. " + _columns("zfn"))
@lattice_options
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--method", type=click.Choice(["enumerate", "transfer", "kasteleyn", "all"]), default="all", show_default=True)
@click.pass_obj
@reports_errors
def zfn(run: RunContext, N, M, z, method):
    rows = run.runner.partition_functions(N, M, z, method)
    run.emit("zfn", rows, {"N": N, "M": M, "z": z, "method": method})


@cli.command(help="Exact EFP table over n. " + _columns("efp"))
@lattice_options
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--n-min", type=int, default=1, show_default=True)
@click.option("--n-max", type=int, required=True)
@click.pass_obj
@reports_errors
def efp(run: RunContext, N, M, z, n_min, n_max):
    rows = run.runner.efp(N, M, z, n_min, n_max)
    run.emit("efp", rows, {"N": N, "M": M, "z": z, "n_min": n_min, "n_max": n_max})


@cli.command("fit-decay", help="Normalized decay exponents and their spread. " + _columns("fit-decay"))
@lattice_options
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--n-min", type=int, default=1, show_default=True)
@click.option("--n-max", type=int, required=True)
@click.option("--normalization", type=click.Choice(["n_min", "nM", "n2"]), default="n_min", show_default=True)
@click.pass_obj
@reports_errors
def fit_decay(run: RunContext, N, M, z, n_min, n_max, normalization):
    rows = run.runner.fit_decay(N, M, z, n_min, n_max, normalization)
    run.emit("fit-decay", rows, {"N": N, "M": M, "z": z, "n_min": n_min, "n_max": n_max, "normalization": normalization})


@cli.command("enumerate", help="Dump every configuration, one U/D/L/R block per configuration.")
@lattice_options
@click.pass_obj
@reports_errors
def enumerate_command(run: RunContext, N, M):
    blocks = list(run.runner.enumerate(N, M))
    text = "\n\n".join(blocks) + "\n"
    if run.output is None:
        click.echo(text, nl=False)
    else:
        run.output.write_text(text, encoding="utf-8")
        logger.info(f"Wrote {len(blocks)} configurations to {run.output}")


@cli.command("lemma-check", help="Exhaustive frozen-diamond check. " + _columns("lemma-check"))
@lattice_options
@click.option("--n", "n", type=int, required=True)
@click.option("--boundary/--no-boundary", default=True, show_default=True, help="Include the label(2n-1,0) != U literal")
@click.pass_obj
@reports_errors
def lemma_check(run: RunContext, N, M, n, boundary):
    rows = run.runner.lemma_check(N, M, n, boundary)
    run.emit("lemma-check", rows, {"N": N, "M": M, "n": n, "include_boundary": boundary})
    row = rows[0]
    status = "OK" if row["holds"] else "FAILED"
    click.echo(f"{status}, {row['counterexamples']} counterexamples", err=True)


@cli.command("chessboard-check", help="Chessboard estimate after k horizontal reflections. " + _columns("chessboard-check"))
@lattice_options
@click.option("--n", "n", type=int, required=True)
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--k", type=int, default=1, show_default=True)
@click.pass_obj
@reports_errors
def chessboard_check(run: RunContext, N, M, n, z, k):
    rows = run.runner.chessboard(N, M, n, z, k)
    run.emit("chessboard-check", rows, {"N": N, "M": M, "n": n, "z": z, "k": k})


@cli.command("bowtie-check", help="Vertical reflection of the k-fold tile event. " + _columns("bowtie-check"))
@lattice_options
@click.option("--n", "n", type=int, required=True)
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--k", type=int, default=0, show_default=True)
@click.option("--m", "m", type=int, default=None, help="Row boundary of the cut (default M/2)")
@click.pass_obj
@reports_errors
def bowtie_check(run: RunContext, N, M, n, z, k, m):
    rows = run.runner.bowtie(N, M, n, z, k, m)
    run.emit("bowtie-check", rows, {"N": N, "M": M, "n": n, "z": z, "k": k, "m": m})


@cli.command(help="Reference-state count and entropy density. " + _columns("refstate"))
@lattice_options
@click.option("--ell", type=int, required=True, help="Block length (even)")
@click.option("--seed", type=int, default=MCMC_CONSTANTS["DEFAULT_SEED"], show_default=True)
@click.pass_obj
@reports_errors
def refstate(run: RunContext, N, M, ell, seed):
    rows = run.runner.refstate(N, M, ell, seed)
    run.emit("refstate", rows, {"N": N, "M": M, "ell": ell, "seed": seed}, seeds=[seed])


@cli.command(help="Plaquette-flip Metropolis estimates. " + _columns("mcmc"))
@lattice_options
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--sweeps", type=int, default=lambda: get_setting("sweeps"), show_default="10000")
@click.option("--burn-in", type=int, default=lambda: get_setting("burn_in"), show_default="1000")
@click.option("--seed", type=int, default=MCMC_CONSTANTS["DEFAULT_SEED"], show_default=True)
@click.option("--chains", type=int, default=1, show_default=True, help="Chains per start configuration")
@click.option("--observable", type=click.Choice(["v_density", "site_u", "row_pattern"]), default="v_density", show_default=True)
@click.option("--n", "n", type=int, default=1, show_default=True, help="Pattern width for row_pattern")
@click.option("--sector/--no-sector", default=False, help="Also compute the exact flip-sector mean by enumeration")
@click.pass_obj
@reports_errors
def mcmc(run: RunContext, N, M, z, sweeps, burn_in, seed, chains, observable, n, sector):
    rows = run.runner.mcmc(N, M, z, sweeps, burn_in, seed, chains, observable, n, sector)
    run.emit(
        "mcmc",
        rows,
        {"N": N, "M": M, "z": z, "sweeps": sweeps, "burn_in": burn_in, "chains": chains,
         "observable": observable, "n": n, "sector": sector},
        seeds=[seed],
    )


@cli.command(help="Staggered projector profile of the chain ground space. " + _columns("suzuki"))
@click.option("--N", "N", type=int, required=True, help="Chain length (even, >= 4)")
@click.option("--z", type=float, default=1.0, show_default=True)
@click.option("--n-max", type=int, required=True)
@click.option("--phase", type=click.Choice(["0", "1"]), default="0", show_default=True, help="Sublattice phase")
@click.option("--compare-M", "compare_M", type=int, default=None,
              help="Instead report both phases, and the chain value on 2n sites, next to the dimer EFP on N x M. "
              + _columns("suzuki-compare"))
@click.pass_obj
@reports_errors
def suzuki(run: RunContext, N, z, n_max, phase, compare_M):
    if compare_M is not None:
        rows = run.runner.suzuki_compare(N, z, n_max, compare_M)
        run.emit(
            "suzuki-compare",
            rows,
            {"N": N, "z": z, "n_max": n_max, "M": compare_M,
             "degeneracy_tolerance_relative": TOLERANCES["DEGENERACY_RELATIVE"]},
        )
        return
    rows = run.runner.suzuki(N, z, n_max, int(phase))
    run.emit(
        "suzuki",
        rows,
        {"N": N, "z": z, "n_max": n_max, "phase": int(phase),
         "degeneracy_tolerance_relative": TOLERANCES["DEGENERACY_RELATIVE"]},
    )


@cli.command(help="Check an ASCII configuration file and report V.")
@click.option("--input", "input_path", type=click.Path(exists=True, dir_okay=False, path_type=Path), required=True)
@click.pass_obj
@reports_errors
def validate(run: RunContext, input_path):
    result = run.runner.validate_text(input_path.read_text(encoding="utf-8"))
    if result["valid"]:
        click.echo(f"valid {result['N']}x{result['M']} configuration, V={result['vertical_count']}")
    else:
        click.echo(f"invalid {result['N']}x{result['M']} configuration")
        click.get_current_context().exit(2)


def main():
    cli(obj=None)


if __name__ == "__main__":
    main()
