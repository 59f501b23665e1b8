import typer
from rich.table import Table

from guidenet.commands.options import console, exits_on_error
from guidenet.core.errors import GradCheckFailure
from guidenet.core.gradcheck import GradCheckReport
from guidenet.services.grad_suite import run_grad_suite


def report_table(report: GradCheckReport) -> Table:
    table = Table("Block", "Checked", "Max rel. error", "Status", title=f"Gradient check (tolerance {report.tolerance:g})")
    for block in report.blocks:
        status = "[green]ok[/green]" if block.passed else "[red]FAIL[/red]"
        table.add_row(block.name, str(block.checked), f"{block.relative_error:.3e}", status)
    return table


@exits_on_error
def command(
    tolerance: float = typer.Option(1e-4, help="Largest accepted relative error."),
    fraction: float = typer.Option(0.05, help="Fraction of each model parameter block to check."),
    max_per_block: int = typer.Option(20, help="Cap on checked elements per model block."),
    seed: int = typer.Option(0, help="Seed for inputs and subsampling."),
):
    """Compare analytic gradients with central differences for every op and the desk model."""
    report = run_grad_suite(tolerance=tolerance, fraction=fraction, max_per_block=max_per_block, seed=seed)
    console.print(report_table(report))
    console.print(f"Max relative error: {report.max_relative_error:.3e}")
    if not report.passed:
        raise GradCheckFailure(report.offenders)
