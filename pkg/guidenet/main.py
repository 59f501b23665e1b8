import typer

from guidenet.commands import compare, evaluate, gen_data, grad_check, train

app = typer.Typer(
    name="guidenet",
    help="Image classifiers guided by captions during training, run on images alone at inference.",
    no_args_is_help=True,
    add_completion=False,
)

# --- Register Commands ---
app.command("gen-data", help="Generate the synthetic image-caption dataset.")(gen_data.command)
app.command("train", help="Train one regime and save its checkpoint.")(train.command)
app.command("eval", help="Score a checkpoint (metrics, optional latency).")(evaluate.command)
app.command("compare", help="Baseline vs. guided comparison across seeds.")(compare.command)
app.command("grad-check", help="Analytic vs. numeric gradient suite.")(grad_check.command)


def main() -> None:
    app()


if __name__ == "__main__":
    main()
