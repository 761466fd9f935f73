from __future__ import annotations

from pathlib import Path
from typing import Annotated, Any, Dict, Optional

import typer
from dotenv import load_dotenv
from rich.markup import escape

# Load environment variables once at application startup
load_dotenv()

from .config import (  # noqa: E402
    console,
    default_scenario_document,
    parse_document,
    read_document,
    set_quiet,
)
from .errors import NUMERICAL_ERRORS, ConfigError  # noqa: E402
from .scenarios import run_scenario  # noqa: E402

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

app = typer.Typer(
    add_completion=False,
    help="Quantum-dot hole-spin initialization: closed-form models, dynamics and synthetic spectroscopy.",
)

ConfigOpt = Annotated[
    Optional[Path],
    typer.Option("--config", help="Scenario config (JSON); the built-in default is used if omitted."),
]
OutDirOpt = Annotated[
    Optional[Path],
    typer.Option("--out-dir", help="Output directory (overrides the config and QDSPIN_OUTPUT_DIR)."),
]
SeedOpt = Annotated[Optional[int], typer.Option("--seed", min=0, help="Random seed for synthetic noise.")]
VerifyOpt = Annotated[
    bool, typer.Option("--verify", help="Re-check closed-form values against the dynamics integrator.")
]
FormatOpt = Annotated[Optional[str], typer.Option("--format", help="Table format: csv or json.")]


@app.callback(invoke_without_command=True)
def main_callback(
    ctx: typer.Context,
    quiet: bool = typer.Option(False, "--quiet", "-q", help="Suppress console output."),
):
    """
    Reproduce the hole-spin initialization experiments from JSON scenarios.
    """
    set_quiet(quiet)
    if ctx.invoked_subcommand is None:
        console.print(ctx.get_help())


def _document(scenario: Optional[str], config: Optional[Path]) -> tuple[Dict[str, Any], Path]:
    if config is not None:
        doc = read_document(config)
        if scenario is not None and doc.get("scenario") != scenario:
            raise ConfigError(
                f"config is for scenario {doc.get('scenario')!r}, not {scenario!r}", "/scenario"
            )
        return doc, config.expanduser().resolve().parent
    return default_scenario_document(scenario), Path.cwd()


def _apply_overrides(
    doc: Dict[str, Any], seed: Optional[int], verify: bool, fmt: Optional[str]
) -> Dict[str, Any]:
    doc = dict(doc)
    if seed is not None:
        doc["noise"] = {**doc.get("noise", {}), "seed": seed}
    if verify:
        doc["verify"] = True
    if fmt is not None:
        doc["output"] = {**doc.get("output", {}), "format": fmt}
    return doc


def _execute(
    scenario: Optional[str],
    config: Optional[Path],
    out_dir: Optional[Path],
    seed: Optional[int],
    verify: bool,
    fmt: Optional[str],
    edit=None,
) -> None:
    """Load, override, run; map failures onto exit codes."""
    try:
        doc, base_dir = _document(scenario, config)
        doc = _apply_overrides(doc, seed, verify, fmt)
        if edit is not None:
            doc = edit(doc)
        cfg = parse_document(doc, base_dir=base_dir)
        if out_dir is not None:
            cfg.output_dir = out_dir.expanduser().resolve()
        run_scenario(cfg)
    except ConfigError as e:
        console.print(f"[red]Config error:[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_CONFIG)
    except NUMERICAL_ERRORS as e:
        console.print(f"[red]Numerical error ({type(e).__name__}):[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_NUMERICAL)
    except OSError as e:
        console.print(f"[red]I/O error:[/red] {escape(str(e))}")
        raise typer.Exit(code=EXIT_IO)


@app.command()
def run(
    config: Annotated[Path, typer.Argument(help="Scenario config (JSON).")],
    out_dir: OutDirOpt = None,
    seed: SeedOpt = None,
    verify: VerifyOpt = False,
    fmt: FormatOpt = None,
):
    """Run whichever scenario a config file names."""
    _execute(None, config, out_dir, seed, verify, fmt)


@app.command()
def fig3(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
         verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Fidelity vs fine-structure splitting."""
    _execute("fig3", config, out_dir, seed, verify, fmt)


@app.command()
def fig4(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
         verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Fidelity, initialization time and hole lifetime vs DC field."""
    _execute("fig4", config, out_dir, seed, verify, fmt)


@app.command()
def fig5b(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
          verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Fine-structure splitting vs CW intensity for H and V drives."""
    _execute("fig5b", config, out_dir, seed, verify, fmt)


@app.command()
def fig5c(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
          verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Fidelity vs CW intensity, with synthetic measured points."""
    _execute("fig5c", config, out_dir, seed, verify, fmt)


@app.command()
def beats(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
          verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Exciton spin beats and their damped-sine fit."""
    _execute("beats", config, out_dir, seed, verify, fmt)


@app.command()
def spectrum(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
             verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Two-color co/cross spectra and the fidelity read back from them."""
    _execute("spectrum", config, out_dir, seed, verify, fmt)


@app.command()
def cwscan(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
           verify: VerifyOpt = False, fmt: FormatOpt = None):
    """CW line scans vs half-wave plate angle; FSS from the sin² fit."""
    _execute("cwscan", config, out_dir, seed, verify, fmt)


@app.command()
def chie(config: ConfigOpt = None, out_dir: OutDirOpt = None, seed: SeedOpt = None,
         verify: VerifyOpt = False, fmt: FormatOpt = None):
    """Linear FSS tuning with DC field and its fitted slope."""
    _execute("chie", config, out_dir, seed, verify, fmt)


@app.command("fit")
def fit_cmd(
    data: Annotated[Optional[Path], typer.Argument(help="CSV with x, y[, sigma] columns.")] = None,
    model: Annotated[Optional[str], typer.Option("--model", help="damped_sine, lorentzian, gaussian, sin2 or linear.")] = None,
    config: ConfigOpt = None,
    out_dir: OutDirOpt = None,
    seed: SeedOpt = None,
    verify: VerifyOpt = False,
    fmt: FormatOpt = None,
):
    """Fit a named model to an external CSV."""

    def edit(doc: Dict[str, Any]) -> Dict[str, Any]:
        block = dict(doc.get("fit", {}))
        if data is not None:
            block["data"] = str(data.expanduser().resolve())
        if model is not None:
            block["model"] = model
        return {**doc, "fit": block}

    _execute("fit", config, out_dir, seed, verify, fmt, edit=edit)


def main():
    app()


if __name__ == "__main__":
    main()
