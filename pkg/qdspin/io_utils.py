from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import numpy as np
import pandas as pd
from rich import box
from rich.markup import escape
from rich.table import Table

from .config import console
from .constants import SPECTRUM_COLUMNS
from .errors import FitError
from .fitting import FitResult
from .models import Spectrum

FLOAT_FORMAT = "%.10g"


def write_frame(frame: pd.DataFrame, path: Path, fmt: str = "csv") -> Path:
    """Write a result table as CSV (unit-annotated headers) or JSON records."""
    if fmt == "json":
        path = path.with_suffix(".json")
        records = json.loads(frame.to_json(orient="records", double_precision=10))
        path.write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")
    else:
        path = path.with_suffix(".csv")
        frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    return path


def write_json(path: Path, payload: Mapping[str, Any]) -> Path:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(_jsonable(payload), f, indent=2)
        f.write("\n")
    return path


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if np.isfinite(v) else None
    if isinstance(obj, Path):
        return str(obj)
    return obj


def spectrum_frame(spectrum: Spectrum) -> pd.DataFrame:
    xu = spectrum.meta.get("x_unit", "1")
    yu = spectrum.meta.get("y_unit", "1")
    sigma = spectrum.sigma if spectrum.sigma is not None else np.full(len(spectrum), np.nan)
    units = (xu, yu, yu)
    return pd.DataFrame(
        {f"{c} [{u}]": v for c, u, v in zip(SPECTRUM_COLUMNS, units, (spectrum.x, spectrum.y, sigma))}
    )


def write_spectrum(
    spectrum: Spectrum,
    path: Path,
    config_hash: Optional[str] = None,
    seed: Optional[int] = None,
) -> List[Path]:
    """Spectrum CSV (x, y, sigma) at ``path`` plus a ``.meta.json`` sidecar with
    axis units and provenance."""
    csv_path = write_frame(spectrum_frame(spectrum), path)
    sidecar = {
        "x": {"label": spectrum.meta.get("x_label"), "unit": spectrum.meta.get("x_unit")},
        "y": {"label": spectrum.meta.get("y_label"), "unit": spectrum.meta.get("y_unit")},
        "seed": seed if seed is not None else spectrum.meta.get("seed"),
        "config_sha256": config_hash,
        "meta": {k: v for k, v in spectrum.meta.items() if not k.startswith(("x_", "y_"))},
    }
    meta_path = write_json(csv_path.with_name(csv_path.stem + ".meta.json"), sidecar)
    return [csv_path, meta_path]


def read_xy_csv(
    path: Path,
    x_column: Optional[str] = None,
    y_column: Optional[str] = None,
    sigma_column: Optional[str] = None,
) -> Spectrum:
    """Load x, y[, sigma] columns from a CSV; by default the first two or three columns.

    Raises:
        OSError: If the file is missing or not parseable as CSV
        FitError: If the requested columns are absent
    """
    try:
        frame = pd.read_csv(path)
    except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise OSError(f"{path}: unreadable CSV ({e})") from e
    cols = list(frame.columns)
    if len(cols) < 2:
        raise FitError(f"{path}: need at least two columns")
    xc = x_column or cols[0]
    yc = y_column or cols[1]
    sc = sigma_column or (cols[2] if len(cols) > 2 and x_column is None and y_column is None else None)
    for c in (xc, yc, sc):
        if c is not None and c not in frame.columns:
            raise FitError(f"{path}: no column {c!r}")
    sigma = None
    if sc is not None and frame[sc].notna().all():
        sigma = frame[sc].to_numpy(dtype=float)
    return Spectrum(
        frame[xc].to_numpy(dtype=float),
        frame[yc].to_numpy(dtype=float),
        sigma,
        meta={"x_label": xc, "y_label": yc, "source": str(path)},
    )


def summary_table(title: str, rows: Mapping[str, Any]) -> None:
    table = Table(title=title, box=box.SIMPLE, show_header=True, header_style="bold magenta")
    table.add_column("Quantity")
    table.add_column("Value")
    for key, value in rows.items():
        if isinstance(value, bool):
            shown = "[green]yes[/green]" if value else "[red]no[/red]"
        elif isinstance(value, float):
            shown = f"{value:.6g}"
        else:
            shown = escape(str(value))
        table.add_row(escape(key), shown)
    console.print(table)


def verification_table(rows: List[Dict[str, float]], tolerance: float) -> None:
    table = Table(
        title="Dynamics cross-check",
        box=box.SIMPLE,
        show_header=True,
        header_style="bold magenta",
    )
    table.add_column("FSS (ueV)")
    table.add_column("closed form")
    table.add_column("dynamics")
    table.add_column("rel. residual")
    for row in rows:
        ok = row["rel_residual"] <= tolerance
        status = "[green]OK[/green]" if ok else "[red]FAIL[/red]"
        table.add_row(
            f"{row['fss_ueV']:.4g}",
            f"{row['closed_form']:.8f}",
            f"{row['dynamics']:.8f}",
            f"{row['rel_residual']:.2e} {status}",
        )
    console.print(table)


def fit_table(result: FitResult, title: Optional[str] = None) -> None:
    table = Table(title=title or f"Fit: {result.model}", box=box.SIMPLE, header_style="bold magenta")
    table.add_column("Parameter")
    table.add_column("Value")
    table.add_column("1σ")
    table.add_column("Unit")
    for n, v, s, u in zip(result.names, result.values, result.uncertainties, result.units):
        table.add_row(escape(n), f"{v:.6g}", f"{s:.2g}", escape(u))
    console.print(table)
    status = "[green]✓ converged[/green]" if result.converged else "[yellow]Warning:[/yellow] not converged"
    console.print(f"{status}  χ²_red = {result.chi2_reduced:.4g}, iterations = {result.n_iter}")
