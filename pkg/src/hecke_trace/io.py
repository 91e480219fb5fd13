from __future__ import annotations
import io as _io
import logging
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np
import pandas as pd

from .config import settings
from .errors import SliceFormatError

log = logging.getLogger(__name__)

_OUTPUT_WRITERS: dict[str, Callable[..., None]] = {
    "csv":  lambda df, p, **kwargs: df.to_csv(p, index=False, **kwargs),
    "json": lambda df, p, **kwargs: df.to_json(p, orient="records", indent=2, **kwargs),
}


def _get_fmt(path: Path) -> str:
    suffixes = path.suffixes
    if not suffixes:
        return ""
    return suffixes[-1].lstrip(".").lower()


def split_complex(df: pd.DataFrame) -> pd.DataFrame:
    """Replace every complex column ``c`` by the pair ``c_re``, ``c_im``."""
    out = {}
    for col in df.columns:
        values = df[col]
        if np.iscomplexobj(values.to_numpy()) or values.map(lambda v: isinstance(v, complex)).any():
            arr = values.to_numpy(dtype=complex)
            out[f"{col}_re"] = arr.real
            out[f"{col}_im"] = arr.imag
        else:
            out[col] = values
    return pd.DataFrame(out)


def format_table(df: pd.DataFrame, fmt: Optional[str] = None) -> str:
    """Render *df* as CSV or JSON text.

    Floats are printed with ``settings.output.digits`` significant digits so
    that golden comparisons are byte-stable.
    """
    fmt = (fmt or settings.output.format).lower()
    if fmt not in _OUTPUT_WRITERS:
        raise ValueError(
            f"Unsupported output format '{fmt}'."
            f" Supported formats are: {list(_OUTPUT_WRITERS.keys())}."
        )
    digits = settings.output.digits
    flat = split_complex(df)
    if fmt == "csv":
        return flat.to_csv(index=False, float_format=f"%.{digits}g", lineterminator="\n")
    rounded = flat.apply(
        lambda col: col.map(lambda v: float(f"{v:.{digits}g}")) if col.dtype.kind == "f" else col
    )
    return rounded.to_json(orient="records", indent=2, double_precision=15) + "\n"


def write_table(path: Union[str, Path], df: pd.DataFrame, mdir: bool = True, **kwargs) -> None:
    """Write *df* to *path* in the format named by its suffix.

    Parameters
    ----------
    path : str | Path
        Destination file; ``.csv`` or ``.json``.
    df : pandas.DataFrame
        Table to write. Complex columns are split into real and imaginary parts.
    mdir : bool, optional
        Create parent directories when ``True`` (default).
    """

    path = Path(path)
    log.info("Writing table to %s", path)
    if not isinstance(df, pd.DataFrame):
        raise TypeError(
            f"Expected a pandas DataFrame to write, got {type(df)}."
        )
    parent = path.parent
    if mdir:
        parent.mkdir(parents=True, exist_ok=True)
    else:
        if not parent.exists():
            raise FileNotFoundError(f"Directory '{parent}' does not exist.")
        if not parent.is_dir():
            raise ValueError(f"Parent path '{parent}' is not a directory.")
    fmt = _get_fmt(path)
    if not fmt:
        raise ValueError(
            f"No file extension found for '{path}'."
            f" Choose one of {list(_OUTPUT_WRITERS.keys())}."
        )
    if fmt not in _OUTPUT_WRITERS:
        raise ValueError(
            f"Unsupported output format '{fmt}'."
            f" Supported formats are: {list(_OUTPUT_WRITERS.keys())}."
        )
    try:
        _OUTPUT_WRITERS[fmt](split_complex(df), path, **kwargs)
    except Exception as e:
        raise IOError(
            f"Failed to write DataFrame to '{path}' as {fmt}: {e}"
        ) from e


def read_spectral_csv(source: Union[str, Path, _io.StringIO]) -> pd.DataFrame:
    """Read ``lambda,omega_re,omega_im`` rows into a frame with a complex ``omega`` column."""
    df = pd.read_csv(source, comment="#", skipinitialspace=True)
    df.columns = [c.strip() for c in df.columns]
    missing = {"lambda", "omega_re", "omega_im"} - set(df.columns)
    if missing:
        raise SliceFormatError(f"spectral data missing columns {sorted(missing)}")
    return pd.DataFrame({
        "lambda": df["lambda"].astype(float),
        "omega": df["omega_re"].astype(float) + 1j * df["omega_im"].astype(float),
    })
