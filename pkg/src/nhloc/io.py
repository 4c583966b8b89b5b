"""Run configuration (TOML), sparse triplet export and CSV writers."""

from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.sparse as sp

try:
    import tomllib
except ModuleNotFoundError:  # python < 3.11
    import tomli as tomllib

from .errors import ConfigError
from .model import HeterostructureSpec, RegionParams
from .signature import Method

OUTPUT_ENV = "NHLOC_OUTPUT_DIR"


@dataclass(frozen=True)
class ChainSpec:
    n_cells: int = 40
    intra: complex = 0.4 + 0.3j
    inter: complex = 1.0 - 0.2j
    disorder_amplitude: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.n_cells < 2:
            raise ConfigError("n_cells must be at least 2")


@dataclass(frozen=True)
class Grid:
    x_min: float = -12.0
    x_max: float = 12.0
    y_min: float = -12.0
    y_max: float = 12.0
    nx: int = 41
    ny: int = 41

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ConfigError("grid needs nx, ny >= 1")
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ConfigError("grid bounds must be ordered")

    def axes(self):
        return np.linspace(self.x_min, self.x_max, self.nx), np.linspace(self.y_min, self.y_max, self.ny)


@dataclass(frozen=True)
class LdosSettings:
    energy: float = 0.0
    eta: float | None = None


@dataclass(frozen=True)
class FlowPath:
    x_start: float = 0.0
    x_end: float = 14.0
    y: float = 0.0
    steps: int = 57


@dataclass(frozen=True)
class RunConfig:
    model: HeterostructureSpec | ChainSpec
    kappa: float = 0.1
    rho: float | None = None
    grid: Grid = field(default_factory=Grid)
    method: Method = Method.EIGENCOUNT
    ldos: LdosSettings | None = None
    flow: FlowPath = field(default_factory=FlowPath)
    output_dir: Path = Path("output")
    emit_plots: bool = False

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")
        if self.rho is not None and not self.rho > 0:
            raise ConfigError("rho must be positive or 'full'")

    def echo(self) -> dict:
        """JSON-friendly copy of every parameter."""

        def plain(v):
            if dataclasses.is_dataclass(v):
                return {f.name: plain(getattr(v, f.name)) for f in dataclasses.fields(v)}
            if isinstance(v, complex):
                return [v.real, v.imag]
            if isinstance(v, (Path, Method)):
                return str(v.value if isinstance(v, Method) else v)
            return v

        out = plain(self)
        out["rho"] = "full" if self.rho is None else self.rho
        return out


_REGION_KEYS = {"M", "t", "t_c", "phi", "mu"}
_SECTIONS = {"model", "localizer", "grid", "ldos", "flow", "output"}


def _check_keys(table: dict, allowed: set, where: str):
    unknown = set(table) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{where}]: {', '.join(sorted(unknown))}")


def _complex(value, where):
    if isinstance(value, (int, float)):
        return complex(value)
    if isinstance(value, list) and len(value) == 2:
        return complex(float(value[0]), float(value[1]))
    raise ConfigError(f"{where} must be a number or a [re, im] pair")


def _build(cls, table: dict, where: str, **conv):
    names = {f.name for f in dataclasses.fields(cls)}
    _check_keys(table, names, where)
    kwargs = {k: conv[k](v) if k in conv else v for k, v in table.items()}
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def _region(table: dict, where: str) -> RegionParams:
    _check_keys(table, _REGION_KEYS, where)
    try:
        return RegionParams(**{k: float(v) for k, v in table.items()})
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{where}]: {exc}") from exc


def parse_config(doc: dict) -> RunConfig:
    """Build a RunConfig from a parsed TOML document; unknown keys are errors."""
    _check_keys(doc, _SECTIONS, "top level")
    if "model" not in doc:
        raise ConfigError("missing [model] section")
    m = dict(doc["model"])
    kind = m.pop("kind", "heterostructure")
    if kind == "heterostructure":
        _check_keys(m, {"core_radius", "shell_radius", "outer_radius", "core", "shell", "lossy_shell"}, "model")
        try:
            model = HeterostructureSpec(
                float(m["core_radius"]),
                float(m["shell_radius"]),
                float(m["outer_radius"]),
                *(_region(m[r], f"model.{r}") for r in ("core", "shell", "lossy_shell")),
            )
        except KeyError as exc:
            raise ConfigError(f"[model] is missing {exc}") from exc
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
    elif kind == "chain":
        model = _build(ChainSpec, m, "model", intra=lambda v: _complex(v, "intra"), inter=lambda v: _complex(v, "inter"))
    else:
        raise ConfigError(f"unknown model kind {kind!r}")

    loc = dict(doc.get("localizer", {}))
    _check_keys(loc, {"kappa", "rho", "method"}, "localizer")
    rho = loc.get("rho", "full")
    if rho == "full":
        rho = None
    elif not isinstance(rho, (int, float)):
        raise ConfigError("rho must be a number or 'full'")
    try:
        method = Method(loc.get("method", "eig"))
    except ValueError as exc:
        raise ConfigError(f"unknown method {loc.get('method')!r}") from exc

    out = dict(doc.get("output", {}))
    _check_keys(out, {"dir", "plots"}, "output")
    ldos = _build(LdosSettings, doc["ldos"], "ldos") if "ldos" in doc else None
    return RunConfig(
        model=model,
        kappa=float(loc.get("kappa", 0.1)),
        rho=None if rho is None else float(rho),
        grid=_build(Grid, doc.get("grid", {}), "grid"),
        method=method,
        ldos=ldos,
        flow=_build(FlowPath, doc.get("flow", {}), "flow"),
        output_dir=Path(out.get("dir", "output")),
        emit_plots=bool(out.get("plots", False)),
    )


def load_config(path) -> RunConfig:
    try:
        with open(path, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return parse_config(doc)


def resolve_output_dir(config: RunConfig, override=None) -> Path:
    """Precedence: explicit override, then $NHLOC_OUTPUT_DIR, then the config."""
    chosen = override or os.environ.get(OUTPUT_ENV) or config.output_dir
    path = Path(chosen)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _g17(v: float) -> str:
    return format(float(v), ".17g")


def write_triplets(M, path) -> Path:
    """Sparse matrix as 'row col re im' lines under an 'n nnz' header."""
    C = sp.coo_matrix(M)
    C.sum_duplicates()
    order = np.lexsort((C.col, C.row))
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{C.shape[0]} {C.nnz}\n")
        for k in order:
            z = complex(C.data[k])
            fh.write(f"{C.row[k]} {C.col[k]} {_g17(z.real)} {_g17(z.imag)}\n")
    return path


def read_triplets(path) -> sp.csr_matrix:
    with open(path) as fh:
        n, nnz = map(int, fh.readline().split())
        data = np.loadtxt(fh, ndmin=2) if nnz else np.zeros((0, 4))
    if len(data) != nnz:
        raise ValueError(f"header announces {nnz} entries, found {len(data)}")
    rows, cols = data[:, 0].astype(int), data[:, 1].astype(int)
    return sp.csr_matrix((data[:, 2] + 1j * data[:, 3], (rows, cols)), shape=(n, n))


def write_csv(path, header, rows) -> Path:
    """CSV with floats in repr form, so output is byte-stable."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_json(path, payload) -> Path:
    path = Path(path)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
    return path
