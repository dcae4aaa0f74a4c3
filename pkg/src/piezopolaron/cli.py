"""Command-line front end.

Commands
--------
bound     moment bounds ``n = 1 .. n_max`` over an alpha grid, with the
          closed-form reference curves alongside
moments   raw vacuum moments as polynomial coefficients in alpha
mass      effective mass over an alpha grid
validate  run the self-check suite
figures   three reference-curve tables at k0 = 150

Exit status: 0 success, 2 configuration error, 3 regime or convergence
error, 4 combinatorial budget exceeded, 5 validation failure.
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bounds import DEGENERACY_TOL, MONOTONE_SLACK, bound_sequence
from .errors import ConvergenceError, DomainError, RegimeError, ResourceError
from .model import FChoice, ModelParams, build_hamiltonian
from .moving import ETA_TOL, effective_mass
from .reference import closed_forms, lower_bound_large, lower_bound_small
from .validation import format_report, run_checks
from .wick import DEFAULT_BUDGET, Measure, mean_energy, moment_vector

__all__ = ["RunConfig", "parse_grid", "load_config", "run", "main", "COMMANDS"]

COMMANDS = ("bound", "moments", "mass", "validate", "figures")
EXIT_OK, EXIT_CONFIG, EXIT_REGIME, EXIT_RESOURCE, EXIT_VALIDATION = 0, 2, 3, 4, 5
FIGURE_K0 = 150.0
FIGURE_DEFAULTS = {
    "figure1_alpha": "1:100:34",
    "figure2_alpha": "0.01:1:34",
    "figure3_alpha": "1:10:37",
}
FIGURE_SPACING = {"figure1_alpha": "geometric", "figure2_alpha": "geometric", "figure3_alpha": "linear"}


@dataclass(frozen=True)
class RunConfig:
    command: str
    alpha_grid: tuple = (1.0,)
    k0: float = 150.0
    P_magnitude: float = 0.0
    n_max: int = 2
    f_choice: FChoice = FChoice.SIMPLE
    output_path: str | None = None
    workers: int = 1
    spacing: str = "linear"
    budget: int = DEFAULT_BUDGET
    figure_grids: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise DomainError(f"unknown command {self.command!r}; choose from {', '.join(COMMANDS)}")
        if not self.alpha_grid:
            raise DomainError("alpha grid is empty")
        if any(b <= a for a, b in zip(self.alpha_grid, self.alpha_grid[1:])):
            raise DomainError("alpha grid must be strictly ascending")
        if any(not (math.isfinite(a) and a >= 0) for a in self.alpha_grid):
            raise DomainError("alpha values must be finite and >= 0")
        if not (math.isfinite(self.k0) and self.k0 > 0):
            raise DomainError("k0 must be > 0")
        if not (math.isfinite(self.P_magnitude) and self.P_magnitude >= 0):
            raise DomainError("p must be >= 0")
        if self.n_max < 1:
            raise DomainError("n-max must be >= 1")
        if self.workers < 1:
            raise DomainError("workers must be >= 1")

    def manifest(self, **extra) -> str:
        """Reproducibility header (worker count and output path excluded)."""
        items = [
            f"piezopolaron={__version__}",
            f"command={self.command}",
            f"k0={self.k0!r}",
            f"p={self.P_magnitude!r}",
            f"n_max={self.n_max}",
            f"f_choice={self.f_choice.value}",
            f"budget={self.budget}",
            f"degeneracy_tol={DEGENERACY_TOL!r}",
            f"monotone_slack={MONOTONE_SLACK!r}",
            f"eta_tol={ETA_TOL!r}",
        ]
        items += [f"{k}={v}" for k, v in extra.items()]
        return "# " + " ".join(items)


def parse_grid(text: str, spacing: str = "linear") -> tuple:
    """``"1.5"``, ``"0.1,0.5,1"`` or ``"start:stop:count"``."""
    text = str(text).strip()
    try:
        if ":" in text:
            parts = text.split(":")
            if len(parts) != 3:
                raise ValueError
            start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
            if count < 1:
                raise ValueError
            if count == 1:
                return (start,)
            if spacing == "geometric":
                if not (start > 0 and stop > 0):
                    raise DomainError("geometric grids need positive endpoints")
                return tuple(float(x) for x in np.geomspace(start, stop, count))
            if spacing != "linear":
                raise DomainError(f"unknown spacing {spacing!r}")
            return tuple(float(x) for x in np.linspace(start, stop, count))
        return tuple(float(x) for x in text.split(","))
    except ValueError:
        raise DomainError(f"cannot parse grid {text!r}") from None


def load_config(path: str) -> dict:
    """Read ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise DomainError(f"cannot read config file {path!r}: {exc}") from None
    for num, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"{path}:{num}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lstrip("-").replace("-", "_")] = value
    return out


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="piezopolaron", description="Moment-method polaron energy bounds")
    ap.add_argument("command_pos", nargs="?", metavar="command", choices=COMMANDS)
    ap.add_argument("--command", choices=COMMANDS)
    ap.add_argument("--alpha", help="value, comma list, or start:stop:count")
    ap.add_argument("--spacing", choices=("linear", "geometric"), help="grid spacing for start:stop:count")
    ap.add_argument("--k0", type=float)
    ap.add_argument("--p", type=float, help="total momentum magnitude")
    ap.add_argument("--n-max", type=int)
    ap.add_argument("--f-choice")
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int)
    ap.add_argument("--budget", type=int, help="maximum Wick enumeration branches")
    for key in FIGURE_DEFAULTS:
        ap.add_argument("--" + key.replace("_", "-"), dest=key, help="alpha grid of one figure table")
    ap.add_argument("--config", help="key=value file; flags override it")
    return ap


def _build_config(ns: argparse.Namespace) -> RunConfig:
    settings = load_config(ns.config) if ns.config else {}
    for key, value in vars(ns).items():
        if key in ("config", "command_pos") or value is None:
            continue
        settings[key] = value
    command = ns.command_pos or settings.pop("command", None)
    settings.pop("command", None)
    if command is None:
        raise DomainError("no command given")
    known = {"alpha", "spacing", "k0", "p", "n_max", "f_choice", "out", "workers", "budget", *FIGURE_DEFAULTS}
    unknown = set(settings) - known
    if unknown:
        raise DomainError(f"unknown configuration keys: {', '.join(sorted(unknown))}")
    try:
        spacing = str(settings.get("spacing", "linear"))
        return RunConfig(
            command=command,
            alpha_grid=parse_grid(settings.get("alpha", "1"), spacing),
            k0=float(settings.get("k0", 150.0)),
            P_magnitude=float(settings.get("p", 0.0)),
            n_max=int(settings.get("n_max", 2)),
            f_choice=FChoice.parse(settings.get("f_choice", "simple")),
            output_path=settings.get("out"),
            workers=int(settings.get("workers", 1)),
            spacing=spacing,
            budget=int(settings.get("budget", DEFAULT_BUDGET)),
            figure_grids={k: str(settings[k]) for k in FIGURE_DEFAULTS if k in settings},
        )
    except ValueError as exc:
        raise DomainError(str(exc)) from None


# ---------------------------------------------------------------------------
# commands


def _fmt(x) -> str:
    x = float(x)
    if x == 0:
        return "0"
    return repr(x) if math.isfinite(x) else "nan"


def _csv(header: str, columns, rows) -> str:
    lines = [header, ",".join(columns)]
    lines += [",".join(row) for row in rows]
    return "\n".join(lines) + "\n"


def _emit(text: str, path: str | None):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _reference_row(alpha: float, k0: float):
    ref = closed_forms(alpha, k0)
    lbl = lower_bound_large(alpha, k0) if alpha > 0 else math.nan
    return ref, lower_bound_small(alpha, k0), lbl


def _simple_terms(cfg: RunConfig):
    if cfg.f_choice is not FChoice.SIMPLE:
        raise DomainError("continuum Wick moments are available for the simple choice only")
    # moments are built once as polynomials in alpha
    return build_hamiltonian(ModelParams(1.0, cfg.k0, cfg.P_magnitude, FChoice.SIMPLE))


def cmd_bound(cfg: RunConfig) -> int:
    terms = _simple_terms(cfg)
    measure = Measure.continuum(cfg.k0)
    central = moment_vector(terms, measure, cfg.n_max, centered=True, budget=cfg.budget, workers=cfg.workers)
    mean = mean_energy(terms, measure)
    rows = []
    for alpha in cfg.alpha_grid:
        seq = bound_sequence(central.at(alpha), cfg.n_max, mean=mean.evaluate_mp(alpha))
        ref, lbs, lbl = _reference_row(alpha, cfg.k0)
        for n in range(1, cfg.n_max + 1):
            # past Krylov closure the last usable order is already exact
            b = seq[min(n, len(seq)) - 1].bound
            rows.append([_fmt(alpha), str(n), _fmt(b), _fmt(ref.E_W), _fmt(ref.E_var_wick), _fmt(lbs), _fmt(lbl)])
    cols = ["alpha", "n", "bound", "E_W", "E_var_closed", "E_LBS", "E_LBL"]
    _emit(_csv(cfg.manifest(alpha=_grid_text(cfg.alpha_grid)), cols, rows), cfg.output_path)
    return EXIT_OK


def cmd_moments(cfg: RunConfig) -> int:
    terms = _simple_terms(cfg)
    mv = moment_vector(terms, Measure.continuum(cfg.k0), cfg.n_max, budget=cfg.budget, workers=cfg.workers)
    degree = max(max(m.exact, default=0) for m in mv.moments)
    cols = ["m"] + [f"alpha^{p}" for p in range(int(degree) + 1)]
    rows = []
    for m, poly in enumerate(mv.moments):
        coeffs = poly.coefficients
        rows.append([str(m)] + [_fmt(coeffs.get(p, 0.0)) for p in range(int(degree) + 1)])
    _emit(_csv(cfg.manifest(), cols, rows), cfg.output_path)
    return EXIT_OK


def _mass_point(args):
    alpha, k0, choice, order = args
    res = effective_mass(alpha, k0, choice, order=order)
    return res.m_eff, res.fit_residual


def cmd_mass(cfg: RunConfig) -> int:
    order = cfg.n_max if cfg.f_choice is FChoice.SIMPLE else 1
    tasks = [(a, cfg.k0, cfg.f_choice, order) for a in cfg.alpha_grid]
    results = _map(_mass_point, tasks, cfg.workers)
    rows = [[_fmt(a), _fmt(m), _fmt(r)] for a, (m, r) in zip(cfg.alpha_grid, results)]
    text = _csv(cfg.manifest(alpha=_grid_text(cfg.alpha_grid), order=order), ["alpha", "m_eff", "fit_residual"], rows)
    _emit(text, cfg.output_path)
    return EXIT_OK


def cmd_validate(cfg: RunConfig) -> int:
    checks = run_checks(workers=cfg.workers)
    report = format_report(checks)
    _emit(report, cfg.output_path)
    return EXIT_OK if all(c.passed for c in checks if c.gating) else EXIT_VALIDATION


def _figure_point(alpha):
    ref, lbs, lbl = _reference_row(alpha, FIGURE_K0)
    return [_fmt(alpha), _fmt(ref.E_W), _fmt(ref.E_var_wick), _fmt(lbs), _fmt(lbl)]


def cmd_figures(cfg: RunConfig) -> int:
    outdir = cfg.output_path or "figures"
    os.makedirs(outdir, exist_ok=True)
    for idx, key in enumerate(FIGURE_DEFAULTS, 1):
        text = cfg.figure_grids.get(key, FIGURE_DEFAULTS[key])
        grid = parse_grid(text, FIGURE_SPACING[key] if key not in cfg.figure_grids else cfg.spacing)
        if any(not a > 0 for a in grid):
            raise DomainError(f"{key}: figure grids need alpha > 0")
        rows = _map(_figure_point, grid, cfg.workers)
        header = cfg.manifest(figure=idx, alpha=_grid_text(grid)).replace(f"k0={cfg.k0!r}", f"k0={FIGURE_K0!r}")
        text = _csv(header, ["alpha", "E_W", "E_var", "E_LBS", "E_LBL"], rows)
        _emit(text, os.path.join(outdir, f"figure{idx}.csv"))
    return EXIT_OK


def _grid_text(grid) -> str:
    return f"{grid[0]!r}..{grid[-1]!r}/{len(grid)}"


def _map(fn, items, workers):
    items = list(items)
    if workers <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


_DISPATCH = {
    "bound": cmd_bound,
    "moments": cmd_moments,
    "mass": cmd_mass,
    "validate": cmd_validate,
    "figures": cmd_figures,
}


def run(cfg: RunConfig) -> int:
    """Execute one configured command and return its exit status."""
    try:
        return _DISPATCH[cfg.command](cfg)
    except (RegimeError, ConvergenceError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main(argv=None) -> int:
    ns = _parser().parse_args(argv)
    try:
        cfg = _build_config(ns)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
