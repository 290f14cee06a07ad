"""Experiment drivers, configuration files and the command line interface.

Configurations are flat ``key = value`` text files; ``#`` starts a comment.
Every run is deterministic: the same configuration gives bitwise identical
CSV output.
"""

from __future__ import annotations

import argparse
import dataclasses
import math
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Sequence, TextIO

import numpy as np

from . import oracle as _oracle
from .assembly import SingularSystem
from .curvemesh import (
    Curve,
    DegenerateCurve,
    diagnostics,
    discrete_length,
    initial_circle,
    polyline,
    read_polyline,
    regular_polygon,
    segment,
    snapshot_name,
    stadium,
    write_polyline,
)
from .flows import (
    EvolutionFailure,
    PicardDivergence,
    SchemeKind,
    StepParams,
    StepReport,
    initial_field,
    n_steps,
    run_evolution,
)
from .metric import DomainError, Metric, UnsupportedSplit, parse_metric
from .surface import lift_curve, parse_chart, write_polyline3d

__all__ = [
    "ConfigError",
    "RunConfig",
    "parse_config",
    "load_config",
    "initial_curve",
    "time_step",
    "ConvergenceRow",
    "error_against_circle_oracle",
    "CircleErrorTracker",
    "circle_oracle",
    "run_error",
    "convergence_study",
    "eoc",
    "GeodesicResult",
    "run_geodesic",
    "DiagnosticsWriter",
    "evolve",
    "cli_main",
    "EXIT_OK",
    "EXIT_CONFIG",
    "EXIT_NUMERIC",
]

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3

CSV_COLUMNS = ("step", "t", "L", "A", "W", "ratio", "picard_iters")


class ConfigError(ValueError):
    """A configuration value is missing, malformed or out of range."""


def _fmt(v) -> str:
    if v is None:
        return "nan"
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return f"{float(v):.17g}"


def _point(text: str) -> tuple[float, float]:
    parts = [p for p in text.replace(" ", "").split(",") if p]
    if len(parts) != 2:
        raise ConfigError(f"expected a point 'x,y', got {text!r}")
    return float(parts[0]), float(parts[1])


def _points(text: str) -> list[tuple[float, float]]:
    return [_point(p) for p in text.split(";") if p.strip()]


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.replace(" ", "").split(",") if v]


@dataclass
class RunConfig:
    """All inputs of one run.

    ``init`` selects the initial curve: ``circle`` (perturbed circle of
    radius ``r0`` centred at ``a0 e2``), ``polygon`` (uniform circle of
    radius ``radius`` centred at ``(cx, cy)``), ``stadium``, ``segment``
    (open, ``p`` to ``q``), ``points`` (polyline through ``points``) or
    ``file`` (read from ``polyline``).  When ``dt`` is 0 the step is
    ``dt_factor * h^2`` with ``h`` the longest initial edge.
    """

    metric: str = "mu:1"
    scheme: str = "A"
    init: str = "circle"
    a0: float = 2.0
    r0: float = 1.0
    J: int = 64
    radius: float = 1.0
    cx: float = 0.0
    cy: float = 0.0
    width: float = 4.0
    height: float = 1.0
    vertical: bool = False
    p: tuple[float, float] = (-1.0, 1.0)
    q: tuple[float, float] = (1.0, 1.0)
    points: list[tuple[float, float]] = field(default_factory=list)
    closed: bool = False
    polyline: str = ""
    dt: float = 0.0
    dt_factor: float = 0.1
    T: float = 0.1
    cadence: float = 0.0
    out: str = ""
    picard_tol: float = 1e-10
    picard_max: int = 200
    lam: float = 0.0
    oracle: str = ""
    Js: list[int] = field(default_factory=lambda: [32, 64, 128, 256, 512])
    workers: int = 1

    _PARSERS = {
        "a0": float,
        "r0": float,
        "J": int,
        "radius": float,
        "cx": float,
        "cy": float,
        "width": float,
        "height": float,
        "vertical": _bool,
        "p": _point,
        "q": _point,
        "points": _points,
        "closed": _bool,
        "dt": float,
        "dt_factor": float,
        "T": float,
        "cadence": float,
        "picard_tol": float,
        "picard_max": int,
        "lam": float,
        "Js": _int_list,
        "workers": int,
    }

    @classmethod
    def keys(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]

    def updated(self, values: dict[str, str]) -> "RunConfig":
        """Copy with string values parsed and applied, then validated."""
        cfg = dataclasses.replace(self)
        known = set(self.keys())
        for key, raw in values.items():
            if key not in known:
                raise ConfigError(f"unknown config key {key!r}")
            parse = self._PARSERS.get(key, str)
            try:
                setattr(cfg, key, parse(raw.strip()) if isinstance(raw, str) else raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"bad value for {key!r}: {raw!r} ({exc})") from None
        cfg.validate()
        return cfg

    def validate(self) -> None:
        for key in ("a0", "r0", "radius", "cx", "cy", "width", "height", "dt", "dt_factor", "T", "cadence", "picard_tol", "lam"):
            if not math.isfinite(getattr(self, key)):
                raise ConfigError(f"{key} must be finite")
        if self.J < 3:
            raise ConfigError("J must be at least 3")
        if self.dt < 0 or (self.dt == 0 and self.dt_factor <= 0):
            raise ConfigError("dt must be positive")
        if self.T < 0:
            raise ConfigError("T must be nonnegative")
        if self.cadence < 0:
            raise ConfigError("cadence must be nonnegative")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.picard_tol <= 0 or self.picard_max < 1:
            raise ConfigError("picard controls must be positive")
        try:
            SchemeKind.parse(self.scheme)
            parse_metric(self.metric)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    @property
    def kind(self) -> SchemeKind:
        return SchemeKind.parse(self.scheme)

    @property
    def metric_obj(self) -> Metric:
        return parse_metric(self.metric)

    def step_params(self, dt: float) -> StepParams:
        return StepParams(dt, picard_tol=self.picard_tol, picard_max=self.picard_max, lam=self.lam)


def parse_config(text: str) -> dict[str, str]:
    """Parse flat ``key = value`` lines into a dict of raw strings."""
    values: dict[str, str] = {}
    for num, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"line {num}: expected key = value")
        values[key.strip()] = value.strip()
    return values


def load_config(path: str | os.PathLike | None = None, overrides: dict[str, str] | None = None) -> RunConfig:
    values = {}
    if path is not None:
        try:
            values = parse_config(Path(path).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}") from None
    values.update(overrides or {})
    return RunConfig().updated(values)


def initial_curve(cfg: RunConfig, J: int | None = None) -> Curve:
    J = cfg.J if J is None else J
    if cfg.init == "circle":
        c = initial_circle(cfg.a0, cfg.r0, J)
    elif cfg.init == "polygon":
        c = regular_polygon(J, cfg.radius, (cfg.cx, cfg.cy))
    elif cfg.init == "stadium":
        c = stadium(cfg.width, cfg.height, J, (cfg.cx, cfg.cy), cfg.vertical)
    elif cfg.init == "segment":
        c = segment(cfg.p, cfg.q, J)
    elif cfg.init == "points":
        if len(cfg.points) < 2:
            raise ConfigError("init = points needs at least two points")
        c = polyline(cfg.points, J, cfg.closed)
    elif cfg.init == "file":
        try:
            c = read_polyline(cfg.polyline)
        except OSError as exc:
            raise ConfigError(f"cannot read polyline: {exc}") from None
    else:
        raise ConfigError(f"unknown init {cfg.init!r}")
    try:
        c.check(cfg.metric_obj)
    except (DomainError, DegenerateCurve) as exc:
        raise ConfigError(f"initial curve rejected: {exc}") from None
    return c


def time_step(cfg: RunConfig, c: Curve) -> float:
    """``cfg.dt`` if set, else ``dt_factor * h^2`` with ``h`` the longest initial edge."""
    if cfg.dt > 0:
        return cfg.dt
    return cfg.dt_factor * float(c.lengths.max()) ** 2


# errors against exact circles -----------------------------------------------------


def error_against_circle_oracle(trajectory: Iterable[tuple[float, np.ndarray]], oracle: Callable[[float], tuple[float, float]]) -> float:
    """``max_m max_j | |X^m_j - a(t_m) e2| - r(t_m) |`` over the supplied steps.

    ``trajectory`` yields ``(t_m, nodes)`` for ``m >= 1``.
    """
    err = None
    for t, nodes in trajectory:
        a, r = oracle(t)[:2]
        nodes = np.asarray(nodes, dtype=float)
        e = float(np.max(np.abs(np.hypot(nodes[:, 0], nodes[:, 1] - a) - r)))
        err = e if err is None else max(err, e)
    if err is None:
        raise ValueError("empty trajectory")
    return err


class CircleErrorTracker:
    """Step callback accumulating the circle error on the fly."""

    def __init__(self, oracle: Callable[[float], tuple[float, float]]):
        self.oracle = oracle
        self.error = 0.0
        self.worst_t = 0.0

    def __call__(self, k: int, t: float, rep: StepReport) -> None:
        e = error_against_circle_oracle([(t, rep.curve.nodes)], self.oracle)
        if e > self.error:
            self.error, self.worst_t = e, t


def circle_oracle(case: str, a0: float, r0: float, T: float) -> Callable[[float], tuple[float, float]]:
    """Exact ``t -> (a, r)`` for ``hyperbolic_cf`` or ``hyperbolic_elastic``."""
    if case == "hyperbolic_cf":
        return lambda t: _oracle.hyperbolic_cf_circle(a0, r0, t)
    if case == "hyperbolic_elastic":
        sol = _oracle.HyperbolicElasticSolution(a0, r0, T)
        sol(T)  # cross-check against the implicit equation once
        return lambda t: sol(t, check=False)[:2]
    raise ConfigError(f"unknown oracle {case!r}")


@dataclass(frozen=True)
class ConvergenceRow:
    J: int
    h: float
    error: float
    eoc: float | None = None

    def csv(self) -> str:
        return ",".join([str(self.J), _fmt(self.h), _fmt(self.error), "" if self.eoc is None else _fmt(self.eoc)])


def eoc(e_prev: float, e: float, h_prev: float, h: float) -> float:
    """``ln(e_prev / e) / ln(h_prev / h)``; ``nan`` when an error is not positive."""
    if not (e_prev > 0 and e > 0):
        return math.nan
    return math.log(e_prev / e) / math.log(h_prev / h)


def run_error(cfg: RunConfig, J: int) -> tuple[float, float]:
    """Run the circle test at resolution ``J``; returns ``(h, error)``."""
    m = cfg.metric_obj
    c0 = initial_curve(cfg, J)
    h = float(c0.lengths.max())
    dt = time_step(cfg, c0)
    if n_steps(cfg.T, dt) < 1:
        raise ConfigError(f"T={cfg.T} is shorter than one time step ({dt:.3g}) at J={J}")
    tracker = CircleErrorTracker(circle_oracle(cfg.oracle, cfg.a0, cfg.r0, cfg.T))
    run_evolution(cfg.kind, m, c0, cfg.step_params(dt), cfg.T, [tracker], keep_reports=False)
    return h, tracker.error


def convergence_study(base: RunConfig, J_list: Sequence[int] | None = None, workers: int = 1) -> list[ConvergenceRow]:
    """Errors and EOCs for each ``J`` with ``dt = dt_factor * h^2``; rows ordered by ``J``."""
    J_list = list(base.Js if J_list is None else J_list)
    if J_list != sorted(J_list):
        raise ConfigError("J list must be ascending")
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(run_error, [base] * len(J_list), J_list))
    else:
        results = [run_error(base, J) for J in J_list]
    rows: list[ConvergenceRow] = []
    for J, (h, err) in zip(J_list, results):
        rate = eoc(rows[-1].error, err, rows[-1].h, h) if rows else None
        rows.append(ConvergenceRow(J, h, err, rate))
    return rows


# diagnostics output ---------------------------------------------------------------


class DiagnosticsWriter:
    """Step callback writing the CSV diagnostics and snapshots.

    Snapshots are taken at step ``floor(j * cadence / dt)`` for ``j = 0, 1, ...``
    and at the final step.
    """

    def __init__(self, stream: TextIO, out_dir: Path | None, dt: float, cadence: float, last_step: int):
        self.stream = stream
        self.out_dir = out_dir
        self.dt = dt
        self.cadence = cadence
        self.last_step = last_step
        self._j = 0
        stream.write(",".join(CSV_COLUMNS) + "\n")

    def _due(self, k: int) -> bool:
        if self.cadence <= 0:
            return False
        due = False
        while (nxt := int(math.floor(self._j * self.cadence / self.dt + 1e-9))) <= k:
            due = due or nxt == k
            self._j += 1
        return due

    def row(self, k: int, t: float, d, iters: int) -> None:
        self.stream.write(",".join([str(k), _fmt(t), _fmt(d.length), _fmt(d.area), _fmt(d.elastic_energy), _fmt(d.ratio), str(iters)]) + "\n")

    def snapshot(self, k: int, curve: Curve) -> None:
        if self.out_dir is None:
            return
        if self._due(k) or k == self.last_step:
            write_polyline(self.out_dir / snapshot_name(k), curve)

    def __call__(self, k: int, t: float, rep: StepReport) -> None:
        self.row(k, t, rep.after, rep.picard_iterations)
        self.snapshot(k, rep.curve)


def _prepare_out(out: str) -> Path | None:
    if not out:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def evolve(cfg: RunConfig, stream: TextIO | None = None) -> tuple[Curve, int]:
    """Run ``cfg`` writing diagnostics; returns the final curve and step count.

    The CSV goes to ``<out>/diagnostics.csv`` when ``out`` is set, else to
    ``stream``.  On a numerical failure the last accepted curve is written to
    ``<out>/last_valid.txt`` and :class:`EvolutionFailure` is re-raised.
    """
    m = cfg.metric_obj
    kind = cfg.kind
    c0 = initial_curve(cfg)
    if kind.nonlinear:
        try:
            m.split_gradients()
        except UnsupportedSplit as exc:
            raise ConfigError(str(exc)) from None
    dt = time_step(cfg, c0)
    params = cfg.step_params(dt)
    out_dir = _prepare_out(cfg.out)
    M = n_steps(cfg.T, dt)
    fh = open(out_dir / "diagnostics.csv", "w") if out_dir is not None else None
    try:
        sink = fh if fh is not None else (stream or sys.stdout)
        writer = DiagnosticsWriter(sink, out_dir, dt, cfg.cadence, M)
        field0 = initial_field(kind, m, c0)
        d0 = diagnostics(m, c0, **({} if field0 is None else {field0.kind: field0.values}))
        writer.row(0, 0.0, d0, 0)
        writer.snapshot(0, c0)
        try:
            res = run_evolution(kind, m, c0, params, cfg.T, [writer], keep_reports=False, curvature=field0)
        except EvolutionFailure as exc:
            if out_dir is not None:
                write_polyline(out_dir / "last_valid.txt", exc.curve)
            raise
    finally:
        if fh is not None:
            fh.close()
    return res.curve, res.steps


# geodesics ------------------------------------------------------------------------------


@dataclass(frozen=True)
class GeodesicResult:
    curve: Curve
    length: float
    initial_length: float
    steps: int


def run_geodesic(cfg: RunConfig, stream: TextIO | None = None) -> GeodesicResult:
    """Relax an open curve with fixed endpoints by curvature flow."""
    if cfg.init not in ("segment", "points", "file"):
        raise ConfigError("geodesic runs need init = segment, points or file")
    cfg = dataclasses.replace(cfg, scheme="A_open")
    m = cfg.metric_obj
    c0 = initial_curve(cfg)
    if c0.closed:
        raise ConfigError("geodesic runs need an open curve")
    if stream is None and not cfg.out:
        with open(os.devnull, "w") as sink:
            final, steps = evolve(cfg, sink)
    else:
        final, steps = evolve(cfg, stream)
    return GeodesicResult(final, discrete_length(m, final), discrete_length(m, c0), steps)


# command line ------------------------------------------------------------------------------


def _split_overrides(rest: list[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    it = iter(rest)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigError(f"missing value for {tok}") from None
        out[key] = value
    return out


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="confcurves", description="Curve evolution in conformally flat metrics.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("evolve", "run an evolution and write CSV diagnostics"),
        ("converge", "convergence study against an exact circle"),
        ("geodesic", "relax an open curve towards a geodesic"),
    ):
        sp_ = sub.add_parser(name, help=help_, description=help_ + "; any config key may be overridden as --key value")
        sp_.add_argument("--config")
        sp_.add_argument("--out")
        sp_.add_argument("--scheme")
        sp_.add_argument("--metric")
    op = sub.add_parser("oracle", help="tabulate an exact circle solution")
    op.add_argument("--case", required=True, choices=["hyperbolic_cf", "hyperbolic_elastic", "alpha_cf", "alpha_elastic"])
    op.add_argument("--a0", type=float, default=math.nan)
    op.add_argument("--r0", type=float, default=1.0)
    op.add_argument("--alpha", type=float, default=0.0)
    op.add_argument("--T", type=float, default=1.0)
    op.add_argument("--n", type=int, default=10)
    lp = sub.add_parser("lift", help="map a chart polyline onto its surface")
    lp.add_argument("--chart", required=True)
    lp.add_argument("--input", required=True)
    lp.add_argument("--output", required=True)
    return ap


def _config_from_args(args, rest) -> RunConfig:
    overrides = _split_overrides(rest)
    for key in ("out", "scheme", "metric"):
        if getattr(args, key) is not None:
            overrides[key] = getattr(args, key)
    return load_config(args.config, overrides)


def _cmd_oracle(args, stdout: TextIO) -> None:
    times = np.linspace(0.0, args.T, args.n + 1)
    try:
        rows = _oracle.oracle_table(args.case, times, a0=args.a0, r0=args.r0, alpha=args.alpha)
    except (_oracle.BranchError, _oracle.PastExtinction) as exc:
        raise ConfigError(str(exc)) from None
    last = "R" if args.case.startswith("alpha") else "sigma"
    stdout.write(f"t,a,r,{last}\n")
    for s in rows:
        stdout.write(",".join(_fmt(v) for v in (s.t, s.a, s.r, s.R if last == "R" else s.sigma)) + "\n")


def cli_main(argv: Sequence[str] | None = None, stdout: TextIO | None = None, stderr: TextIO | None = None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    ap = _parser()
    try:
        args, rest = ap.parse_known_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        if args.command == "oracle":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}")
            _cmd_oracle(args, stdout)
        elif args.command == "lift":
            if rest:
                raise ConfigError(f"unexpected arguments {rest}")
            chart = parse_chart(args.chart)
            try:
                c = read_polyline(args.input)
            except OSError as exc:
                raise ConfigError(f"cannot read polyline: {exc}") from None
            pts = lift_curve(chart, c)
            if c.closed:
                pts = np.vstack([pts, pts[:1]])
            write_polyline3d(args.output, pts)
        else:
            cfg = _config_from_args(args, rest)
            if args.command == "evolve":
                evolve(cfg, stdout)
            elif args.command == "converge":
                rows = convergence_study(cfg, workers=cfg.workers)
                text = "J,h,error,eoc\n" + "".join(r.csv() + "\n" for r in rows)
                stdout.write(text)
                out_dir = _prepare_out(cfg.out)
                if out_dir is not None:
                    (out_dir / "converge.csv").write_text(text)
            else:
                res = run_geodesic(cfg)
                stdout.write(f"L_initial,L_final,steps\n{_fmt(res.initial_length)},{_fmt(res.length)},{res.steps}\n")
    except (ConfigError, DomainError, UnsupportedSplit, ValueError) as exc:
        stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except (EvolutionFailure, SingularSystem, PicardDivergence, _oracle.OracleMismatch, FloatingPointError) as exc:
        stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERIC
    return EXIT_OK


def main() -> None:
    sys.exit(cli_main())
