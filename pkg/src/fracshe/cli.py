"""Command-line front end.

Configuration is a flat text file of ``section.key = value`` lines; ``#``
starts a comment.  Every key has a default, so an empty file is a valid
configuration.  Each subcommand writes CSV files into the output directory
and prints one summary line per file.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Optional, Sequence


from .errors import AccuracyError, DomainError, EstimationError, StabilityError
from .model import GridSpec, ModelParams, ScalarField

log = logging.getLogger("fracshe")

SUBCOMMANDS = ("green", "kernel", "moments", "simulate", "growth", "verify", "all")

EXIT_OK, EXIT_DOMAIN, EXIT_ACCURACY, EXIT_VERIFY = 0, 1, 2, 3

# key -> default; the default's type fixes how the value is parsed
DEFAULTS: dict[str, Any] = {
    "model.a": 2.0,
    "model.delta": 0.0,
    "model.lam": 1.0,
    "model.lip_upper": 1.0,
    "model.vip_upper": 0.0,
    "model.lip_lower": 1.0,
    "model.vip_lower": 0.0,
    "measure.kind": "dirac",
    "measure.x0": 0.0,
    "measure.mass": 1.0,
    "measure.level": 1.0,
    "grid.t_min": 0.1,
    "grid.t_max": 1.0,
    "grid.nt": 10,
    "grid.x_half_width": 4.0,
    "grid.nx": 81,
    "kernel.tol": 1e-8,
    "kernel.method": "auto",
    "moments.p": 2,
    "moments.two_point": (),
    "moments.two_point_variant": "printed",
    "sim.n_paths": 200,
    "sim.seed": 0,
    "sim.rho": "linear",
    "sim.p_values": (2,),
    "sim.batch_size": 500,
    "sim.threads": 1,
    "sim.substeps": 2,
    "sim.refine": 1,
    "growth.p": (2, 4, 6),
    "growth.eta": 3.0,
    "growth.alphas": (),
    "growth.empirical": False,
    "verify.samples": 40,
    "verify.seed": 0,
    "verify.nu": (0.5, 1.0, 1.75, 2.5),
    "verify.eps": 0.1,
    "outputs.out_dir": "out",
    "outputs.precision": 12,
}

MEASURE_KINDS = ("dirac", "lebesgue", "zero")


# ---------------------------------------------------------------------------
# config text


def _parse_value(key: str, text: str) -> Any:
    default = DEFAULTS[key]
    text = text.strip()
    try:
        if isinstance(default, bool):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if isinstance(default, int):
            return int(text)
        if isinstance(default, float):
            return float(text)
        if isinstance(default, tuple):
            items = [s.strip() for s in text.split(",") if s.strip()]
            if key in ("growth.p", "sim.p_values"):
                return tuple(int(s) for s in items)
            return tuple(float(s) for s in items)
    except ValueError:
        raise DomainError(f"config key {key}: cannot parse {text!r}") from None
    return text


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def parse_config(text: str, overrides: Iterable[str] = ()) -> dict[str, Any]:
    """Typed configuration with defaults filled in; overrides are ``key=value`` strings."""
    values = dict(DEFAULTS)
    lines = [(i + 1, ln) for i, ln in enumerate(text.splitlines())]
    lines += [(f"--set {ov}", ov) for ov in overrides]
    for where, line in lines:
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DomainError(f"config line {where}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise DomainError(f"config line {where}: unknown key {key!r}")
        values[key] = _parse_value(key, raw)
    return values


def dump_config(values: dict[str, Any]) -> str:
    """Canonical text: every key, sorted, one per line."""
    return "".join(f"{k} = {_format_value(values[k])}\n" for k in sorted(values))


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Outputs:
    out_dir: Path
    precision: int = 12


@dataclass(frozen=True)
class RunConfig:
    model: ModelParams
    measure: Any
    grid: GridSpec
    sim: Optional[Any]
    outputs: Outputs
    values: dict = field(repr=False, default_factory=dict)


def build_run_config(values: dict[str, Any]) -> RunConfig:
    from .moments import InitialMeasure
    from .simulator import RhoSpec, SimConfig

    v = values
    model = ModelParams(
        v["model.a"], v["model.delta"], v["model.lam"], v["model.lip_upper"], v["model.vip_upper"],
        v["model.lip_lower"], v["model.vip_lower"],
    )
    kind = v["measure.kind"]
    if kind == "dirac":
        mu = InitialMeasure.dirac(v["measure.x0"], v["measure.mass"])
    elif kind == "lebesgue":
        mu = InitialMeasure.lebesgue(v["measure.level"])
    elif kind == "zero":
        mu = InitialMeasure()
    else:
        raise DomainError(f"measure.kind must be one of {MEASURE_KINDS}, got {kind!r}")
    grid = GridSpec(v["grid.t_min"], v["grid.t_max"], v["grid.nt"], v["grid.x_half_width"], v["grid.nx"])
    rho_kind = v["sim.rho"]
    if rho_kind == "linear":
        rho = RhoSpec.linear(model.lip_upper)
    elif rho_kind == "near_linear":
        rho = RhoSpec.near_linear(model.lip_upper, model.vip_upper)
    elif rho_kind == "zero":
        rho = RhoSpec.zero()
    else:
        raise DomainError(f"sim.rho must be linear, near_linear or zero, got {rho_kind!r}")
    sim = SimConfig(
        grid=grid, n_paths=v["sim.n_paths"], master_seed=v["sim.seed"], rho=rho, p_values=v["sim.p_values"],
        batch_size=v["sim.batch_size"], threads=v["sim.threads"], substeps=v["sim.substeps"], refine=v["sim.refine"],
    )
    if not 1 <= v["outputs.precision"] <= 17:
        raise DomainError("outputs.precision must lie in [1, 17]")
    return RunConfig(model, mu, grid, sim, Outputs(Path(v["outputs.out_dir"]), v["outputs.precision"]), dict(v))


# ---------------------------------------------------------------------------
# CSV writers


def format_number(value: float, precision: int) -> str:
    value = float(value)
    if math.isnan(value):
        return "nan"
    if math.isinf(value):
        return "inf" if value > 0 else "-inf"
    return f"{value:.{precision}e}"


def write_field(path: Path, fld: ScalarField, precision: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "x", "value"))
        for t, x, val in fld.rows():
            w.writerow((format_number(t, precision), format_number(x, precision), format_number(val, precision)))


def write_report(path: Path, rows: Sequence[tuple[str, str, float]], precision: int):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("name", "quantity", "value"))
        for name, qty, val in rows:
            w.writerow((name, qty, format_number(val, precision)))


class Runner:
    def __init__(self, cfg: RunConfig, quiet: bool = False):
        self.cfg = cfg
        self.quiet = quiet
        self.out = cfg.outputs.out_dir
        self.prec = cfg.outputs.precision
        self.v = cfg.values

    def _say(self, msg: str):
        if not self.quiet:
            print(msg)

    def _field(self, name: str, fld: ScalarField, what: str):
        path = self.out / name
        write_field(path, fld, self.prec)
        self._say(f"{path}: {what}, {fld.grid.nt}x{fld.grid.nx} points")

    def _report(self, name: str, rows, what: str):
        path = self.out / name
        write_report(path, rows, self.prec)
        self._say(f"{path}: {what}, {len(rows)} rows")

    def green(self) -> int:
        from .stable_green import green_field

        self._field("green.csv", green_field(self.cfg.model, self.cfg.grid), "Green function G(t,x)")
        return EXIT_OK

    def kernel(self) -> int:
        from .kernel_k import kernel_lower_bound_field, kernel_series, kernel_upper_bound_field

        m, g = self.cfg.model, self.cfg.grid
        est = kernel_series(m, g, m.lam, tol=self.v["kernel.tol"], method=self.v["kernel.method"])
        self._field("kernel.csv", est.field, f"kernel series, N={est.trunc_index}")
        upper = kernel_upper_bound_field(m, g, m.lam).values
        lower = kernel_lower_bound_field(m, g, m.lam).values if m.strict else None
        rows = []
        for i, t in enumerate(g.t):
            rows.append(("tail", f"t={format_number(t, self.prec)}", est.tail_bound_field[i]))
            for j, x in enumerate(g.x):
                where = f"t={format_number(t, self.prec)};x={format_number(x, self.prec)}"
                rows.append(("upper", where, upper[i, j]))
                if lower is not None:
                    rows.append(("lower", where, lower[i, j]))
        self._report("kernel_bounds.csv", rows, "kernel bounds" + ("" if m.strict else " (upper only)"))
        return EXIT_OK

    def moments(self) -> int:
        from .moments import moment_constants, pth_moment_upper, second_moment_exact, second_moment_lower, two_point_bound

        m, mu, g = self.cfg.model, self.cfg.measure, self.cfg.grid
        p = self.v["moments.p"]
        self._field("moments.csv", second_moment_exact(m, mu, g, m.vip_upper, m.lam),
                    f"second moment for rho^2 = lam^2 (v^2 + u^2), lam={m.lam:g}")
        self._field("moments_upper.csv", pth_moment_upper(m, mu, g, p), f"upper bound on ||u||_{p}^2")
        self._field("moments_lower.csv", second_moment_lower(m, mu, g), "lower bound on E u^2")
        flat = self.v["moments.two_point"]
        if len(flat) % 4:
            raise DomainError("moments.two_point needs groups of four numbers t, x, tau, y")
        rows = []
        for k in range(0, len(flat), 4):
            t, x, tau, y = flat[k:k + 4]
            name = ";".join(f"{n}={format_number(val, self.prec)}" for n, val in zip(("t", "x", "tau", "y"), (t, x, tau, y)))
            for which in ("exact", "upper", "lower"):
                if which == "lower" and not m.strict:
                    continue
                val = two_point_bound(m, mu, t, x, tau, y, which, variant=self.v["moments.two_point_variant"])
                rows.append((name, which, val))
        c = moment_constants(m, p)
        for qty in ("gamma_bar", "gamma_low", "gamma_hat_p", "z_p", "a_pv"):
            rows.append((f"p={p}", qty, getattr(c, qty)))
        self._report("two_point.csv", rows, "two-point values and moment constants")
        return EXIT_OK

    def _simulate(self):
        from .simulator import simulate

        return simulate(self.cfg.model, self.cfg.measure, self.cfg.sim)

    def simulate(self) -> int:
        em = self._simulate()
        first = em.p_values[0]
        self._field("empirical_moments.csv", em.moment_fields[first],
                    f"empirical E|u|^{first}, {em.n_paths} paths, seed {em.master_seed}")
        self._field("empirical_stderr.csv", em.stderr_fields[first], f"standard error of E|u|^{first}")
        for p in em.p_values[1:]:
            self._field(f"empirical_moments_p{p}.csv", em.moment_fields[p], f"empirical E|u|^{p}")
            self._field(f"empirical_stderr_p{p}.csv", em.stderr_fields[p], f"standard error of E|u|^{p}")
        return EXIT_OK

    def growth(self) -> int:
        from .growth import (decay_beta_from_measure, e_lower, e_upper, empirical_growth_curve,
                             intermittency_lower, intermittency_upper)

        m, mu = self.cfg.model, self.cfg.measure
        rows = []
        skipped = []

        def add(name, qty, fn):
            try:
                rows.append((name, qty, float(fn())))
            except DomainError as exc:
                skipped.append(f"{name}.{qty}")
                log.info("skipping %s %s: %s", name, qty, exc)

        beta = None
        try:
            beta = decay_beta_from_measure(m, mu, self.v["growth.eta"])
            rows.append(("measure", "beta_decay", beta))
        except DomainError as exc:
            skipped.append("measure.beta_decay")
            log.info("no decay rate: %s", exc)
        add("e", "lower", lambda: e_lower(m, mu))
        em = self._simulate() if self.v["growth.empirical"] else None
        for p in self.v["growth.p"]:
            add(f"p={p}", "lyapunov_upper", lambda: intermittency_upper(m, p))
            add(f"p={p}", "lyapunov_lower", lambda: intermittency_lower(m, p, mu))
            if beta is not None:
                add(f"p={p}", "e_upper", lambda: e_upper(m, p, beta))
            if em is not None and p in em.moment_fields and self.v["growth.alphas"]:
                for pt in empirical_growth_curve(em, p, self.v["growth.alphas"]):
                    if pt.accepted:
                        rows.append((f"p={p};alpha={format_number(pt.alpha, self.prec)}", "slope", pt.slope))
                        rows.append((f"p={p};alpha={format_number(pt.alpha, self.prec)}", "drift", pt.drift))
        note = f" (undefined here: {', '.join(skipped)})" if skipped else ""
        self._report("growth.csv", rows, "growth bounds" + note)
        return EXIT_OK

    def verify(self) -> int:
        from .verify import check_fourier_lower, check_g1_lemmas, check_prop_g, check_time_incr, suite_passed

        m = self.cfg.model
        n, seed = self.v["verify.samples"], self.v["verify.seed"]
        results = []
        if 1 < m.a <= 2:
            results += check_prop_g(m, n, seed)
            results.append(check_time_incr(m.a, n, seed))
        for nu in self.v["verify.nu"]:
            results.append(check_fourier_lower(nu, n, seed))
        results += check_g1_lemmas(m.a, n, seed, delta=m.delta, eps=self.v["verify.eps"])
        results.sort(key=lambda r: r.name)
        rows = []
        for r in results:
            rows += [(r.name, "points_tested", r.points_tested), (r.name, "worst_margin", r.worst_margin),
                     (r.name, "tolerance", r.tolerance), (r.name, "pass", float(r.passed)),
                     (r.name, "required", float(r.required))]
            rows += [(r.name, k, v) for k, v in r.constants.items()]
        ok = suite_passed(results)
        failed = [r.name for r in results if r.required and not r.passed]
        self._report("verify.csv", rows, "verification suite " + ("passed" if ok else f"FAILED: {', '.join(failed)}"))
        return EXIT_OK if ok else EXIT_VERIFY

    def run(self, sub: str) -> int:
        self.out.mkdir(parents=True, exist_ok=True)
        if sub != "all":
            return getattr(self, sub)()
        code = EXIT_OK
        for name in SUBCOMMANDS[:-1]:
            rc = getattr(self, name)()
            code = code or rc
        return code


def run(subcommand: str, config_path: str, overrides: Sequence[str] = (), out: Optional[str] = None,
        seed: Optional[int] = None, quiet: bool = False) -> int:
    """Run one subcommand and map failures onto exit codes."""
    if subcommand not in SUBCOMMANDS:
        print(USAGE, file=sys.stderr)
        return EXIT_DOMAIN
    try:
        try:
            text = Path(config_path).read_text()
        except OSError as exc:
            raise DomainError(f"cannot read config {config_path}: {exc}") from None
        extra = list(overrides)
        if out is not None:
            extra.append(f"outputs.out_dir={out}")
        if seed is not None:
            extra += [f"sim.seed={seed}", f"verify.seed={seed}"]
        cfg = build_run_config(parse_config(text, extra))
        return Runner(cfg, quiet).run(subcommand)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except (AccuracyError, StabilityError, EstimationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ACCURACY


USAGE = (
    "usage: fracshe {" + ",".join(SUBCOMMANDS) + "} --config PATH [--set key=value ...] "
    "[--out DIR] [--seed N] [--quiet]"
)


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in SUBCOMMANDS:
        print(USAGE, file=sys.stderr)
        return EXIT_DOMAIN
    ap = argparse.ArgumentParser(prog="fracshe", usage=USAGE)
    ap.add_argument("subcommand", choices=SUBCOMMANDS)
    ap.add_argument("--config", required=True)
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    ap.add_argument("--out")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--quiet", action="store_true")
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_DOMAIN if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    return run(args.subcommand, args.config, args.overrides, args.out, args.seed, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
