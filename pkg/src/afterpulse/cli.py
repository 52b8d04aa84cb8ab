"""Command-line front end: simulate, estimate, compare, sweep dead times, fit.

Configuration is a sectioned key-value text file (INI syntax); unknown
sections or keys are rejected so typos fail loudly.  Every command is
deterministic for a fixed config (seeds included) and emits CSV with a
one-line header.  Exit codes: 0 success, 1 usage/config/IO error,
2 numerical or degenerate-data error.
"""

from __future__ import annotations

import argparse
import configparser
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import _kernels
from .estimators import (
    DegenerateDataError,
    EstimateBundle,
    GateHistogram,
    derive_all,
    estimate_bethune,
    estimate_coincidence,
    estimate_custom,
    estimate_yuan,
    fold_gate_histogram,
)
from .fitting import FitInputError, FitLaw, FitResult, fit_curve
from .histio import HistogramFormatError, SweepHistogram, read_histogram, write_histogram
from .models import DomainError, NoRootError
from .simulator import (
    DeadTimeScheme,
    SchemeKind,
    SimConfig,
    SimulationConfigError,
    build_sweep_histogram,
    run_simulation,
)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2


class ConfigError(ValueError):
    """A config file or command line cannot be used as given."""


_CONFIG_ERRORS = (ConfigError, SimulationConfigError, HistogramFormatError, OSError)
_NUMERIC_ERRORS = (DegenerateDataError, NoRootError, DomainError, FitInputError)

METHODS = ("custom", "bethune", "yuan", "coincidence")

# defaults follow the bundled detector presets: 312.5 MHz gating, 20% PDE
# with 100 Hz dark counts, 10 kHz pulsed laser near one photon per pulse
_SCHEMA: dict[str, dict[str, tuple]] = {
    "detector": {
        "gate_frequency_hz": (float, 312.5e6),
        "pde": (float, 0.2),
        "dcr_hz": (float, 100.0),
        "afterpulse_probability": (float, 0.1),
        "detrap_time_s": (float, 1e-6),
    },
    "source": {
        "laser_frequency_hz": (float, 1e4),
        "mean_photons": (float, 1.0),
    },
    "deadtime": {
        "scheme": (str, "lt-ar"),
        "latch_time_s": (float, 0.2e-6),
        "hold_time_s": (float, 0.2e-6),
        "recovery_time_s": (float, 0.0),
        "ramp": (str, "linear"),
    },
    "run": {
        "n_gates": (int, 200_000_000),
        "seed": (int, 1),
    },
    "histogram": {
        "sweep_s": (float, 25e-6),
        "bin_width_s": (float, 10e-9),
    },
    "estimation": {
        "dcr_window_start_s": (float, 20e-6),
        "dcr_window_end_s": (float, 25e-6),
        "yuan_gate_index": (int, 1),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Validated contents of a config file, with defaults applied."""

    values: dict[str, dict[str, object]]

    def __getitem__(self, addr: tuple[str, str]):
        section, key = addr
        return self.values[section][key]

    def scheme(self) -> DeadTimeScheme:
        kind = SchemeKind(str(self[("deadtime", "scheme")]))
        return DeadTimeScheme(
            kind=kind,
            tau_l=self[("deadtime", "latch_time_s")],
            tau_c=self[("deadtime", "hold_time_s")] if kind == SchemeKind.LT_AR else 0.0,
            tau_er=self[("deadtime", "recovery_time_s")]
            if kind == SchemeKind.LT_AR
            else 0.0,
            ramp=str(self[("deadtime", "ramp")]),
        )

    def sim_config(self, seed: int | None = None) -> SimConfig:
        f_g = self[("detector", "gate_frequency_hz")]
        return SimConfig(
            scheme=self.scheme(),
            n_gates=self[("run", "n_gates")],
            seed=self[("run", "seed")] if seed is None else seed,
            f_g=f_g,
            f_l=self[("source", "laser_frequency_hz")],
            mu=self[("source", "mean_photons")],
            pde=self[("detector", "pde")],
            dcr_per_gate=self[("detector", "dcr_hz")] / f_g,
            p_ap_internal=self[("detector", "afterpulse_probability")],
            tau_detrap=self[("detector", "detrap_time_s")],
        )

    def dcr_window(self) -> tuple[float, float]:
        return (
            self[("estimation", "dcr_window_start_s")],
            self[("estimation", "dcr_window_end_s")],
        )


def load_config(path: str | Path) -> RunConfig:
    """Parse and validate a config file against the schema."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    values: dict[str, dict[str, object]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                raise ConfigError(f"{path}: unknown key '{key}' in [{section}]")
    for section, keys in _SCHEMA.items():
        values[section] = {}
        for key, (cast, default) in keys.items():
            if parser.has_option(section, key):
                raw = parser.get(section, key)
                try:
                    values[section][key] = cast(float(raw)) if cast is int else cast(raw)
                except ValueError as exc:
                    raise ConfigError(
                        f"{path}: key '{key}' in [{section}]: cannot parse {raw!r}"
                    ) from exc
            else:
                values[section][key] = default
    return RunConfig(values=values)


def _gate_hist_to_container(hist: GateHistogram, extra: dict[str, str]) -> SweepHistogram:
    meta = {
        "kind": "gate",
        "gates_per_period": str(hist.gates_per_period),
        "acquisition_gates": str(hist.acquisition_gates),
        "tau_s_ns": f"{hist.tau_s * 1e9:.6g}",
    }
    meta.update(extra)
    return SweepHistogram(
        bin_width=hist.bin_width,
        sweep=hist.period,
        bins=hist.bins,
        c0=0,
        meta=meta,
    )


def _gate_hist_from_container(h: SweepHistogram, path) -> GateHistogram:
    if h.meta.get("kind") != "gate":
        raise DegenerateDataError(
            f"{path}: not a gate histogram (missing 'kind = gate' metadata)"
        )
    try:
        gates = int(h.meta["gates_per_period"])
        acq = int(h.meta["acquisition_gates"])
        tau_s = float(h.meta.get("tau_s_ns", "0")) * 1e-9
    except (KeyError, ValueError) as exc:
        raise DegenerateDataError(f"{path}: incomplete gate metadata: {exc}") from exc
    return GateHistogram(
        bins=h.bins,
        bin_width=h.bin_width,
        period=h.sweep,
        gates_per_period=gates,
        acquisition_gates=acq,
        tau_s=tau_s,
    )


def _derive_floored(p_exp: float, rate: float, tau_s: float) -> EstimateBundle:
    """Model conversions of a measured ratio, tolerant of noise below zero.

    A dark-dominated histogram can give a slightly negative ratio; the raw
    value is reported unclamped while the model parameters are computed at
    the physical floor of zero.
    """
    bundle = derive_all(max(p_exp, 0.0), rate=rate, tau_s=tau_s)
    bundle.p_exp = p_exp
    return bundle


def _bundle_fields(bundle: EstimateBundle) -> str:
    return ",".join(
        repr(v)
        for v in (bundle.p_exp, bundle.p_s, bundle.p1, bundle.p2, bundle.p_universal)
    )


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = cfg.sim_config(seed=args.seed)
    trace = run_simulation(sim)
    if args.kind == "sweep":
        hist = build_sweep_histogram(
            trace,
            sweep=cfg[("histogram", "sweep_s")],
            bin_width=cfg[("histogram", "bin_width_s")],
        )
    else:
        gate_hist = fold_gate_histogram(trace)
        hist = _gate_hist_to_container(
            gate_hist,
            {
                "f_g_hz": repr(sim.f_g),
                "f_l_hz": repr(sim.f_l),
                "seed": str(sim.seed),
                "rate_hz": repr(trace.rate),
                "source": "simulator",
            },
        )
    write_histogram(hist, args.out)
    live_time = trace.duration - trace.n_clicks * sim.scheme.tau_s
    print(f"clicks = {trace.n_clicks}")
    print(f"hidden_avalanches = {trace.hidden_avalanches}")
    print(f"live_time_s = {live_time!r}")
    print(f"histogram = {args.out}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    hist = read_histogram(args.hist)
    if args.method == "custom":
        tau_s = args.tau_s
        if tau_s is None:
            if "tau_s_ns" not in hist.meta:
                raise DegenerateDataError(
                    "custom method needs --tau-s or tau_s_ns metadata"
                )
            tau_s = float(hist.meta["tau_s_ns"]) * 1e-9
        rate = args.rate
        if rate is None:
            if "rate_hz" not in hist.meta:
                raise DegenerateDataError(
                    "custom method needs --rate or rate_hz metadata"
                )
            rate = float(hist.meta["rate_hz"])
        window = (args.window_start, args.window_end)
        bundle = estimate_custom(hist, tau_s=tau_s, window=window)
        full = _derive_floored(bundle.p_exp, rate=rate, tau_s=tau_s)
        full.c0 = bundle.c0
        print("method,p_exp,p_s,p1,p2,P_ap")
        print("custom," + _bundle_fields(full))
        if bundle.negative_ap_warning:
            print(
                "warning: afterpulse counts negative beyond 3 sigma; "
                "check tau_s and the baseline window",
                file=sys.stderr,
            )
        return EXIT_OK
    if not args.dark:
        raise ConfigError(f"method '{args.method}' needs --dark HISTOGRAM")
    lit = _gate_hist_from_container(hist, args.hist)
    dark = _gate_hist_from_container(read_histogram(args.dark), args.dark)
    f_g = float(hist.meta.get("f_g_hz", lit.f_g))
    f_l = float(hist.meta.get("f_l_hz", f_g / lit.gates_per_period))
    if args.method == "bethune":
        value = estimate_bethune(lit, dark)
    elif args.method == "yuan":
        value = estimate_yuan(lit, dark, f_g, f_l, ni_gate_index=args.ni_gate)
    else:
        value = estimate_coincidence(lit, dark, f_g, f_l)
    print("method,P_ap")
    print(f"{args.method},{value!r}")
    return EXIT_OK


def _classical_estimate(method: str, base: SimConfig, mu: float, seed: int, yuan_gate: int) -> float:
    f_l = base.f_g / 2 if method == "bethune" else base.f_g / 50
    lit_cfg = replace(base, f_l=f_l, mu=mu, seed=seed)
    dark_cfg = replace(base, f_l=f_l, mu=0.0, seed=seed + 7919)
    lit = fold_gate_histogram(run_simulation(lit_cfg))
    dark = fold_gate_histogram(run_simulation(dark_cfg))
    if method == "bethune":
        return estimate_bethune(lit, dark)
    if method == "yuan":
        return estimate_yuan(lit, dark, base.f_g, f_l, ni_gate_index=yuan_gate)
    return estimate_coincidence(lit, dark, base.f_g, f_l)


def _custom_estimate(cfg: RunConfig, base: SimConfig, mu: float, seed: int) -> EstimateBundle:
    trace = run_simulation(replace(base, mu=mu, seed=seed))
    hist = build_sweep_histogram(
        trace,
        sweep=cfg[("histogram", "sweep_s")],
        bin_width=cfg[("histogram", "bin_width_s")],
    )
    bundle = estimate_custom(
        hist, tau_s=base.scheme.tau_s, window=cfg.dcr_window()
    )
    return _derive_floored(bundle.p_exp, rate=trace.rate, tau_s=base.scheme.tau_s)


def cmd_compare(args) -> int:
    cfg = load_config(args.config)
    base = cfg.sim_config(seed=args.seed)
    mus = args.mu
    yuan_gate = cfg[("estimation", "yuan_gate_index")]
    lines = ["method,mu,p_exp,p_s,p1,p2,P_ap"]
    for method in METHODS:
        for i, mu in enumerate(mus):
            seed = base.seed + 101 * (METHODS.index(method) + 1) + i
            if method == "custom":
                bundle = _custom_estimate(cfg, base, mu, seed)
                lines.append(f"{method},{mu!r}," + _bundle_fields(bundle))
            else:
                value = _classical_estimate(method, base, mu, seed, yuan_gate)
                lines.append(f"{method},{mu!r},,,,,{value!r}")
    table = "\n".join(lines) + "\n"
    Path(args.out).write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


def _calibrate_mu(base: SimConfig, target_rate: float, n_gates: int, seed: int) -> float:
    """Adjust the pulse energy so a short run reproduces the target rate."""

    def rate_at(mu: float) -> float:
        probe = replace(base, mu=mu, n_gates=n_gates, seed=seed)
        return run_simulation(probe).rate

    tol = 0.02 * target_rate
    mu = base.mu
    r = rate_at(mu)
    if abs(r - target_rate) <= tol:
        return mu
    if r < target_rate:
        lo, hi = mu, mu
        for _ in range(20):
            hi *= 2.0
            if rate_at(hi) >= target_rate:
                break
        else:
            return hi  # rate saturates below the target; best effort
    else:
        lo, hi = mu, mu
        for _ in range(20):
            lo *= 0.5
            if rate_at(lo) <= target_rate:
                break
        else:
            return lo
    for _ in range(40):
        mid = 0.5 * (lo + hi)
        r = rate_at(mid)
        if abs(r - target_rate) <= tol:
            return mid
        if r < target_rate:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def cmd_sweep_deadtime(args) -> int:
    cfg = load_config(args.config)
    base = cfg.sim_config(seed=args.seed)
    taus = args.tau
    if not taus or any(b <= a for a, b in zip(taus, taus[1:])):
        raise ConfigError("--tau must be a strictly increasing list of seconds")
    sweep_len = cfg[("histogram", "sweep_s")]
    if taus[-1] >= sweep_len:
        raise ConfigError(
            f"largest tau {taus[-1]!r} must stay below the sweep {sweep_len!r}"
        )
    schemes = (
        [SchemeKind.LT, SchemeKind.LT_AR]
        if args.scheme == "both"
        else [SchemeKind(args.scheme)]
    )
    if not schemes:
        raise ConfigError("no schemes selected")

    # fixed-rate sweep: the observed total count rate at the first dead time
    # is the target; the pulse energy is recalibrated at every other point
    cal_gates = min(base.n_gates, 200_000_000)
    first_scheme = _scheme_for(schemes[0], taus[0], cfg)
    target_rate = run_simulation(
        replace(base, scheme=first_scheme, n_gates=cal_gates, seed=base.seed + 1)
    ).rate

    lines = ["scheme,tau_s,mu,rate_hz,p_exp,p_s,p2"]
    series: dict[SchemeKind, list[tuple[float, float]]] = {k: [] for k in schemes}
    for kind in schemes:
        for j, tau in enumerate(taus):
            scheme = _scheme_for(kind, tau, cfg)
            probe = replace(base, scheme=scheme)
            mu = _calibrate_mu(
                probe, target_rate, cal_gates, seed=base.seed + 50 + j
            )
            trace = run_simulation(
                replace(probe, mu=mu, seed=base.seed + 1000 + j)
            )
            hist = build_sweep_histogram(
                trace, sweep=sweep_len, bin_width=cfg[("histogram", "bin_width_s")]
            )
            window = cfg.dcr_window()
            bundle = estimate_custom(hist, tau_s=scheme.tau_s, window=window)
            full = _derive_floored(bundle.p_exp, rate=trace.rate, tau_s=scheme.tau_s)
            lines.append(
                f"{kind.value},{tau!r},{mu!r},{trace.rate!r},"
                f"{full.p_exp!r},{full.p_s!r},{full.p2!r}"
            )
            series[kind].append((tau, full.p2))
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")

    print("scheme,law,a,b,c,rss,iterations,converged")
    for kind in schemes:
        xs = np.array([t for t, _ in series[kind]])
        ys = np.array([v for _, v in series[kind]])
        for law in (FitLaw.POWER_LAW, FitLaw.EXPONENTIAL):
            try:
                fit = fit_curve(xs, ys, law)
            except FitInputError as exc:
                print(f"{kind.value},{law.value},,,,,,{exc}", file=sys.stderr)
                continue
            print(
                f"{kind.value},{law.value},{fit.a!r},{fit.b!r},{fit.c!r},"
                f"{fit.rss!r},{fit.iterations},{fit.converged}"
            )
    return EXIT_OK


def _scheme_for(kind: SchemeKind, tau: float, cfg: RunConfig) -> DeadTimeScheme:
    if kind == SchemeKind.LT:
        return DeadTimeScheme(SchemeKind.LT, tau_l=tau)
    return DeadTimeScheme(
        SchemeKind.LT_AR,
        tau_l=tau,
        tau_c=tau,
        tau_er=cfg[("deadtime", "recovery_time_s")],
        ramp=str(cfg[("deadtime", "ramp")]),
    )


def cmd_fit(args) -> int:
    rows = Path(args.data).read_text(encoding="utf-8").strip().splitlines()
    if len(rows) < 2:
        raise FitInputError(f"{args.data}: no data rows")
    xs, ys = [], []
    for lineno, row in enumerate(rows[1:], start=2):
        fields = row.split(",")
        if len(fields) < 2:
            raise FitInputError(f"{args.data}:{lineno}: expected 'tau_us,value'")
        xs.append(float(fields[0]) * 1e-6)
        ys.append(float(fields[1]))
    laws = (
        [FitLaw.POWER_LAW, FitLaw.EXPONENTIAL]
        if args.law == "both"
        else [FitLaw(args.law)]
    )
    print("law,a,b,c,rss,iterations,converged")
    for law in laws:
        fit = fit_curve(np.array(xs), np.array(ys), law)
        print(
            f"{law.value},{fit.a!r},{fit.b!r},{fit.c!r},{fit.rss!r},"
            f"{fit.iterations},{fit.converged}"
        )
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1 on usage errors, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="afterpulse",
        description=(
            "Afterpulse characterization for sine-gated single-photon "
            "avalanche detectors: Monte Carlo simulation, histogram "
            "estimation methods and dead-time fits."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run the detector Monte Carlo")
    sim.add_argument("--config", required=True)
    sim.add_argument("--out", required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument(
        "--kind",
        choices=("sweep", "gate"),
        default="sweep",
        help="histogram structure to write",
    )
    sim.set_defaults(func=cmd_simulate)

    est = sub.add_parser("estimate", help="estimate afterpulse probability")
    est.add_argument("--hist", required=True)
    est.add_argument("--method", choices=METHODS, required=True)
    est.add_argument("--dark", help="dark histogram (folded-gate methods)")
    est.add_argument("--tau-s", dest="tau_s", type=float, default=None)
    est.add_argument("--rate", type=float, default=None)
    est.add_argument("--window-start", type=float, default=20e-6)
    est.add_argument("--window-end", type=float, default=25e-6)
    est.add_argument("--ni-gate", dest="ni_gate", type=int, default=1)
    est.set_defaults(func=cmd_estimate)

    cmp_ = sub.add_parser("compare", help="compare methods across pulse energies")
    cmp_.add_argument("--config", required=True)
    cmp_.add_argument("--out", required=True)
    cmp_.add_argument("--mu", type=_float_list, required=True)
    cmp_.add_argument("--seed", type=int, default=None)
    cmp_.set_defaults(func=cmd_compare)

    swp = sub.add_parser(
        "sweep-deadtime", help="afterpulse vs dead time at fixed count rate"
    )
    swp.add_argument("--config", required=True)
    swp.add_argument("--out", required=True)
    swp.add_argument("--tau", type=_float_list, required=True)
    swp.add_argument("--scheme", choices=("lt", "lt-ar", "both"), default="both")
    swp.add_argument("--seed", type=int, default=None)
    swp.set_defaults(func=cmd_sweep_deadtime)

    fit = sub.add_parser("fit", help="fit decay laws to a tau/probability table")
    fit.add_argument("--data", required=True)
    fit.add_argument(
        "--law", choices=("power", "exponential", "both"), default="both"
    )
    fit.set_defaults(func=cmd_fit)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _CONFIG_ERRORS as exc:
        print(f"afterpulse: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except _NUMERIC_ERRORS as exc:
        print(f"afterpulse: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
