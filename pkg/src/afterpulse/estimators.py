"""Afterpulse probability estimators.

Three folded-histogram methods operate on gate-resolved count histograms
collected with and without illumination:

* Bethune     -- laser at half the gate rate; afterpulse rate read from the
                 non-illuminated gate of each pair,
* Yuan        -- laser at an integer sub-multiple of the gate rate;
                 afterpulse rate read from one designated gate after the
                 illuminated one, scaled by the gate-to-laser ratio,
* coincidence -- same setup, but the whole non-coincident count over a laser
                 period is used.

The sweep-histogram method measures the ratio of afterpulse counts (above
the dark baseline) to trigger counts, ``p_exp = C_ap / C0``, and converts it
into the lumped, first-order and second-order internal afterpulse
probabilities via the forward models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import models
from .histio import SweepHistogram
from .simulator import ClickTrace

__all__ = [
    "DegenerateDataError",
    "GateHistogram",
    "EstimateBundle",
    "fold_gate_histogram",
    "estimate_bethune",
    "estimate_yuan",
    "estimate_coincidence",
    "dcr_baseline",
    "estimate_custom",
    "derive_all",
]


class DegenerateDataError(RuntimeError):
    """The histogram cannot support the requested estimate."""


@dataclass
class GateHistogram:
    """Click counts folded onto one analysis period of the gate grid.

    ``bins`` spans ``gates_per_period * bins_per_gate`` sub-gate bins so gate
    boundaries stay resolvable.  ``acquisition_gates`` is the total number of
    gates observed and ``tau_s`` the statistical dead time used to convert
    counts into live rates.
    """

    bins: np.ndarray
    bin_width: float  # seconds
    period: float  # seconds, one analysis period
    gates_per_period: int
    acquisition_gates: int
    tau_s: float = 0.0

    def __post_init__(self) -> None:
        self.bins = np.asarray(self.bins, dtype=np.int64)
        if self.gates_per_period < 1:
            raise DegenerateDataError("gates_per_period must be >= 1")
        if len(self.bins) % self.gates_per_period != 0:
            raise DegenerateDataError(
                f"{len(self.bins)} bins do not resolve "
                f"{self.gates_per_period} gates"
            )
        if abs(len(self.bins) * self.bin_width - self.period) > self.bin_width:
            raise DegenerateDataError("bins * bin_width must equal the period")

    @property
    def bins_per_gate(self) -> int:
        return len(self.bins) // self.gates_per_period

    @property
    def f_g(self) -> float:
        return self.gates_per_period / self.period

    @property
    def total_counts(self) -> int:
        return int(self.bins.sum())

    @property
    def live_time(self) -> float:
        """Acquisition time minus the dead time spent after each click."""
        duration = self.acquisition_gates / self.f_g
        live = duration - self.total_counts * self.tau_s
        if live <= 0.0:
            raise DegenerateDataError("dead time exceeds the acquisition time")
        return live

    def gate_counts(self) -> np.ndarray:
        """Counts aggregated per gate within the period."""
        return self.bins.reshape(self.gates_per_period, self.bins_per_gate).sum(
            axis=1
        )

    def illuminated_gate(self) -> int:
        """Index of the gate with maximal counts, taken as illuminated."""
        return int(np.argmax(self.gate_counts()))


@dataclass
class EstimateBundle:
    """Sweep-histogram estimate and its model conversions."""

    p_exp: float
    c0: int = 0
    c_ap: float = 0.0
    c_dcr: float = 0.0
    p_s: float | None = None
    p1: float | None = None
    p2: float | None = None
    p_universal: float | None = None
    negative_ap_warning: bool = False
    meta: dict[str, float] = field(default_factory=dict)


def fold_gate_histogram(trace: ClickTrace, bins_per_gate: int = 10) -> GateHistogram:
    """Fold a click train onto one laser period at sub-gate resolution.

    Clicks are resolved on the gate grid, so each lands in the central bin
    of its gate.
    """
    if bins_per_gate < 1:
        raise DegenerateDataError("bins_per_gate must be >= 1")
    m = trace.gates_per_pulse
    gate_idx = (trace.click_gates % m).astype(np.int64)
    bin_idx = gate_idx * bins_per_gate + bins_per_gate // 2
    bins = np.bincount(bin_idx, minlength=m * bins_per_gate).astype(np.int64)
    gate_time = 1.0 / trace.f_g
    return GateHistogram(
        bins=bins,
        bin_width=gate_time / bins_per_gate,
        period=m * gate_time,
        gates_per_period=m,
        acquisition_gates=trace.total_gates,
        tau_s=trace.tau_s,
    )


def _matched(lit: GateHistogram, dark: GateHistogram) -> None:
    if lit.gates_per_period != dark.gates_per_period:
        raise DegenerateDataError(
            "lit and dark histograms cover different period structures "
            f"({lit.gates_per_period} vs {dark.gates_per_period} gates)"
        )


def estimate_bethune(lit: GateHistogram, dark: GateHistogram) -> float:
    """Afterpulse probability from a half-rate-laser two-gate histogram.

    (R_ni - R_dark) / R_de with R_ni the non-illuminated-gate rate, R_de the
    rate over both gates and R_dark the matching dark-gate rate.
    """
    if lit.gates_per_period != 2:
        raise DegenerateDataError(
            "the half-rate method needs exactly two gates per laser period, "
            f"got {lit.gates_per_period}"
        )
    _matched(lit, dark)
    ill = lit.illuminated_gate()
    ni = 1 - ill
    r_ni = lit.gate_counts()[ni] / lit.live_time
    r_de = lit.total_counts / lit.live_time
    r_dark = dark.gate_counts()[ni] / dark.live_time
    if r_de <= 0.0:
        raise DegenerateDataError("no counts in the illuminated histogram")
    return float((r_ni - r_dark) / r_de)


def estimate_yuan(
    lit: GateHistogram,
    dark: GateHistogram,
    f_g: float,
    f_l: float,
    ni_gate_index: int = 1,
) -> float:
    """Afterpulse probability from one designated post-trigger gate.

    (R_ni - R_dark) / (R_c_de - R_ni) * f_g / f_l, with R_ni the rate in the
    gate ``ni_gate_index`` places after the illuminated gate.  Later gates
    give smaller estimates because the afterpulse density decays with gate
    number.
    """
    ratio = f_g / f_l
    if abs(ratio - round(ratio)) > 1e-6:
        raise DegenerateDataError(
            f"f_g must be an integer multiple of f_l (f_g/f_l = {ratio!r})"
        )
    if lit.gates_per_period != round(ratio):
        raise DegenerateDataError(
            f"histogram has {lit.gates_per_period} gates per period, "
            f"f_g/f_l = {round(ratio)}"
        )
    _matched(lit, dark)
    m = lit.gates_per_period
    if not 1 <= ni_gate_index < m:
        raise DegenerateDataError(
            f"ni_gate_index must be in [1, {m}), got {ni_gate_index}"
        )
    ill = lit.illuminated_gate()
    ni = (ill + ni_gate_index) % m
    counts = lit.gate_counts()
    r_ni = counts[ni] / lit.live_time
    r_cde = counts[ill] / lit.live_time
    r_dark = dark.gate_counts()[ni] / dark.live_time
    if r_cde <= r_ni:
        raise DegenerateDataError(
            "coincident rate does not exceed the designated gate rate"
        )
    return float((r_ni - r_dark) / (r_cde - r_ni) * ratio)


def estimate_coincidence(
    lit: GateHistogram, dark: GateHistogram, f_g: float, f_l: float
) -> float:
    """Afterpulse probability from all non-coincident counts per laser period.

    (R_de - R_c_de - (1 - f_l/f_g) * R_dark) / R_c_de, with R_de the total
    rate over the period and R_dark the total dark rate.
    """
    ratio = f_g / f_l
    if abs(ratio - round(ratio)) > 1e-6:
        raise DegenerateDataError(
            f"f_g must be an integer multiple of f_l (f_g/f_l = {ratio!r})"
        )
    _matched(lit, dark)
    ill = lit.illuminated_gate()
    r_de = lit.total_counts / lit.live_time
    r_cde = lit.gate_counts()[ill] / lit.live_time
    r_dark = dark.total_counts / dark.live_time
    if r_cde <= 0.0:
        raise DegenerateDataError("no coincident counts")
    return float((r_de - r_cde - (1.0 - f_l / f_g) * r_dark) / r_cde)


def _window_bins(h: SweepHistogram, window: tuple[float, float]) -> np.ndarray:
    start, end = window
    if not 0.0 <= start < end <= h.sweep + 0.5 * h.bin_width:
        raise DegenerateDataError(
            f"window {window!r} does not fit inside the {h.sweep!r} s sweep"
        )
    starts = h.bin_starts
    mask = (starts >= start - 1e-15) & (starts < end - 1e-15)
    if not mask.any():
        raise DegenerateDataError(f"window {window!r} selects no bins")
    return mask


def dcr_baseline(h: SweepHistogram, window: tuple[float, float]) -> float:
    """Average dark counts per bin over a late, afterpulse-free window."""
    mask = _window_bins(h, window)
    return float(h.bins[mask].mean())


def estimate_custom(
    h: SweepHistogram,
    tau_s: float,
    window: tuple[float, float] = (20e-6, 25e-6),
) -> EstimateBundle:
    """Afterpulse-to-trigger ratio from a sweep histogram.

    Sums the dark-subtracted counts of every bin from the end of the dead
    time to the end of the sweep and divides by the trigger count:
    p_exp = sum(C_i - C_dcr) / C0.  Bins inside (0, tau_s) are excluded.
    Per-bin differences are summed unclamped; a warning flag is set when
    the total is negative beyond 3 sigma of the dark-count noise.
    """
    if h.c0 <= 0:
        raise DegenerateDataError("histogram has no trigger counts")
    if not tau_s < h.sweep:
        raise DegenerateDataError(
            f"tau_s = {tau_s!r} must be below the sweep {h.sweep!r}"
        )
    c_dcr = dcr_baseline(h, window)
    ap_mask = h.bin_starts >= tau_s - 1e-15
    n_ap = int(ap_mask.sum())
    c_ap = float(h.bins[ap_mask].sum() - n_ap * c_dcr)
    p_exp = c_ap / h.c0

    n_dcr = int(_window_bins(h, window).sum())
    var = n_ap * c_dcr * (1.0 + n_ap / n_dcr)
    warn = bool(c_ap < -3.0 * math.sqrt(var)) if var > 0.0 else bool(c_ap < 0.0)
    return EstimateBundle(
        p_exp=p_exp,
        c0=h.c0,
        c_ap=c_ap,
        c_dcr=c_dcr,
        negative_ap_warning=warn,
    )


def derive_all(p_exp: float, rate: float, tau_s: float) -> EstimateBundle:
    """Convert a measured ratio into every model's afterpulse parameter.

    The busy fraction R*tau gives the total click probability per dead-time
    window, from which the base probability is p0 = R*tau / (1 + p_exp).
    Fills the lumped (p_s), first-order (p1), second-order (p2, numeric
    inversion) parameters and the model-independent afterpulse click
    probability.
    """
    exp = models.ExperimentalAfterpulse(p_exp=p_exp, rate=rate, tau_s=tau_s)
    p_n = rate * tau_s
    p0 = p_n / (1.0 + p_exp)
    if p0 >= 1.0:
        raise DegenerateDataError(f"busy fraction gives p0 = {p0!r} >= 1")
    p_s = models.p_s_from_rate(exp)
    p1 = models.invert_first(p_exp)
    if p0 < 1e-12 or p_exp == 0.0:
        p2 = p1  # the second-order inversion reduces to first order as p0 -> 0
    else:
        p2 = models.invert_second(p_exp, p0)
    return EstimateBundle(
        p_exp=p_exp,
        p_s=p_s,
        p1=p1,
        p2=p2,
        p_universal=models.universal_p_ap(p_exp, p0),
        meta={"p0": p0, "p_n": p_n, "rate": rate, "tau_s": tau_s},
    )
