#!/usr/bin/env python3
"""Benchmark the Monte Carlo gate loop: numba-jitted vs pure numpy.

Runs the same seeded workloads through both kernel paths (they produce
bit-identical click trains) and reports wall time and speedup.  The jitted
path pays a one-off compilation cost on first call, excluded by a warmup.

Usage:
    python benchmarks/benchmark_kernel.py
"""

import math
import time

import numpy as np

from afterpulse import _kernels
from afterpulse.simulator import DeadTimeScheme, SchemeKind, SimConfig


def kernel_args(cfg: SimConfig):
    scheme = cfg.scheme
    dead = max(1, int(math.ceil(scheme.tau_s * cfg.f_g - 1e-9)))
    is_lt = scheme.kind == SchemeKind.LT
    return (
        cfg.n_gates,
        cfg.gates_per_pulse,
        cfg.p_photon,
        cfg.dcr_per_gate,
        cfg.p_ap_internal,
        cfg.tau_detrap * cfg.f_g,
        is_lt,
        dead,
        scheme.tau_c * cfg.f_g,
        scheme.tau_er * cfg.f_g if not is_lt else 0.0,
        scheme.ramp == "step",
        np.uint64(cfg.seed),
    )


WORKLOADS = {
    # pulsed source at 10 kHz: long stretches of empty gates, the loop
    # spends its time jumping between laser pulses and trap releases
    "sparse (10 kHz laser, 2e9 gates)": SimConfig(
        scheme=DeadTimeScheme(SchemeKind.LT_AR, tau_l=0.2e-6, tau_c=0.2e-6),
        n_gates=2_000_000_000,
        seed=42,
        f_l=1e4,
        mu=1.0,
        pde=0.2,
        dcr_per_gate=3.2e-7,
        p_ap_internal=0.1,
        tau_detrap=1e-6,
    ),
    # half-rate laser: every other gate is illuminated, so the event count
    # approaches the gate count and the loop body dominates
    "dense (156.25 MHz laser, 3e7 gates)": SimConfig(
        scheme=DeadTimeScheme(SchemeKind.LT, tau_l=0.2e-6),
        n_gates=30_000_000,
        seed=42,
        f_l=312.5e6 / 2,
        mu=1.0,
        pde=0.2,
        dcr_per_gate=3.2e-7,
        p_ap_internal=0.1,
        tau_detrap=1e-6,
    ),
}


def time_call(fn, args, repeats=3):
    best = math.inf
    result = None
    for _ in range(repeats):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    if not _kernels.HAVE_NUMBA:
        print("numba unavailable or disabled; nothing to compare against")
        return
    print(f"{'workload':38s} {'numpy':>10s} {'numba':>10s} {'speedup':>9s}  clicks")
    _kernels.gate_loop_jit(*kernel_args(WORKLOADS["dense (156.25 MHz laser, 3e7 gates)"]))  # warm up / compile
    for name, cfg in WORKLOADS.items():
        args = kernel_args(cfg)
        t_jit, out_jit = time_call(_kernels.gate_loop_jit, args)
        t_py, out_py = time_call(_kernels.gate_loop_python, args, repeats=1)
        assert np.array_equal(out_jit[0], out_py[0]), "paths diverged"
        print(
            f"{name:38s} {t_py:9.3f}s {t_jit:9.3f}s {t_py / t_jit:8.1f}x"
            f"  {len(out_jit[0])}"
        )


if __name__ == "__main__":
    main()
