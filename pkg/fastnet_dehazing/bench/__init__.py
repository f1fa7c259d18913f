"""
Throughput benchmarking

Resolution x batch-size forward-pass sweeps with warmup, averaged timing,
infeasible-cell recording and aligned text tables.
"""

from .benchmark import (
    INFEASIBLE,
    BenchCell,
    BenchReport,
    BenchRunner,
    BenchSpec,
    environment_fingerprint,
    load_bench_model,
    run_bench,
)

__all__ = [
    'INFEASIBLE',
    'BenchCell',
    'BenchReport',
    'BenchRunner',
    'BenchSpec',
    'environment_fingerprint',
    'load_bench_model',
    'run_bench',
]
