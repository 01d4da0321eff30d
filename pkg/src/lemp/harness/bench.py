"""Throughput benchmark for the FDTD kernels (seconds per iteration, MCells/s)."""

from __future__ import annotations

import os
import statistics
import time
from dataclasses import asdict, dataclass

from ..fdtd import solver
from ..fdtd.grid import CpmlProfile, GridSpec

MIN_ITERATIONS = 10
MIN_WARMUP = 3


class InsufficientMemoryError(MemoryError):
    def __init__(self, estimate: int, available: int):
        self.estimate = estimate
        self.available = available
        super().__init__(f"refusing to allocate: estimate {estimate / 1e9:.2f} GB exceeds "
                         f"available {available / 1e9:.2f} GB")


@dataclass(frozen=True)
class PerfReport:
    dimensionality: str
    cells: int
    iterations: int
    seconds_per_iteration: float
    mcells_per_second: float
    init_time: float
    solve_time: float
    precision: str
    memory_estimate: int
    threads: int

    def __post_init__(self):
        if self.iterations < 1 or self.seconds_per_iteration <= 0:
            raise ValueError("a report needs at least one timed iteration")

    @classmethod
    def from_timings(cls, *, cells: int, iter_times, **kw) -> "PerfReport":
        spi = statistics.median(iter_times)
        return cls(cells=cells, iterations=len(iter_times), seconds_per_iteration=spi,
                   mcells_per_second=cells / (spi * 1e6), solve_time=float(sum(iter_times)), **kw)

    def to_dict(self) -> dict:
        return asdict(self)


def available_memory() -> int:
    """Physical memory currently available to the process, in bytes."""
    try:
        return os.sysconf("SC_AVPHYS_PAGES") * os.sysconf("SC_PAGE_SIZE")
    except (ValueError, OSError, AttributeError):
        return 1 << 62


def _threads() -> int:
    import numba

    return int(numba.get_num_threads())


def bench(grid: GridSpec, pml: CpmlProfile | None, scenario, iterations: int,
          warmup: int = MIN_WARMUP, precision: str = "single",
          memory_limit: int | None = None) -> PerfReport:
    """Time ``iterations`` Yee cycles after ``warmup`` untimed ones; report the median."""
    if iterations < MIN_ITERATIONS:
        raise ValueError(f"iterations must be >= {MIN_ITERATIONS}, got {iterations}")
    if warmup < MIN_WARMUP:
        raise ValueError(f"warmup must be >= {MIN_WARMUP}, got {warmup}")
    pml = pml or CpmlProfile()
    estimate = solver.memory_estimate(grid, pml, precision)
    limit = available_memory() if memory_limit is None else memory_limit
    if estimate > limit:
        raise InsufficientMemoryError(estimate, limit)
    t0 = time.perf_counter()
    state = solver.build(scenario, grid, pml, (), precision=precision)
    init_time = time.perf_counter() - t0
    for _ in range(warmup):
        solver.step(state)
    times = []
    for _ in range(iterations):
        t = time.perf_counter()
        solver.step(state)
        times.append(time.perf_counter() - t)
    return PerfReport.from_timings(cells=grid.cells, iter_times=times,
                                   dimensionality=grid.dimensionality, init_time=init_time,
                                   precision=precision, memory_estimate=estimate,
                                   threads=_threads())
