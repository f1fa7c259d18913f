"""Forward-pass throughput sweeps over resolution and batch size.

Every cell times ``runs`` forward passes after ``warmup`` untimed ones, on a
fixed-seed random batch that is already resident. FPS is
``batch / mean(seconds per run)``. A cell that runs out of memory is recorded
as infeasible and the sweep moves on.
"""

import math
import platform
import statistics
import time
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import pandas as pd
import torch
from pydantic import BaseModel, Field, field_validator

from fastnet_dehazing.errors import CheckpointFormatError, CheckpointMismatchError, ModelLoadError
from fastnet_dehazing.models.builder import DehazeModel, build_model, build_preset, pad_to_multiple
from fastnet_dehazing.models.checkpoint import model_from_checkpoint
from fastnet_dehazing.models.config import FastNetConfig
from fastnet_dehazing.nn.layers import param_count
from fastnet_dehazing.utils.logging import StepLogger

try:
    import resource
except ImportError:  # not available on Windows
    resource = None

PathLike = Union[str, Path]
INFEASIBLE = "infeasible"


class BenchSpec(BaseModel):
    preset: Optional[str] = "toy_fastnet"
    architecture: Optional[Literal["fastnet", "dual_fastnet"]] = None
    config: Optional[FastNetConfig] = None
    checkpoint: Optional[Path] = None
    resolutions: List[Tuple[int, int]] = Field(default_factory=lambda: [(64, 64), (128, 128), (256, 256)])
    batch_sizes: List[int] = Field(default_factory=lambda: [1, 2, 4, 8], min_length=1)
    runs: int = Field(default=20, ge=1)
    warmup: int = Field(default=3, ge=0)
    precision: str = "fp32"
    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)

    @field_validator("resolutions")
    @classmethod
    def _positive_sizes(cls, sizes: List[Tuple[int, int]]) -> List[Tuple[int, int]]:
        if not sizes:
            raise ValueError("at least one resolution is required")
        for h, w in sizes:
            if h < 1 or w < 1:
                raise ValueError(f"resolution {h}x{w} must be positive")
        return sizes

    @field_validator("batch_sizes")
    @classmethod
    def _positive_batches(cls, batches: List[int]) -> List[int]:
        if any(b < 1 for b in batches):
            raise ValueError("batch sizes must be at least 1")
        return batches

    @property
    def parallel(self) -> bool:
        return self.threads > 1


class BenchCell(BaseModel):
    height: int
    width: int
    batch: int
    status: Literal["ok", "infeasible"] = "ok"
    runs: int = 0
    warmup_runs: int = 0
    mean_s: Optional[float] = None
    std_s: Optional[float] = None
    fps: Optional[float] = None
    latency_per_image_ms: Optional[float] = None
    peak_rss_mb: Optional[float] = None
    note: str = ""

    @property
    def size(self) -> str:
        return f"{self.height}x{self.width}"


class BenchReport(BaseModel):
    model: str
    architecture: str
    precision: str
    parameters: int
    threads: int
    parallel: bool
    fingerprint: str
    cells: List[BenchCell] = Field(default_factory=list)
    logs: List[str] = Field(default_factory=list)

    def cell(self, height: int, width: int, batch: int) -> Optional[BenchCell]:
        return next((c for c in self.cells if (c.height, c.width, c.batch) == (height, width, batch)), None)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([c.model_dump() for c in self.cells])
        for column, value in (("model", self.model), ("precision", self.precision), ("fingerprint", self.fingerprint)):
            frame[column] = value
        return frame

    def to_jsonl(self) -> str:
        return self.to_frame().to_json(orient="records", lines=True)

    def to_table(self) -> str:
        """Aligned plain-text table: size, batch, model, precision, FPS."""
        header = ["size", "batch", "model", "precision", "FPS"]
        rows = [
            [c.size, str(c.batch), self.model, self.precision, f"{c.fps:.2f}" if c.fps is not None else INFEASIBLE]
            for c in self.cells
        ]
        widths = [max(len(r[i]) for r in [header] + rows) for i in range(len(header))]
        lines = ["  ".join(v.ljust(w) for v, w in zip(header, widths)).rstrip()]
        lines.append("  ".join("-" * w for w in widths))
        lines += ["  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in rows]
        return "\n".join(lines)

    def write(self, path: PathLike):
        Path(path).write_text(self.to_jsonl(), encoding="utf-8")


def environment_fingerprint(threads: int) -> str:
    return (
        f"{platform.platform()} | {platform.machine()} {platform.processor() or 'unknown-cpu'} | "
        f"python {platform.python_version()} | torch {torch.__version__} | threads {threads}"
    )


def _peak_rss_mb() -> Optional[float]:
    if resource is None:
        return None
    # ru_maxrss is KiB on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss / 1024.0


def _is_oom(error: BaseException) -> bool:
    return isinstance(error, MemoryError) or "out of memory" in str(error).lower()


def load_bench_model(spec: BenchSpec) -> Tuple[str, DehazeModel]:
    """Model named by ``spec``: checkpoint, explicit architecture/config, or preset."""
    try:
        if spec.checkpoint is not None:
            model = model_from_checkpoint(spec.checkpoint)
            return Path(spec.checkpoint).stem, model
        if spec.architecture is not None:
            cfg = spec.config or FastNetConfig()
            return spec.architecture, build_model(spec.architecture, cfg, seed=spec.seed)
        if spec.preset is not None:
            return spec.preset, build_preset(spec.preset, seed=spec.seed)
    except (CheckpointFormatError, CheckpointMismatchError, FileNotFoundError) as e:
        raise ModelLoadError(f"cannot load benchmark model: {e}") from e
    raise ModelLoadError("benchmark spec names no checkpoint, architecture or preset")


class BenchRunner(StepLogger):
    logger_name = "fastnet_dehazing.bench"

    def __init__(self, spec: BenchSpec, clock=time.perf_counter):
        self.spec = spec
        self.clock = clock

    def _time_cell(self, model: DehazeModel, height: int, width: int, batch: int) -> BenchCell:
        spec = self.spec
        cell = BenchCell(height=height, width=width, batch=batch)
        generator = torch.Generator().manual_seed(spec.seed)
        dtype = next(model.parameters()).dtype
        try:
            x = torch.rand(batch, 3, height, width, generator=generator, dtype=dtype)
            x, _ = pad_to_multiple(x)
            if x.shape[-2:] != (height, width):
                cell.note = f"padded to {x.shape[-2]}x{x.shape[-1]}"

            with torch.inference_mode():
                for _ in range(spec.warmup):
                    model(x)
                    cell.warmup_runs += 1
                timings = []
                for _ in range(spec.runs):
                    start = self.clock()
                    model(x)
                    timings.append(self.clock() - start)
                    cell.runs += 1
        except (RuntimeError, MemoryError) as e:
            if not _is_oom(e):
                raise
            cell.status = INFEASIBLE
            cell.note = "out of memory"
            self._log_step("BENCH", f"{height}x{width} batch {batch}: infeasible (out of memory)")
            return cell

        cell.mean_s = statistics.fmean(timings)
        cell.std_s = statistics.pstdev(timings) if len(timings) > 1 else 0.0
        cell.fps = batch / cell.mean_s if cell.mean_s > 0 else math.inf
        cell.latency_per_image_ms = 1000.0 * cell.mean_s / batch
        cell.peak_rss_mb = _peak_rss_mb()
        self._log_step("BENCH", f"{height}x{width} batch {batch}: {cell.fps:.2f} FPS over {cell.runs} runs")
        return cell

    def run(self) -> BenchReport:
        spec = self.spec
        name, model = load_bench_model(spec)
        model.eval()
        threads = torch.get_num_threads()
        torch.set_num_threads(spec.threads)
        try:
            report = BenchReport(
                model=name,
                architecture=model.architecture,
                precision=spec.precision,
                parameters=param_count(model),
                threads=spec.threads,
                parallel=spec.parallel,
                fingerprint=environment_fingerprint(spec.threads),
            )
            self._log_step("BENCH", f"{name}: {len(spec.resolutions)} sizes x {len(spec.batch_sizes)} batches")
            for height, width in spec.resolutions:
                for batch in spec.batch_sizes:
                    report.cells.append(self._time_cell(model, height, width, batch))
        finally:
            torch.set_num_threads(threads)
        report.logs = list(self.logs)
        return report


def run_bench(spec: BenchSpec) -> BenchReport:
    return BenchRunner(spec).run()

