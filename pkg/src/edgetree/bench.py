"""Compile emitted C, read section sizes, and measure inference latency.

The external toolchain is configurable through EDGETREE_CC / EDGETREE_SIZE
(defaults: cc, size). Timing talks the firmware wire protocol either to a
host-compiled process over stdio or to a serial port; the device times only
its inner loop, so transfer time never enters the measurement.
"""

from __future__ import annotations

import os
import re
import subprocess
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import cart
from .codegen import EmittedSource, EmitterStyle, FirmwareBundle, emit, emit_firmware
from .flowdata import FlowSchema, LabeledDataset


class BenchError(RuntimeError):
    pass


class EquivalenceError(BenchError):
    """A compiled predictor disagreed with the in-memory tree."""


def cc_command() -> str:
    return os.environ.get("EDGETREE_CC", "cc")


def size_command() -> str:
    return os.environ.get("EDGETREE_SIZE", "size")


@dataclass(frozen=True)
class SectionSizes:
    text_bytes: int
    data_bytes: int
    bss_bytes: int
    optimization_level: str
    raw_output: str = ""


@dataclass(frozen=True)
class TimingResult:
    avg_ns_per_inference: float
    iterations: int
    records_measured: int
    total_elapsed_us: int
    raw_lines: tuple[str, ...] = ()


@dataclass(frozen=True)
class ComparisonReport:
    size_rows: tuple[tuple[EmitterStyle, SectionSizes], ...]
    timing_rows: tuple[tuple[EmitterStyle, TimingResult], ...]

    def render(self) -> str:
        lines = ["style            opt  text     data     bss"]
        for style, sizes in self.size_rows:
            lines.append(
                f"{style.value:<16} {sizes.optimization_level:<4} "
                f"{sizes.text_bytes:<8} {sizes.data_bytes:<8} {sizes.bss_bytes}"
            )
        lines.append("")
        lines.append("style            avg_ns_per_inference")
        for style, timing in self.timing_rows:
            lines.append(f"{style.value:<16} {timing.avg_ns_per_inference:.2f}")
        return "\n".join(lines)


def _run(cmd: list[str], **kwargs) -> subprocess.CompletedProcess:
    try:
        return subprocess.run(cmd, capture_output=True, text=True, check=False, **kwargs)
    except FileNotFoundError as exc:
        raise BenchError(f"tool not found: {cmd[0]} ({exc})") from None


def compile_source(
    source_text: str,
    workdir: Path,
    optimization_level: str = "O0",
    link: bool = False,
    name: str = "predict",
) -> Path:
    """Compile one translation unit; returns the object (or executable) path."""
    src = workdir / f"{name}.c"
    src.write_text(source_text, encoding="utf-8")
    out = workdir / (name if link else f"{name}.o")
    cmd = [cc_command(), f"-{optimization_level}"]
    if not link:
        cmd.append("-c")
    proc = _run(cmd + [str(src), "-o", str(out)])
    if proc.returncode != 0:
        raise BenchError(f"compile failed:\n{proc.stderr}")
    return out


def measure_sizes(binary: Path, optimization_level: str) -> SectionSizes:
    """Run the size utility (Berkeley format) on a compiled artifact."""
    proc = _run([size_command(), str(binary)])
    if proc.returncode != 0:
        raise BenchError(f"size failed:\n{proc.stderr}")
    for line in proc.stdout.splitlines()[1:]:
        fields = line.split()
        if len(fields) >= 3 and fields[0].isdigit():
            return SectionSizes(
                int(fields[0]), int(fields[1]), int(fields[2]),
                optimization_level, proc.stdout,
            )
    raise BenchError(f"unparseable size output:\n{proc.stdout}")


def compile_and_measure(
    src: EmittedSource | FirmwareBundle,
    optimization_level: str = "O0",
    workdir: Path | None = None,
) -> SectionSizes:
    """Compile an emission (object) or firmware bundle (executable) and size it."""
    with tempfile.TemporaryDirectory(prefix="edgetree-") as tmp:
        target = Path(workdir) if workdir else Path(tmp)
        if isinstance(src, FirmwareBundle):
            binary = compile_source(src.program_text, target, optimization_level, link=True, name="firmware")
        else:
            binary = compile_source(src.text, target, optimization_level, link=False)
        return measure_sizes(binary, optimization_level)


_RESPONSE = re.compile(r"^P,([01]),T,(\d+),N,(\d+)$")


def parse_response(line: str) -> tuple[int, int, int]:
    """(class, elapsed_us, iterations) from one wire-protocol response line."""
    match = _RESPONSE.match(line.strip())
    if not match:
        raise BenchError(f"malformed response line: {line!r}")
    return int(match.group(1)), int(match.group(2)), int(match.group(3))


def format_request(features) -> str:
    return ",".join(repr(float(v)) for v in features) + "\n"


class HostTransport:
    """Runs the host-compiled firmware as a child process over stdio."""

    def __init__(self, binary: Path):
        self.proc = subprocess.Popen(
            [str(binary)], stdin=subprocess.PIPE, stdout=subprocess.PIPE,
            stderr=subprocess.DEVNULL, text=True,
        )

    def exchange(self, line: str) -> str:
        self.proc.stdin.write(line)
        self.proc.stdin.flush()
        response = self.proc.stdout.readline()
        if not response:
            raise BenchError("firmware process closed its output")
        return response

    def close(self) -> None:
        self.proc.stdin.close()
        self.proc.wait(timeout=10)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class SerialTransport:
    """Same wire protocol over a serial port (needs pyserial)."""

    def __init__(self, port: str, baud: int = 115200, timeout: float = 30.0):
        try:
            import serial
        except ImportError:
            raise BenchError("serial transport requires the pyserial package") from None
        self.port = serial.Serial(port, baud, timeout=timeout)

    def exchange(self, line: str) -> str:
        self.port.write(line.encode("ascii"))
        response = self.port.readline().decode("ascii")
        if not response:
            raise BenchError("serial read timed out")
        return response

    def close(self) -> None:
        self.port.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def time_inference(
    bundle: FirmwareBundle,
    tree: cart.DecisionTree,
    records: LabeledDataset,
    transport=None,
    optimization_level: str = "O0",
) -> TimingResult:
    """Stream records through the firmware and aggregate per-inference time.

    Every returned class is checked against the in-memory tree; any mismatch
    aborts the run as an equivalence violation.
    """
    if len(records) == 0:
        raise BenchError("no records to measure")
    with tempfile.TemporaryDirectory(prefix="edgetree-") as tmp:
        owned = transport is None
        if owned:
            binary = compile_source(
                bundle.program_text, Path(tmp), optimization_level, link=True, name="firmware"
            )
            transport = HostTransport(binary)
        raw: list[str] = []
        total_us = 0
        iterations = bundle.iteration_count
        try:
            for row in records.features:
                response = transport.exchange(format_request(row))
                raw.append(response.rstrip("\n"))
                cls, elapsed, n_iter = parse_response(response)
                expected = cart.predict(tree, row)
                if cls != expected:
                    raise EquivalenceError(
                        f"firmware predicted {cls}, tree predicts {expected} for {row}"
                    )
                if n_iter != iterations:
                    raise BenchError(f"iteration echo {n_iter} != bundle {iterations}")
                total_us += elapsed
        finally:
            if owned:
                transport.close()
    n_records = len(records)
    avg_ns = total_us * 1000.0 / (iterations * n_records)
    return TimingResult(avg_ns, iterations, n_records, total_us, tuple(raw))


def static_cost(
    tree: cart.DecisionTree, dataset: LabeledDataset | None = None
) -> tuple[int, float]:
    """(worst_case_comparisons, mean_comparisons) along root-to-leaf paths."""
    paths: list[int] = []

    def walk(node, depth):
        if isinstance(node, cart.Leaf):
            paths.append(depth)
        else:
            walk(node.left, depth + 1)
            walk(node.right, depth + 1)

    walk(tree.root, 0)
    worst = max(paths)
    if dataset is None:
        return worst, float(np.mean(paths))

    def record_depth(row) -> int:
        node, depth = tree.root, 0
        while isinstance(node, cart.Internal):
            node = node.left if row[node.feature_index] <= node.threshold else node.right
            depth += 1
        return depth

    depths = [record_depth(row) for row in dataset.features]
    return worst, float(np.mean(depths))


def compare_emitters(
    tree: cart.DecisionTree,
    schema: FlowSchema,
    dataset: LabeledDataset,
    iteration_count: int = 100000,
) -> ComparisonReport:
    """Size both emitter styles at O0 and O3 and time both on the host."""
    size_rows = []
    timing_rows = []
    for style in (EmitterStyle.NESTED_IF, EmitterStyle.ARRAY_RECURSIVE):
        src = emit(tree, schema, style)
        for level in ("O0", "O3"):
            size_rows.append((style, compile_and_measure(src, level)))
        bundle = emit_firmware(tree, schema, style, iteration_count)
        timing_rows.append((style, time_inference(bundle, tree, dataset)))
    return ComparisonReport(tuple(size_rows), tuple(timing_rows))
