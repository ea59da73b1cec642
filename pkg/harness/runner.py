"""Script for running seeded, resumable experiments."""

import sys
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import lru_cache
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path
from typing import NamedTuple

from pydantic import BaseModel, ValidationError, model_validator
from tqdm import tqdm

from excitation import epsilon_sweep, link_substream, max_weight_excite, random_link_excite
from harness import records
from harness.config import ExcitationMode, ExperimentConfig
from instance import WeightDistribution, sample_weights
from lattice import LatticeGraph, LatticeKind, build_lattice
from matching.blossom import min_weight_perfect_matching
from observables import ObservationRecord, gauss_bonnet_holds, observe, symmetric_difference
from utils.errors import ConfigMismatch, MalformedMatching
from utils.logging import add_file_handler, get_logger, remove_handler
from utils.rng import mix

logger = get_logger(__name__)

MANIFEST_NAME = "manifest.json"
LOG_NAME = "run.log"


def software_version() -> str:
    try:
        return version("dimerlab")
    except PackageNotFoundError:
        return "0.1.0"


class Task(NamedTuple):
    kind: LatticeKind
    L: int
    instance: int
    mode: ExcitationMode
    epsilons: tuple[float, ...]
    seed: int
    distribution: WeightDistribution


class TaskOutcome(NamedTuple):
    task: Task
    rows: list[ObservationRecord]
    error: str | None


class FailureRecord(BaseModel):
    kind: str
    L: int
    instance: int
    error: str


class RunManifest(BaseModel):
    config_hash: str
    version: str
    expected: dict[str, int]
    completed: dict[str, int]
    failures: list[FailureRecord] = []
    resumed_tasks: int = 0
    wall_clock_seconds: float = 0.0
    finished: bool = False

    @model_validator(mode="after")
    def counts_bounded(self) -> "RunManifest":
        for stratum, count in self.completed.items():
            if count > self.expected.get(stratum, 0):
                raise ValueError(f"Stratum {stratum} completed {count} of {self.expected.get(stratum, 0)} instances")
        return self


def stratum_name(kind: LatticeKind | str, L: int) -> str:
    return f"{kind}/{L}"


def stratum_seed(seed: int, kind: LatticeKind, L: int) -> int:
    """Master seed of one (kind, L) stratum; adding strata leaves others untouched."""
    return mix(seed, kind.tag, L)


@lru_cache(maxsize=32)
def cached_lattice(kind: LatticeKind, L: int) -> LatticeGraph:
    return build_lattice(kind, L)


def run_task(task: Task) -> list[ObservationRecord]:
    """Solve one instance and measure its excitation(s).

    Steps:
    1. Build (or reuse) the lattice and sample the instance weights
    2. Solve the ground state
    3. Apply the configured excitation
    4. Extract loops and check their structure
    5. Return per-loop and per-instance records

    Args:
        task: One (kind, L, instance) unit of work.

    Returns:
        The records of this instance.
    """
    g = cached_lattice(task.kind, task.L)
    inst = sample_weights(g, stratum_seed(task.seed, task.kind, task.L), task.instance, task.distribution)
    ground = min_weight_perfect_matching(inst)

    def checked_loops(excited, removed=None):
        loops = symmetric_difference(ground, excited, g)
        if removed is not None:
            u, v = (int(x) for x in g.edges[removed])
            if len(loops) != 1 or u not in loops[0].vertex_sequence or v not in loops[0].vertex_sequence:
                raise MalformedMatching(f"Removing edge {removed} gave {len(loops)} loops not all through its endpoints")
        for loop in loops:
            if not gauss_bonnet_holds(loop):
                raise MalformedMatching(f"Turning angles of a loop with winding {loop.winding} do not close")
        return loops

    if task.mode is ExcitationMode.EPSILON:
        rows: list[ObservationRecord] = []
        for result in epsilon_sweep(inst, ground, task.epsilons):
            rows.extend(observe(
                task.kind, task.L, task.instance, "epsilon",
                ground.cost, result.delta_e, checked_loops(result.excited),
                epsilon=result.epsilon, overlap=result.overlap, distance=result.distance,
            ))
        return rows

    if task.mode is ExcitationMode.MAX:
        result = max_weight_excite(inst, ground)
    else:
        result = random_link_excite(inst, ground, link_substream(inst))
    return observe(
        task.kind, task.L, task.instance, str(task.mode),
        ground.cost, result.delta_e, checked_loops(result.excited, result.removed_edge),
    )


def execute(task: Task) -> TaskOutcome:
    """Run a task; failures are logged and returned instead of raised."""
    try:
        return TaskOutcome(task, run_task(task), None)
    except (ValidationError, RuntimeError) as e:
        logger.exception(f"Instance {stratum_name(task.kind, task.L)}#{task.instance} failed: {e}")
        return TaskOutcome(task, [], f"{type(e).__name__}: {e}")


def _read_manifest(out: Path) -> RunManifest | None:
    path = out / MANIFEST_NAME
    if not path.exists():
        return None
    return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))


def _write_manifest(out: Path, manifest: RunManifest) -> None:
    (out / MANIFEST_NAME).write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")


def run_experiment(config: ExperimentConfig, quiet: bool = False) -> RunManifest:
    """Run every (kind, L, instance) of the config, resuming if possible.

    Steps:
    1. Refuse an output directory that belongs to a different config
    2. Keep finished instances from `records.partial.csv`, drop torn ones
    3. Run the missing instances, in a process pool when workers > 1
    4. Append each finished instance to the partial file from this process
    5. Write the sorted `records.csv` and `manifest.json`

    Args:
        config: Validated experiment configuration.
        quiet: Disable the progress bar.

    Returns:
        The run manifest.

    Raises:
        ConfigMismatch: `config.out` holds a run with another config hash.
    """
    out = config.out
    out.mkdir(parents=True, exist_ok=True)
    config_hash = config.config_hash()
    previous = _read_manifest(out)
    if previous is not None and previous.config_hash != config_hash:
        raise ConfigMismatch(f"{out} holds records of config {previous.config_hash[:12]}, not {config_hash[:12]}")

    handler = add_file_handler(out / LOG_NAME)
    started = time.perf_counter()
    try:
        partial_path = out / records.PARTIAL_NAME
        rows_per_task = len(config.epsilons) if config.mode is ExcitationMode.EPSILON else 1
        kept = records.read_partial(partial_path)
        done = records.completed_tasks(kept, rows_per_task)
        kept = [line for line in kept if records.task_key(line) in done]
        records.rewrite_partial(partial_path, kept)

        tasks = [
            Task(kind, L, index, config.mode, tuple(config.epsilons), config.seed, config.distribution)
            for kind in config.kinds
            for L in config.sizes
            for index in range(config.instances)
        ]
        todo = [t for t in tasks if (str(t.kind), t.L, t.instance) not in done]
        expected = {stratum_name(kind, L): config.instances for kind in config.kinds for L in config.sizes}
        completed = {name: 0 for name in expected}
        for kind_name, L, _ in done:
            completed[stratum_name(kind_name, L)] += 1
        if done:
            logger.info(f"Resuming: {len(done)} instances already recorded, {len(todo)} to go")

        manifest = RunManifest(
            config_hash=config_hash,
            version=software_version(),
            expected=expected,
            completed=completed,
            resumed_tasks=len(done),
        )
        _write_manifest(out, manifest)

        progress = tqdm(total=len(todo), desc="instances", disable=quiet or not sys.stderr.isatty())

        def collect(outcome: TaskOutcome) -> None:
            task = outcome.task
            if outcome.error is not None:
                manifest.failures.append(FailureRecord(kind=str(task.kind), L=task.L, instance=task.instance, error=outcome.error))
            else:
                records.append_rows(partial_path, outcome.rows)
                manifest.completed[stratum_name(task.kind, task.L)] += 1
            progress.update(1)

        if config.workers > 1 and len(todo) > 1:
            with ProcessPoolExecutor(max_workers=config.workers) as pool:
                futures = [pool.submit(execute, task) for task in todo]
                for future in as_completed(futures):
                    collect(future.result())
        else:
            for task in todo:
                collect(execute(task))
        progress.close()

        for name in expected:
            logger.info(f"Stratum {name}: {manifest.completed[name]}/{expected[name]} instances")

        records.write_final(out / records.FINAL_NAME, records.read_partial(partial_path))
        manifest.wall_clock_seconds = round(time.perf_counter() - started, 3)
        manifest.finished = not manifest.failures
        _write_manifest(out, manifest)
        if manifest.failures:
            logger.error(f"{len(manifest.failures)} instances failed; see {out / LOG_NAME}")
        return manifest
    finally:
        remove_handler(handler)
