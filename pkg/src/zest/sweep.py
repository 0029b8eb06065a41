"""Experiment orchestration: strategy sweeps, reference runs, and reports.

A sweep plan names instances (weight files or generator parameters) and a
strategy grid; every (instance, strategy) pair becomes one row with the AIS
estimate, the exact value where an oracle is feasible, and their relative
difference. Row seeds derive from (master seed, instance id, strategy id),
so reordering the grid or changing the worker count cannot change results.
"""

from __future__ import annotations

import csv
import io
import json
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ais import AisConfig, AisResult, relative_difference_xi, run_ais
from .data_io import load_model, load_zbd
from .exact import EnumerationBudgetError, exact_log_z, exact_log_z_block
from .generators import BmsParams, GwgmParams, generate_bms, generate_gwgm
from .numerics import derive_seed, philox_stream
from .rbm import RbmModel, transpose
from .strategies import PRESETS, StrategySpec, build_base

XI_THRESHOLD = 0.05  # report annotation: the quality cutoff used in figures

# The published grid size for the full strategy search; the literal grid in
# table1_grid is checked against it and a mismatch is flagged loudly.
EXPECTED_TABLE1_COMBINATIONS = 325

TABLE1_GIBBS_STEPS = (1, 10, 100)
TABLE1_METROPOLIS_STEPS = (10, 100)
TABLE1_EPSILONS = (0.01, 0.05, 0.10, 0.20)
TABLE1_FLIPS_FRACTIONS = (0.05, 0.10, 0.15, 0.25, 0.50, 1.00)
TABLE1_FLIPS_ABSOLUTE = (1, 10, 40, 80)
TABLE1_INITS = ("zero", "one", "bernoulli", "mf", "ps")
TABLE1_SAMPLES = 1024


def table1_grid(flips: str = "fractions", include_transposed: bool = False):
    """The literal strategy grid: every Gibbs/Metropolis parameter combination.

    ``flips`` selects the Metropolis flip set: "fractions" for the synthetic
    families, "absolute" for the dataset-trained ones. The combination count
    is compared with the published total and a mismatch emits a warning
    rather than silently proceeding.
    """
    if flips == "fractions":
        flip_values: tuple = TABLE1_FLIPS_FRACTIONS
    elif flips == "absolute":
        flip_values = TABLE1_FLIPS_ABSOLUTE
    else:
        raise ValueError("flips must be 'fractions' or 'absolute'")
    grid: list[tuple[str, StrategySpec]] = []
    for steps in TABLE1_GIBBS_STEPS:
        for eps in TABLE1_EPSILONS:
            for init in TABLE1_INITS:
                sid = f"gibbs-s{steps}-e{eps:g}-{init}"
                grid.append((sid, StrategySpec("gibbs", init, TABLE1_SAMPLES, steps, None, eps)))
    for steps in TABLE1_METROPOLIS_STEPS:
        for nf in flip_values:
            for eps in TABLE1_EPSILONS:
                for init in TABLE1_INITS:
                    sid = f"metropolis-s{steps}-f{nf:g}-e{eps:g}-{init}"
                    grid.append(
                        (sid, StrategySpec("metropolis", init, TABLE1_SAMPLES, steps, nf, eps))
                    )
    if len(grid) != EXPECTED_TABLE1_COMBINATIONS:
        warnings.warn(
            f"literal parameter grid has {len(grid)} combinations, published "
            f"count is {EXPECTED_TABLE1_COMBINATIONS}; proceeding with the literal grid",
            stacklevel=2,
        )
    if include_transposed:
        grid = grid + [
            (sid + "-T", StrategySpec(**{**spec.to_dict(), "transpose": True}))
            for sid, spec in grid
        ]
    return grid


@dataclass(frozen=True)
class InstanceSpec:
    """One system to estimate: a weights file or generator parameters."""

    instance_id: str
    weights_path: str | None = None
    gwgm: GwgmParams | None = None
    bms: BmsParams | None = None
    dataset_path: str | None = None
    use_exact: bool = True
    max_enum_bits: int = 26

    def __post_init__(self):
        sources = [s is not None for s in (self.weights_path, self.gwgm, self.bms)]
        if sum(sources) != 1:
            raise ValueError(f"instance {self.instance_id!r} needs exactly one source")

    def realize(self) -> tuple[RbmModel, list[RbmModel] | None]:
        if self.weights_path is not None:
            return load_model(self.weights_path), None
        if self.gwgm is not None:
            return generate_gwgm(self.gwgm), None
        assembled, blocks = generate_bms(self.bms)
        return assembled, blocks

    def to_dict(self) -> dict:
        d: dict = {"id": self.instance_id, "exact": self.use_exact, "max_bits": self.max_enum_bits}
        if self.weights_path is not None:
            d["weights"] = self.weights_path
        if self.gwgm is not None:
            d["gwgm"] = self.gwgm.to_dict()
        if self.bms is not None:
            d["bms"] = {
                "blocks": [p.to_dict() for p in self.bms.blocks],
                "seed": self.bms.seed,
            }
        if self.dataset_path is not None:
            d["dataset"] = self.dataset_path
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "InstanceSpec":
        bms = None
        if "bms" in d:
            bms = BmsParams(
                blocks=tuple(GwgmParams.from_dict(p) for p in d["bms"]["blocks"]),
                seed=d["bms"].get("seed"),
            )
        return cls(
            instance_id=str(d["id"]),
            weights_path=d.get("weights"),
            gwgm=GwgmParams.from_dict(d["gwgm"]) if "gwgm" in d else None,
            bms=bms,
            dataset_path=d.get("dataset"),
            use_exact=bool(d.get("exact", True)),
            max_enum_bits=int(d.get("max_bits", 26)),
        )


@dataclass(frozen=True)
class SweepPlan:
    instances: tuple[InstanceSpec, ...]
    strategies: tuple[tuple[str, StrategySpec], ...]
    n_beta: int = 1024
    n_samples: int = 1024
    seed: int = 0

    def __post_init__(self):
        if not self.instances or not self.strategies:
            raise ValueError("plan needs at least one instance and one strategy")
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "strategies", tuple(self.strategies))

    def to_dict(self) -> dict:
        return {
            "format": "zest-plan-v1",
            "seed": self.seed,
            "ais": {"n_beta": self.n_beta, "n_samples": self.n_samples},
            "instances": [i.to_dict() for i in self.instances],
            "strategies": [
                {"id": sid, **spec.to_dict()} for sid, spec in self.strategies
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SweepPlan":
        if d.get("format") != "zest-plan-v1":
            raise ValueError(f"plan format tag {d.get('format')!r}, expected 'zest-plan-v1'")
        strategies: list[tuple[str, StrategySpec]] = []
        for s in d["strategies"]:
            s = dict(s)
            sid = s.pop("id")
            if "grid" in s:
                strategies.extend(table1_grid(**{k: v for k, v in s.items() if k != "grid"}))
            elif "preset" in s:
                spec = PRESETS[s["preset"]](bool(s.get("transpose", False)))
                strategies.append((sid, spec))
            else:
                strategies.append((sid, StrategySpec.from_dict(s)))
        return cls(
            instances=tuple(InstanceSpec.from_dict(i) for i in d["instances"]),
            strategies=tuple(strategies),
            n_beta=int(d["ais"]["n_beta"]),
            n_samples=int(d["ais"]["n_samples"]),
            seed=int(d.get("seed", 0)),
        )


@dataclass
class SweepRow:
    instance_id: str
    strategy_id: str
    strategy: StrategySpec | None
    n_beta: int
    n_samples: int
    seed: int
    log_z_ais: float | None = None
    log_z_exact: float | None = None
    sample_mean: float | None = None
    sample_std: float | None = None
    seconds: float = 0.0
    error: str | None = None

    @property
    def xi(self) -> float | None:
        # always recomputed from the stored logs, never cached
        if self.log_z_ais is None or self.log_z_exact is None:
            return None
        return relative_difference_xi(self.log_z_exact, self.log_z_ais)


def row_seed(master_seed: int, instance_id: str, strategy_id: str) -> int:
    return derive_seed(master_seed, instance_id, strategy_id)


def compute_row(
    instance: InstanceSpec,
    strategy_id: str,
    spec: StrategySpec,
    n_beta: int,
    n_samples: int,
    master_seed: int,
    exact_cache: float | None = None,
) -> SweepRow:
    """Evaluate one (instance, strategy) cell; failures land in row.error."""
    seed = row_seed(master_seed, instance.instance_id, strategy_id)
    row = SweepRow(
        instance_id=instance.instance_id,
        strategy_id=strategy_id,
        strategy=spec,
        n_beta=n_beta,
        n_samples=n_samples,
        seed=seed,
    )
    t0 = time.perf_counter()
    try:
        model, blocks = instance.realize()
        dataset = load_zbd(instance.dataset_path) if instance.dataset_path else None
        base = build_base(
            model, spec, dataset=dataset, rng=philox_stream(derive_seed(seed, "base"))
        )
        work = transpose(model) if spec.transpose else model
        result = run_ais(
            work, base, AisConfig(n_beta=n_beta, n_samples=n_samples, seed=derive_seed(seed, "ais"))
        )
        row.log_z_ais = result.log_z_ais
        row.sample_mean = result.sample_mean
        row.sample_std = result.sample_std
        if instance.use_exact:
            if exact_cache is not None:
                row.log_z_exact = exact_cache
            elif blocks is not None:
                row.log_z_exact = exact_log_z_block(blocks, instance.max_enum_bits)
            else:
                row.log_z_exact = exact_log_z(model, instance.max_enum_bits).log_z
    except (EnumerationBudgetError, ValueError, OSError, FloatingPointError) as e:
        row.error = f"{type(e).__name__}: {e}"
    row.seconds = time.perf_counter() - t0
    return row


def _row_job(args) -> SweepRow:
    instance_d, strategy_id, spec_d, n_beta, n_samples, master_seed, exact_cache = args
    return compute_row(
        InstanceSpec.from_dict(instance_d),
        strategy_id,
        StrategySpec.from_dict(spec_d),
        n_beta,
        n_samples,
        master_seed,
        exact_cache=exact_cache,
    )


def instance_exact(instance: InstanceSpec) -> float | None:
    """Exact log Z of an instance, or None when no oracle is feasible.

    Block assemblies use the per-block factorization, which stays exact far
    beyond what direct enumeration of the assembly would allow.
    """
    if not instance.use_exact:
        return None
    model, blocks = instance.realize()
    if blocks is not None:
        return exact_log_z_block(blocks, instance.max_enum_bits)
    return exact_log_z(model, instance.max_enum_bits).log_z


def sort_rows(rows: list[SweepRow]) -> list[SweepRow]:
    """Hardest first: xi descending, errors last, ids break ties."""

    def key(r: SweepRow):
        xi = r.xi
        return (
            1 if r.error is not None else 0,
            -(xi if xi is not None else -np.inf),
            r.instance_id,
            r.strategy_id,
        )

    return sorted(rows, key=key)


def run_sweep(plan: SweepPlan, workers: int = 1) -> list[SweepRow]:
    """Evaluate the full (instance, strategy) grid, hardest rows first.

    The exact value of each instance is computed once and shared across its
    rows. Rows are independent jobs; with workers > 1 they run in separate
    processes. Per-row seeds depend only on ids, and the final ordering is a
    total order, so the report does not depend on the worker count.
    """
    exact_values: dict[str, float | None] = {}
    failures: dict[str, str] = {}
    for inst in plan.instances:
        try:
            exact_values[inst.instance_id] = instance_exact(inst)
        except (EnumerationBudgetError, ValueError, OSError) as e:
            failures[inst.instance_id] = f"{type(e).__name__}: {e}"
            exact_values[inst.instance_id] = None

    jobs = []
    failed_rows = []
    for inst in plan.instances:
        for sid, spec in plan.strategies:
            if inst.instance_id in failures:
                failed_rows.append(
                    SweepRow(
                        instance_id=inst.instance_id,
                        strategy_id=sid,
                        strategy=spec,
                        n_beta=plan.n_beta,
                        n_samples=plan.n_samples,
                        seed=row_seed(plan.seed, inst.instance_id, sid),
                        error=failures[inst.instance_id],
                    )
                )
            else:
                jobs.append(
                    (
                        inst.to_dict(),
                        sid,
                        spec.to_dict(),
                        plan.n_beta,
                        plan.n_samples,
                        plan.seed,
                        exact_values[inst.instance_id],
                    )
                )
    if workers <= 1:
        rows = [_row_job(j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_row_job, jobs))
    return sort_rows(rows + failed_rows)


def run_reference(
    model: RbmModel,
    dataset,
    n_beta: int = 2**20,
    n_samples: int = 1024,
    seed: int = 0,
    epsilon: float = 0.05,
) -> AisResult:
    """Ground-truth style run: dataset-means base, then a long anneal."""
    spec = StrategySpec("dataset", epsilon=epsilon)
    base = build_base(model, spec, dataset=dataset)
    return run_ais(model, base, AisConfig(n_beta=n_beta, n_samples=n_samples, seed=seed))


# ---------------------------------------------------------------------------
# reports

CSV_COLUMNS = (
    "instance",
    "strategy",
    "sampler",
    "init",
    "strategy_samples",
    "strategy_steps",
    "strategy_flips",
    "epsilon",
    "transpose",
    "n_beta",
    "n_samples",
    "seed",
    "log_z_ais",
    "log_z_exact",
    "xi",
    "sample_mean",
    "sample_std",
    "seconds",
    "error",
)


def row_record(row: SweepRow, include_timing: bool = False) -> dict:
    spec = row.strategy
    return {
        "instance": row.instance_id,
        "strategy": row.strategy_id,
        "sampler": spec.sampler.value if spec else None,
        "init": spec.init.value if spec else None,
        "strategy_samples": spec.n_samples if spec else None,
        "strategy_steps": spec.n_steps if spec else None,
        "strategy_flips": spec.n_flips if spec else None,
        "epsilon": spec.epsilon if spec else None,
        "transpose": spec.transpose if spec else None,
        "n_beta": row.n_beta,
        "n_samples": row.n_samples,
        "seed": row.seed,
        "log_z_ais": row.log_z_ais,
        "log_z_exact": row.log_z_exact,
        "xi": row.xi,
        "sample_mean": row.sample_mean,
        "sample_std": row.sample_std,
        "seconds": row.seconds if include_timing else 0.0,
        "error": row.error,
    }


def _csv_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def rows_to_csv(rows: list[SweepRow], include_timing: bool = False) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for row in rows:
        rec = row_record(row, include_timing)
        writer.writerow([_csv_cell(rec[col]) for col in CSV_COLUMNS])
    return buf.getvalue()


def rows_to_report(rows: list[SweepRow], include_timing: bool = False) -> dict:
    return {
        "format": "zest-sweep-v1",
        "xi_threshold": XI_THRESHOLD,
        "rows": [row_record(r, include_timing) for r in rows],
    }


def report_to_csv(report: dict) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rec in report["rows"]:
        writer.writerow([_csv_cell(rec[col]) for col in CSV_COLUMNS])
    return buf.getvalue()


_CSV_TYPES = {
    "strategy_samples": int,
    "strategy_steps": int,
    "n_beta": int,
    "n_samples": int,
    "seed": int,
    "log_z_ais": float,
    "log_z_exact": float,
    "xi": float,
    "sample_mean": float,
    "sample_std": float,
    "seconds": float,
}


def _parse_cell(col: str, text: str):
    if text == "":
        return None
    if col == "transpose":
        return text == "true"
    if col == "strategy_flips":
        return int(text) if "." not in text and "e" not in text else float(text)
    if col in _CSV_TYPES:
        return _CSV_TYPES[col](text)
    return text


def csv_to_report(text: str) -> dict:
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    if tuple(header) != CSV_COLUMNS:
        raise ValueError("unexpected csv columns")
    recs = []
    for cells in reader:
        recs.append({col: _parse_cell(col, cell) for col, cell in zip(header, cells)})
    return {"format": "zest-sweep-v1", "xi_threshold": XI_THRESHOLD, "rows": recs}


def write_report(
    rows: list[SweepRow],
    out_dir,
    include_timing: bool = False,
    plots: bool = False,
) -> dict:
    """Write sweep.csv and sweep.json (plus figures when asked) into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = rows_to_report(rows, include_timing)
    (out / "sweep.csv").write_text(report_to_csv(report), encoding="utf-8")
    with open(out / "sweep.json", "w", encoding="utf-8") as f:
        json.dump(report, f, indent=1)
        f.write("\n")
    if plots:
        from . import plots as _plots

        series = _plots.xi_series(report["rows"])
        _plots.write_plot_data(series, out / "plot_data.json")
        _plots.render_xi_figure(series, out / "xi_sorted.png")
    return report
