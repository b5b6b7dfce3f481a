"""Run records (one JSON object per run), kappa traces and multi-seed comparison."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

TRACE_COLUMNS = ("iteration", "kappa", "delta_e", "best_energy")
COMPARE_COLUMNS = (
    "iteration",
    "variant",
    "mean_energy",
    "std_energy",
    "mean_kappa",
    "kappa_zero_fraction",
)


class RecordError(ValueError):
    """Malformed record file; ``offset`` is the byte offset of the problem."""

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path}: byte {offset}: {message}")
        self.path = str(path)
        self.offset = offset


@dataclass
class IterationEntry:
    iteration: int
    best_energy: float
    true_energy: float
    kappa: Optional[float]
    delta_e: Optional[float]
    cr_size: int
    emi_score: Optional[float]
    n_observations: int
    wall_ms: float = 0.0

    @property
    def post_warmup(self) -> bool:
        return self.delta_e is not None


@dataclass
class RunRecord:
    config: dict
    seed: int
    variant: str
    init: dict
    entries: List[IterationEntry] = field(default_factory=list)
    final_energy: Optional[float] = None
    final_params: Optional[List[float]] = None
    oracle_energy: Optional[float] = None
    status: str = "complete"
    error: Optional[str] = None

    @property
    def relative_error(self) -> Optional[float]:
        if self.final_energy is None or self.oracle_energy is None:
            return None
        return abs(self.final_energy - self.oracle_energy) / abs(self.oracle_energy)

    @property
    def kappa_zero_iterations(self) -> List[int]:
        """Post-warmup iterations whose kappa was exactly zero."""
        return [e.iteration for e in self.entries if e.post_warmup and e.kappa == 0.0]

    def to_dict(self, timing: bool = True) -> dict:
        d = asdict(self)
        d["relative_error"] = self.relative_error
        if not timing:
            for e in d["entries"]:
                e.pop("wall_ms")
        return d

    def payload(self, timing: bool = True) -> str:
        return json.dumps(self.to_dict(timing), sort_keys=True, indent=1, allow_nan=False)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        d = dict(d)
        d.pop("relative_error", None)
        entries = [IterationEntry(**e) for e in d.pop("entries", [])]
        return cls(entries=entries, **d)

    @property
    def filename(self) -> str:
        return f"{self.variant}_seed{self.seed}.json"


def save_record(record: RunRecord, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / record.filename
    tmp = path.with_suffix(".json.tmp")
    tmp.write_text(record.payload() + "\n")
    tmp.replace(path)
    return path


def load_record(path) -> RunRecord:
    raw = Path(path).read_bytes()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        # exc.pos is a character index; convert to bytes for non-ASCII content
        offset = len(raw.decode("utf-8", errors="replace")[: exc.pos].encode("utf-8"))
        raise RecordError(path, offset, exc.msg) from None
    except UnicodeDecodeError as exc:
        raise RecordError(path, exc.start, "invalid UTF-8") from None
    if not isinstance(data, dict):
        raise RecordError(path, 0, "top-level value must be an object")
    try:
        return RunRecord.from_dict(data)
    except TypeError as exc:
        raise RecordError(path, 0, f"unexpected record structure ({exc})") from None


def kappa_trace_rows(record: RunRecord) -> List[dict]:
    return [
        {
            "iteration": e.iteration,
            "kappa": e.kappa,
            "delta_e": e.delta_e,
            "best_energy": e.best_energy,
        }
        for e in record.entries
    ]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _parse_cell(text: str):
    if text == "":
        return None
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def rows_to_csv(rows: Sequence[dict], columns: Sequence[str]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row[c]) for c in columns])
    return buf.getvalue()


def csv_to_rows(text: str) -> List[dict]:
    reader = csv.DictReader(io.StringIO(text))
    return [{k: _parse_cell(v) for k, v in row.items()} for row in reader]


@dataclass
class VariantSummary:
    variant: str
    seeds: List[int]
    mean_energy: List[float]
    std_energy: List[float]
    mean_kappa: List[Optional[float]]
    kappa_zero_fraction: List[Optional[float]]
    final_mean: Optional[float]
    final_std: Optional[float]
    mean_relative_error: Optional[float]
    kappa_zero_episodes: int
    kappa_zero_by_seed: Dict[int, int]


@dataclass
class ComparisonReport:
    iterations: List[int]
    variants: Dict[str, VariantSummary]

    def rows(self) -> List[dict]:
        out = []
        for i, it in enumerate(self.iterations):
            for name in sorted(self.variants):
                s = self.variants[name]
                out.append(
                    {
                        "iteration": it,
                        "variant": name,
                        "mean_energy": s.mean_energy[i],
                        "std_energy": s.std_energy[i],
                        "mean_kappa": s.mean_kappa[i],
                        "kappa_zero_fraction": s.kappa_zero_fraction[i],
                    }
                )
        return out

    def to_csv(self) -> str:
        return rows_to_csv(self.rows(), COMPARE_COLUMNS)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "variants": {
                k: {**asdict(v), "kappa_zero_by_seed": {str(s): n for s, n in v.kappa_zero_by_seed.items()}}
                for k, v in sorted(self.variants.items())
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=1, allow_nan=False)


def _fsum_mean(values: List[float]) -> float:
    return math.fsum(values) / len(values)


def compare_records(
    records: Iterable[RunRecord],
    variants: Optional[Sequence[str]] = None,
    names: Optional[Sequence[str]] = None,
) -> ComparisonReport:
    """Aggregate per-iteration statistics across seeds, grouped by variant.

    Standard deviations are population (ddof=0) so a single seed gives 0.
    ``names`` labels records in error messages (usually file paths).
    """
    records = list(records)
    names = list(names) if names is not None else [f"{r.variant}/seed{r.seed}" for r in records]
    if variants:
        keep = [i for i, r in enumerate(records) if r.variant in variants]
        missing = [v for v in variants if not any(records[i].variant == v for i in keep)]
        if missing:
            raise ValueError(f"no records for variant(s) {', '.join(missing)}")
        records = [records[i] for i in keep]
        names = [names[i] for i in keep]
    if not records:
        raise ValueError("no records to compare")

    ref_iters = [e.iteration for e in records[0].entries]
    bad = [n for r, n in zip(records, names) if [e.iteration for e in r.entries] != ref_iters]
    if bad:
        raise ValueError(
            f"iteration counts differ from {names[0]} ({len(ref_iters)} entries): {', '.join(bad)}"
        )

    groups: Dict[str, List[RunRecord]] = {}
    for r in records:
        groups.setdefault(r.variant, []).append(r)

    summaries = {}
    for name, runs in groups.items():
        runs = sorted(runs, key=lambda r: r.seed)
        energies = np.array([[e.best_energy for e in r.entries] for r in runs]).reshape(len(runs), -1)
        mean_e, std_e, mean_k, zero_frac = [], [], [], []
        for i in range(len(ref_iters)):
            col = [float(v) for v in energies[:, i]]
            m = _fsum_mean(col)
            mean_e.append(m)
            std_e.append(math.sqrt(_fsum_mean([(v - m) ** 2 for v in col])))
            kappas = [r.entries[i].kappa for r in runs if r.entries[i].kappa is not None]
            mean_k.append(_fsum_mean(kappas) if kappas else None)
            zero_frac.append(sum(k == 0.0 for k in kappas) / len(kappas) if kappas else None)
        finals = [r.final_energy for r in runs if r.final_energy is not None]
        rels = [r.relative_error for r in runs if r.relative_error is not None]
        final_mean = _fsum_mean(finals) if finals else None
        final_std = (
            math.sqrt(_fsum_mean([(v - final_mean) ** 2 for v in finals])) if finals else None
        )
        by_seed = {r.seed: len(r.kappa_zero_iterations) for r in runs}
        summaries[name] = VariantSummary(
            variant=name,
            seeds=[r.seed for r in runs],
            mean_energy=mean_e,
            std_energy=std_e,
            mean_kappa=mean_k,
            kappa_zero_fraction=zero_frac,
            final_mean=final_mean,
            final_std=final_std,
            mean_relative_error=_fsum_mean(rels) if rels else None,
            kappa_zero_episodes=sum(by_seed.values()),
            kappa_zero_by_seed=by_seed,
        )
    return ComparisonReport(ref_iters, summaries)


def load_record_dir(record_dir) -> tuple:
    paths = sorted(Path(record_dir).glob("*.json"))
    return [load_record(p) for p in paths], [str(p) for p in paths]
