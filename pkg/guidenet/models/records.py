from fractions import Fraction
from statistics import median
from typing import Literal, Optional

from pydantic import BaseModel, ConfigDict, Field


# --- DATASET ---
class SampleRecord(BaseModel):
    """One labeled image-caption pair, exactly as stored on a manifest line."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    id: str = Field(min_length=1)
    label: Literal[0, 1]
    caption: str
    image_path: str
    split: Literal["train", "test"]


class SplitSummary(BaseModel):
    total: int
    label_counts: dict[int, int]
    distractor_label_correlation: Optional[float] = None


class ManifestSummary(BaseModel):
    manifest_path: str
    n_samples: int
    splits: dict[str, SplitSummary]


# --- METRICS ---
class LatencyStats(BaseModel):
    median: float
    p95: float
    samples: list[float]


class MetricsReport(BaseModel):
    tp: int
    fp: int
    tn: int
    fn: int
    precision: Optional[float]
    recall: Optional[float]
    accuracy: float
    latency_median: Optional[float] = None
    latency_p95: Optional[float] = None

    @classmethod
    def from_counts(cls, tp: int, fp: int, tn: int, fn: int) -> "MetricsReport":
        total = tp + fp + tn + fn
        return cls(
            tp=tp,
            fp=fp,
            tn=tn,
            fn=fn,
            precision=tp / (tp + fp) if tp + fp else None,
            recall=tp / (tp + fn) if tp + fn else None,
            accuracy=(tp + tn) / total if total else 0.0,
        )

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn

    @property
    def exact_accuracy(self) -> Fraction:
        return Fraction(self.correct, self.total)

    def with_latency(self, stats: Optional[LatencyStats]) -> "MetricsReport":
        if stats is None:
            return self
        return self.model_copy(update={"latency_median": stats.median, "latency_p95": stats.p95})


# --- TRAINING ---
class TrainHistory(BaseModel):
    regime: str
    loss: list[float] = []
    train_accuracy: list[float] = []


# --- EXPERIMENTS ---
class SeedMetrics(BaseModel):
    seed: int
    tp: int
    fp: int
    tn: int
    fn: int
    precision: Optional[float]
    recall: Optional[float]
    accuracy: float
    latency_median_s: Optional[float]
    latency_p95_s: Optional[float] = None
    test_ids_digest: str = ""

    @classmethod
    def from_report(cls, seed: int, report: MetricsReport, test_ids_digest: str = "") -> "SeedMetrics":
        return cls(
            seed=seed,
            **report.model_dump(include={"tp", "fp", "tn", "fn", "precision", "recall", "accuracy"}),
            latency_median_s=report.latency_median,
            latency_p95_s=report.latency_p95,
            test_ids_digest=test_ids_digest,
        )


class RegimeResult(BaseModel):
    name: str
    seeds: list[SeedMetrics] = []

    def accuracy_for(self, seed: int) -> float:
        return next(s.accuracy for s in self.seeds if s.seed == seed)

    @property
    def median_accuracy(self) -> float:
        return float(median(s.accuracy for s in self.seeds))


class PairedDelta(BaseModel):
    regime: str
    seed: int
    accuracy_delta: float


class ExperimentResult(BaseModel):
    regimes: list[RegimeResult]
    paired_deltas: list[PairedDelta] = []

    def regime(self, name: str) -> RegimeResult:
        for r in self.regimes:
            if r.name == name:
                return r
        raise KeyError(name)
