"""Baseline vs. guided comparison over several seeds.

Per seed: generate a dataset into ``<out>/seed_<n>/data``, train every regime from the
same initial weights on the same train split, then evaluate each one through the
image-only inference path on the same test split and time single-sample inference.
"""
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Union

import orjson

from guidenet.core.errors import ContractError
from guidenet.core.logging import get_logger
from guidenet.models.config import ComparisonConfig, ForwardMode, ModelConfig, Regime
from guidenet.models.records import ExperimentResult, PairedDelta, RegimeResult, SeedMetrics
from guidenet.services.checkpoint import save_checkpoint
from guidenet.services.data_generator import generate_dataset
from guidenet.services.dataset import MANIFEST_NAME, load_split, load_vocab
from guidenet.services.evaluator import evaluate
from guidenet.services.latency import bench_latency
from guidenet.services.trainer import build_model, train
from guidenet.services.zero_shot import zero_shot_evaluate

logger = get_logger(__name__)

ZERO_SHOT = "zero_shot"


def plan_comparison(config: ComparisonConfig, out_dir: Union[str, Path]) -> list[dict]:
    out_dir = Path(out_dir)
    names = [r.value for r in config.regimes] + ([ZERO_SHOT] if config.zero_shot else [])
    return [{"seed": seed, "regimes": names, "dir": str(out_dir / f"seed_{seed}")} for seed in config.seeds]


def run_seed(seed: int, config: ComparisonConfig, model_config: ModelConfig, out_dir: Union[str, Path]) -> dict[str, SeedMetrics]:
    seed_dir = Path(out_dir) / f"seed_{seed}"
    data_dir = seed_dir / "data"
    generate_dataset(config.generator.model_copy(update={"seed": seed}), data_dir)

    vocab = load_vocab(data_dir).check_fits(model_config.vocab_size)
    manifest = data_dir / MANIFEST_NAME
    train_data = load_split(manifest, "train", model_config.max_seq_len, vocab)
    test_data = load_split(manifest, "test", model_config.max_seq_len, vocab)
    bench_image = test_data.image(0)

    results: dict[str, SeedMetrics] = {}
    guided_models = {}
    for regime in config.regimes:
        train_config = config.train.model_copy(update={"seed": seed, "regime": regime})
        model, history = train(build_model(model_config, seed), train_data, train_config)
        save_checkpoint(model, seed_dir / f"{regime.value}.gnet")
        (seed_dir / f"{regime.value}.history.json").write_bytes(orjson.dumps(history.model_dump(), option=orjson.OPT_INDENT_2))

        report = evaluate(model, test_data, ForwardMode.INFERENCE, audit=regime.guided)
        latency = bench_latency(model, ForwardMode.INFERENCE, bench_image, config.bench_warmup, config.bench_runs)
        results[regime.value] = SeedMetrics.from_report(seed, report.with_latency(latency), test_data.digest)
        if regime.guided:
            guided_models[regime] = model

    if config.zero_shot:
        encoder = guided_models.get(Regime.GUIDED_UNFROZEN) or guided_models[Regime.GUIDED_FROZEN]
        report = zero_shot_evaluate(encoder, test_data, vocab)
        results[ZERO_SHOT] = SeedMetrics.from_report(seed, report, test_data.digest)

    logger.info(
        "seed %d: %s", seed, ", ".join(f"{name} {m.accuracy:.4f}" for name, m in results.items())
    )
    return results


def collect(config: ComparisonConfig, per_seed: list[dict[str, SeedMetrics]]) -> ExperimentResult:
    names = [r.value for r in config.regimes] + ([ZERO_SHOT] if config.zero_shot else [])
    regimes = [RegimeResult(name=name, seeds=[seed_results[name] for seed_results in per_seed]) for name in names]

    for seed_results in per_seed:
        digests = {m.test_ids_digest for m in seed_results.values()}
        if len(digests) != 1:
            raise ContractError(f"regimes of seed {next(iter(seed_results.values())).seed} saw different test splits")

    baseline = next(r for r in regimes if r.name == Regime.BASELINE.value)
    deltas = [
        PairedDelta(regime=r.name, seed=seed, accuracy_delta=r.accuracy_for(seed) - baseline.accuracy_for(seed))
        for r in regimes
        if r.name not in (Regime.BASELINE.value, ZERO_SHOT)
        for seed in config.seeds
    ]
    return ExperimentResult(regimes=regimes, paired_deltas=deltas)


def run_comparison(config: ComparisonConfig, model_config: ModelConfig, out_dir: Union[str, Path]) -> ExperimentResult:
    out_dir = Path(out_dir)
    if config.workers > 1 and len(config.seeds) > 1:
        # seeds are independent; each worker writes only under its own seed_<n>/ folder
        with ProcessPoolExecutor(max_workers=min(config.workers, len(config.seeds))) as pool:
            futures = [pool.submit(run_seed, seed, config, model_config, out_dir) for seed in config.seeds]
            per_seed = [f.result() for f in futures]
    else:
        per_seed = [run_seed(seed, config, model_config, out_dir) for seed in config.seeds]
    return collect(config, per_seed)
