"""Shared fixtures for the test suite.

The trained priors and the benchmark runs are the expensive pieces (tens of
seconds each), so they are built once per session from the frozen recipe in
``fixture_recipe.py`` — the same recipe ``scripts/freeze_fixtures.py`` used
to record the committed thresholds.  Each heavy fixture also reports how long
it took, so the acceptance tests can charge that cost against their runtime
budgets honestly.
"""

from __future__ import annotations

import json
import time
from pathlib import Path

import pytest

import fixture_recipe as recipe
from latent_awaken.pipeline import PipelineVariant, animate
from latent_awaken.proxy import SyntheticProvider

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def sched():
    return recipe.schedule()


@pytest.fixture(scope="session")
def motion_model():
    """(moving-blob prior, training wall seconds)."""
    return recipe.train_motion_model()


@pytest.fixture(scope="session")
def static_model():
    """(static-blob prior, training wall seconds)."""
    return recipe.train_static_model()


@pytest.fixture(scope="session")
def thresholds():
    return json.loads((FIXTURES / "acceptance_thresholds.json").read_text())


@pytest.fixture(scope="session")
def held_out_runs(motion_model, static_model, sched):
    """VS (motion prior) and Baseline (static prior) outputs per held-out item.

    Reproduces the freeze-script recipe exactly: item i runs with seed
    HELD_OUT_RUN_SEED + i under the full refinement/fusion settings.
    """
    m_model, m_secs = motion_model
    s_model, s_secs = static_model
    held_out = recipe.held_out_set()
    provider = SyntheticProvider(recipe.PROXY_PARAMS)
    t0 = time.perf_counter()
    vs_outputs, base_outputs = [], []
    for i, sample in enumerate(held_out.samples):
        seed = recipe.HELD_OUT_RUN_SEED + i
        run_vs = animate(
            sample.cond.image, sample.cond, PipelineVariant.VS, m_model, sched,
            recipe.VSDS_CFG, recipe.FUSION_CFG, provider, seed=seed,
        )
        run_base = animate(
            sample.cond.image, sample.cond, PipelineVariant.BASELINE, s_model, sched,
            seed=seed,
        )
        vs_outputs.append(run_vs.output)
        base_outputs.append(run_base.output)
    return {
        "held_out": held_out,
        "vs": vs_outputs,
        "baseline": base_outputs,
        "run_seconds": time.perf_counter() - t0,
        "train_seconds": m_secs + s_secs,
    }


@pytest.fixture(scope="session")
def bench_runs(motion_model, sched):
    """Baseline/VU/VS outputs over the 50-item benchmark, motion prior only.

    All variants of item i share seed BENCH_RUN_SEED + i, so they see the
    same noise streams and differ only in pipeline structure.
    """
    model, train_secs = motion_model
    bench = recipe.motion_benchmark()
    provider = SyntheticProvider(recipe.PROXY_PARAMS)
    variants = (PipelineVariant.BASELINE, PipelineVariant.VU, PipelineVariant.VS)
    t0 = time.perf_counter()
    outputs = {v: [] for v in variants}
    for i, sample in enumerate(bench.samples):
        for variant in variants:
            run = animate(
                sample.cond.image, sample.cond, variant, model, sched,
                recipe.VSDS_CFG, recipe.FUSION_CFG, provider,
                seed=recipe.BENCH_RUN_SEED + i,
            )
            outputs[variant].append(run.output)
    return {
        "bench": bench,
        "outputs": outputs,
        "run_seconds": time.perf_counter() - t0,
        "train_seconds": train_secs,
    }
