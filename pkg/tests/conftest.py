# Single-threaded BLAS: at these tensor sizes OpenBLAS multithreading is a
# slowdown, and the trend fixture parallelizes across seeds instead.
import os

os.environ.setdefault("OMP_NUM_THREADS", "1")
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")

import hashlib
import json
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import pytest

CACHE_ROOT = Path(__file__).parent / "_cache"
SEEDS = (0, 1, 2)


def _protocol_key() -> str:
    """Cache key: training-relevant sources + the protocol constants.

    Any code or protocol change invalidates cached trained models, so the
    cache can never go stale against the implementation under test.
    """
    import controlres
    from controlres.experiment import TrendSetup

    src = Path(controlres.__file__).parent
    h = hashlib.sha256()
    for name in ("tensor.py", "optim.py", "model.py", "degrade.py", "train.py",
                 "checkpoint.py", "experiment.py"):
        h.update((src / name).read_bytes())
    h.update(json.dumps(TrendSetup().to_dict(), sort_keys=True).encode())
    h.update(json.dumps(SEEDS).encode())
    return h.hexdigest()[:16]


@pytest.fixture(scope="session")
def trend_artifacts():
    """Checkpoints of the reference experiment for all seeds (trained once,
    cached on disk keyed by source hash; ~15 min fresh on 2 CPUs)."""
    from controlres.experiment import TrendSetup, run_seed

    setup = TrendSetup()
    root = CACHE_ROOT / _protocol_key()
    manifest = root / "manifest.json"
    if not manifest.exists():
        root.mkdir(parents=True, exist_ok=True)
        ctx = mp.get_context("spawn")
        jobs = {}
        with ProcessPoolExecutor(max_workers=2, mp_context=ctx) as pool:
            for seed in SEEDS:
                jobs[seed] = pool.submit(run_seed, setup, seed,
                                         root / f"seed{seed}", True, seed == SEEDS[0])
            paths = {str(seed): jobs[seed].result() for seed in SEEDS}
        manifest.write_text(json.dumps(paths, indent=2))
    paths = json.loads(manifest.read_text())
    return setup, {int(k): v for k, v in paths.items()}


@pytest.fixture(scope="session")
def trend_reports(trend_artifacts):
    """Held-out-level sweeps for every trained seed: {seed: {name: report}}."""
    from controlres.experiment import sweep_seed

    setup, paths = trend_artifacts
    return setup, {seed: sweep_seed(setup, paths[seed]) for seed in sorted(paths)}
