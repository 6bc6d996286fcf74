"""Smoke test of the Python bindings.

Build the extension and run this script:

    cargo build -p ppscore-py --features extension-module
    python3 python/smoke_test.py

The script looks for the compiled library under target/debug (or the
directory in PPSCORE_LIB_DIR) and loads it as the module `ppscore`.
"""

import importlib.machinery
import importlib.util
import json
import math
import os
import pathlib
import sys
import tempfile

ROOT = pathlib.Path(__file__).resolve().parent.parent


def load_extension():
    lib_dir = pathlib.Path(os.environ.get("PPSCORE_LIB_DIR", ROOT / "target" / "debug"))
    for name in ("libppscore_py.so", "libppscore_py.dylib", "ppscore_py.dll"):
        path = lib_dir / name
        if path.exists():
            loader = importlib.machinery.ExtensionFileLoader("ppscore", str(path))
            spec = importlib.util.spec_from_file_location("ppscore", path, loader=loader)
            module = importlib.util.module_from_spec(spec)
            loader.exec_module(module)
            sys.modules["ppscore"] = module
            return module
    sys.exit(f"no compiled ppscore_py library in {lib_dir}; build it with cargo first")


def main():
    pp = load_extension()
    w = pp.Window.square(10)
    truth = pp.Model.hom_poisson(0.5)
    other = pp.Model.hom_poisson(0.6)
    obs = truth.simulate(w, n=20, seed=42)
    assert len(obs) == 20 and all(len(o) > 0 for o in obs)

    log_truth = [pp.log_score(y, truth) for y in obs]
    log_other = [pp.log_score(y, other) for y in obs]
    test = pp.permutation_test(log_truth, log_other, n_perm=199, seed=1)
    print(f"log score: truth {sum(log_truth) / 20:.3f}, other {sum(log_other) / 20:.3f}, p = {test['p_value']:.3f}")

    k = pp.k_function_score(obs, truth, 2.5, n_r=16, n=20, seed=5)
    assert all(math.isfinite(v) for v in k)
    print(f"mean K score of the truth: {sum(k) / len(k):.4f}")

    thomas = pp.Model.from_json(json.dumps({
        "kind": "cluster",
        "parent": {"kind": "constant", "value": 0.25},
        "offspring_mean": 2.0,
        "kernel": {"type": "thomas", "sigma": 0.5},
    }))
    train = thomas.simulate(w, n=20, seed=9)
    fit = pp.fit_family("thomas", train, r_max=2.5)
    print(f"thomas fit: {fit['theta']}, converged {fit['fit']['converged']}")

    cfg = pp.preset_config("study1")
    cfg = cfg.replace("observations = 30", "observations = 3").replace("draws = 50", "draws = 4")
    with tempfile.TemporaryDirectory() as out:
        result = pp.run_experiment(cfg, out)
        names = sorted(pathlib.Path(f).name for f in result["files"])
        print("study1 tables:", ", ".join(names))
        assert "study1_matrix.csv" in names
    print("smoke test passed")


if __name__ == "__main__":
    main()
