"""Smoke test for the peakpower_py extension.

Build first:
    cargo build --release -p peakpower-py --features extension-module
then run `python3 python/smoke_test.py` from the repository root. The
script imports an installed `peakpower_py` if there is one, otherwise it
loads the freshly built shared library from target/release.
"""

import importlib.machinery
import importlib.util
import json
import math
import sys
from pathlib import Path


def load():
    try:
        import peakpower_py

        return peakpower_py
    except ImportError:
        pass
    root = Path(__file__).resolve().parent.parent
    for name in ("libpeakpower_py.so", "libpeakpower_py.dylib", "peakpower_py.dll"):
        lib = root / "target" / "release" / name
        if lib.exists():
            loader = importlib.machinery.ExtensionFileLoader("peakpower_py", str(lib))
            spec = importlib.util.spec_from_file_location("peakpower_py", lib, loader=loader)
            mod = importlib.util.module_from_spec(spec)
            loader.exec_module(mod)
            return mod
    sys.exit("peakpower_py not found; build it with --features extension-module")


def main():
    pp = load()

    cov = pp.CovarianceModel.from_smoothing_kernel(5.0)
    assert abs(cov.kappa - 1.0) < 1e-12, cov
    mean = pp.MeanModel.gaussian_bump(3.0, 7.0, [0.0, 0.0])

    # 1D Rice rate per unit length
    c1 = pp.CovarianceModel.from_kernel_bandwidth(1.0)
    flat = pp.MeanModel.constant(0.0, [0.0])
    total, _ = pp.expected_peaks(c1, flat, 0.5, float("-inf"))
    rice = math.sqrt(6 * c1.rho_double_prime / -c1.rho_prime) / (2 * math.pi)
    assert abs(total - rice) < 1e-6, (total, rice)

    curve = pp.power_curve(cov, mean, 10.0, [0.0, 1.0, 2.0, 3.0, 4.0])
    e = curve["e_mu"]
    assert all(b <= a for a, b in zip(e, e[1:])), e
    assert all(0.0 <= a <= 1.0 for a in curve["e_mu_adj"])

    assert abs(pp.h(2, 0.0, 1.0) - 0.10355) < 1e-5
    u = pp.threshold_for_alpha(pp.CovarianceModel.from_smoothing_kernel(2.0), 3, 0.01)
    assert 3.2 <= u <= 3.7, u

    est, se = pp.mc_h(0.0, 1.0, 2, 200_000, 1)
    assert abs(est - pp.h(2, 0.0, 1.0)) < 4 * se

    try:
        pp.CovarianceModel(0.1, 0.1)
    except ValueError:
        pass
    else:
        raise AssertionError("positive rho_prime accepted")

    cfg = {
        "grid": {"dims": [30, 30]},
        "kernel_sd": 2.0,
        "mean": json.loads(pp.MeanModel.gaussian_bump(2.0, 4.0, [15.0, 15.0]).to_json()),
        "domain_radius": 8.0,
        "B": 50,
        "seed": 3,
        "u_grid": [1.0, 2.0],
    }
    csv = pp.simulate(json.dumps(cfg), 2)
    assert csv == pp.simulate(json.dumps(cfg), 1)
    print(csv.splitlines()[0])
    print("smoke test passed")


if __name__ == "__main__":
    main()
