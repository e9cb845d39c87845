"""Smoke test for the qgraph_py extension.

Build and run from the repository root:
    cargo build -p qgraph-py --release
    python3 python/smoke_test.py
"""
import importlib.util
import math
import os
import shutil
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def load():
    lib = os.path.join(ROOT, "target", "release", "libqgraph_py.so")
    if not os.path.exists(lib):
        sys.exit(f"missing {lib}; run cargo build -p qgraph-py --release")
    tmp = tempfile.mkdtemp()
    dst = os.path.join(tmp, "qgraph_py.so")
    shutil.copy(lib, dst)
    spec = importlib.util.spec_from_file_location("qgraph_py", dst)
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def main():
    q = load()
    eig, excluded = q.spectrum("builtin:k4", 0.5, 40.0)
    assert len(eig) == 7 and excluded == 5, (eig, excluded)
    assert abs(eig[-1] - 4 * math.pi**2) < 1e-8, eig

    c = q.cover("builtin:k4", 3.0, 0.2)
    assert all(z.imag > 0 for z in c["g_diag"]), c["g_diag"]
    assert c["residual"] < 1e-10

    ok, n, failing = q.verify("builtin:k4")
    assert ok and n > 0, failing
    print(f"smoke ok: {len(eig)} eigenvalues, G(3+0.2i)={c['g_diag'][0]:.6f}, {n} checks pass")


if __name__ == "__main__":
    main()
