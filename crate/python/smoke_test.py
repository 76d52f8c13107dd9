"""Builds the extension module and exercises its API.

Run from the repository root:  python3 python/smoke_test.py
"""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(
        ["cargo", "build", "-p", "thpsat-py", "--features", "extension-module"],
        cwd=ROOT,
        check=True,
    )
    target = os.environ.get("CARGO_TARGET_DIR", os.path.join(ROOT, "target"))
    lib = os.path.join(target, "debug", "libthpsat_py.so")
    out = tempfile.mkdtemp(prefix="thpsat-py-")
    shutil.copy(lib, os.path.join(out, "thpsat.so"))
    sys.path.insert(0, out)


def main():
    build()
    import thpsat

    f = thpsat.parse_dimacs("p cnf 3 3\n1 2 0\n-1 2 0\n-2 3 0\n")
    assert (f.num_vars, f.num_clauses) == (3, 3), f
    r = thpsat.solve(f, thp=True)
    assert r["status"] == "sat" and r["exit_code"] == 10, r
    model = set(r["model"])
    for c in f.clauses():
        assert any(l in model for l in c), c
    assert r["stats"]["conflicts"] >= 0

    g = thpsat.Formula(1)
    g.add_clause([1])
    g.add_clause([-1])
    r = thpsat.solve(g, thp=False)
    assert r["status"] == "unsat" and r["model"] is None, r

    try:
        thpsat.parse_dimacs("p cnf 1 1\n5 0\n")
    except ValueError:
        pass
    else:
        raise AssertionError("bad literal accepted")

    assert thpsat.simulate(thpsat.coverage_example_trace(), 64, 4096)[2] > 0
    assert thpsat.pages_touched([0, 100, 4096], 4096) == 2
    assert len(thpsat.gen_chase_trace(1 << 20, 1000, 7)) == 1000

    assert abs(thpsat.saved_runtime_pct(4.58, 3.72) - 18.78) < 0.01
    assert abs(thpsat.tlb_miss_ratio_pct(2.60e11, 6.71e9) - 2.58) < 0.01
    try:
        thpsat.saved_runtime_pct(0.0, 1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("zero baseline accepted")

    cfg = thpsat.load_alloc_config({"THP_ALWAYS": "1"})
    assert cfg["enabled"] and cfg["huge_page_size"] == 2 << 20, cfg
    length, align = thpsat.align_request(3 << 20)
    assert length == 4 << 20 and align == 2 << 20, (length, align)

    c = thpsat.chase(8 << 20, 10000, seed=3, thp=True)
    assert c["advised_bytes"] >= 8 << 20, c

    print("smoke test ok")


if __name__ == "__main__":
    main()
