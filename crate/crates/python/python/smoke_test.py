"""Quick end-to-end check of the pycanosys extension module."""

import math
from pathlib import Path

import pycanosys as cs

PROBLEMS = Path(__file__).resolve().parents[3] / "problems"


def close(a, b, tol):
    return abs(a - b) <= tol * max(1.0, abs(b))


def main():
    frame = cs.LagrangianFrame.preset("dirichlet", 2)
    ortho, iso = frame.defects()
    assert ortho < 1e-12 and iso < 1e-12
    assert len(frame.kernel_basis()) == 4

    try:
        cs.LagrangianFrame([[1, 1]])
    except cs.ConfigError as e:
        assert "orthonormal" in str(e)
    else:
        raise AssertionError("non-orthonormal frame accepted")

    lap = cs.Problem.sturm_liouville(0.0, math.pi)
    eig = lap.eigenvalues(0.5, 26.0)
    assert len(eig) == 5 and all(close(l, k * k, 1e-6) for l, k in zip(eig, range(1, 6))), eig
    xs, ys = lap.eigenfunction(1.0)
    assert len(xs) == len(ys) and len(ys[0]) == 2

    t = lap.transfer_matrix(-0.5)
    det = t[0][0] * t[1][1] - t[0][1] * t[1][0]
    assert abs(det - 1) < 1e-8

    file_problem = cs.Problem.load(str(PROBLEMS / "laplacian.toml"))
    assert file_problem.bounded and file_problem.d == 1

    well = cs.Problem.poschl_teller_line(2)
    zeros = well.evans_zeros(-5.0, -0.5)
    assert len(zeros) == 2 and close(zeros[0], -4.0, 1e-3) and close(zeros[1], -1.0, 1e-3), zeros
    bands = well.essential_spectrum(-5.0, 5.0)
    assert len(bands) == 1 and abs(bands[0][0]) < 1e-8 and bands[0][1] == math.inf, bands
    report = well.count_zeros(-1.5, -0.5, -0.5, 0.5)
    assert report.count == 1

    nls = cs.Problem.nls_soliton()
    modes = nls.zero_mode_residuals()
    assert modes["translation"] < 1e-6 and modes["phase"] < 1e-6, modes
    assert nls.matched_nullity(0.0) == 2

    print("pycanosys smoke test passed")


if __name__ == "__main__":
    main()
