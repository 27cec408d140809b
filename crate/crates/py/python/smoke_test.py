"""Smoke test for the defectlab extension module; run after
`pip install -e crates/py --no-build-isolation`."""

import math

import defectlab


def test_figure1_atoms():
    f = defectlab.Field.figure1(513)
    masses = sorted(round(m) for _, _, m in f.atoms())
    assert masses == [-1, -1, -1, -1, 1, 1, 2]
    nx, ny = f.nodes
    assert f.box_mass(0, 0, nx - 1, ny - 1) == f.total_mass()


def test_tensor_sum_has_no_defect():
    n = 33
    values = [float(i > 10) + 2.0 * float(j > 20) for j in range(n) for i in range(n)]
    f = defectlab.Field.from_values(values, n)
    assert f.total_variation() == 0.0
    assert f.atoms() == []


def test_roof():
    f = defectlab.Field.roof(129)
    assert f.total_mass() == 2.0
    assert f.layer_cake_error(1024) < 1e-3
    assert f.energy(0.2) > 0.0


def test_counterexample():
    q = defectlab.limit_fraction()
    assert abs(q - (2.0 / 3.0 - math.sqrt(3.0) / (2.0 * math.pi))) < 1e-6
    rows = defectlab.counterexample_fractions(4.0, 6)
    k, _, v1, v2 = rows[-1]
    assert abs((v2 if k % 2 == 0 else v1) - q) < 0.05 * q
    assert defectlab.counterexample_residual() == 0.0


def test_errors_are_value_errors():
    try:
        defectlab.Field.from_values([0.0] * 5, 3)
    except ValueError:
        pass
    else:
        raise AssertionError("size mismatch accepted")
    assert len(defectlab.families()) >= 10


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print("ok", name)
