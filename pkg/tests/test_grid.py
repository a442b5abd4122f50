import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chernoffpde.grid import GridFunction, GridSpec, interp, read_csv, sample, sup_distance, sup_norm

UNIT = GridSpec((0.0,), (1.0,), (3,))


def test_sample_zero():
    gf = sample(lambda X: np.zeros(len(X)), GridSpec.cube(-1, 1, 5, 2))
    assert np.all(gf.values == 0)
    assert gf.extension == "clamp"


def test_sample_linear():
    gf = sample(lambda X: X[:, 0], UNIT)
    assert gf.values.tolist() == [0.0, 0.5, 1.0]


@pytest.mark.parametrize("spec", [GridSpec((-1.3,), (2.7,), (17,)), GridSpec((-2.0, 0.1), (1.0, 3.3), (9, 14)),
                                  GridSpec.cube(-0.7, 0.9, 5, 3)])
def test_interpolation_at_nodes_is_exact(spec):
    f = lambda X: np.sin(3 * X[:, 0]) + np.exp(np.sum(X, axis=1)) / 7
    gf = sample(f, spec)
    pts = spec.points()
    assert np.array_equal(gf(pts), f(pts))


def test_interp_examples():
    gf = sample(lambda X: X[:, 0], GridSpec((0.0,), (1.0,), (2,)))
    assert interp(gf, [0.25]) == 0.25
    assert interp(gf, [2.0]) == 1.0
    assert interp(gf, [-3.0]) == 0.0


def test_bilinear_cell_centre():
    spec = GridSpec((0.0, 0.0), (2.0, 3.0), (3, 4))
    gf = sample(lambda X: X[:, 0] * X[:, 1], spec)
    # cell [1,2] x [1,2]: bilinear value at the centre is the corner average
    corners = [1 * 1, 1 * 2, 2 * 1, 2 * 2]
    assert interp(gf, [1.5, 1.5]) == pytest.approx(sum(corners) / 4, abs=1e-15)


def test_extensions():
    spec = GridSpec((0.0,), (1.0,), (11,))
    f = lambda X: 1 + X[:, 0]
    clamp = sample(f, spec, "clamp")
    zero = sample(f, spec, "zero")
    periodic = sample(f, spec, "periodic")
    assert interp(clamp, [1.5]) == 2.0
    assert interp(zero, [1.5]) == 0.0
    assert interp(zero, [0.5]) == 1.5
    assert interp(periodic, [1.25]) == pytest.approx(1.25, abs=1e-14)
    assert interp(periodic, [-0.25]) == pytest.approx(1.75, abs=1e-14)


def test_sup_norm():
    spec = GridSpec((0.0,), (1.0,), (3,))
    assert sup_norm(GridFunction(spec, [0, 0, 0])) == 0
    gf = GridFunction(spec, [-3, 1, 2])
    assert sup_norm(gf) == 3
    assert sup_norm(gf.with_values(-2.5 * gf.values)) == 2.5 * 3


def test_sup_distance():
    spec = GridSpec((-1.0, -1.0), (1.0, 1.0), (9, 9))
    g = lambda X: np.cos(X[:, 0]) * X[:, 1]
    f = lambda X: X[:, 0] ** 2
    assert sup_distance(sample(g, spec), g) == 0
    shifted = sample(lambda X: g(X) + 0.1, spec)
    assert sup_distance(shifted, g) == pytest.approx(0.1, abs=1e-15)
    assert sup_distance(sample(g, spec), f) == sup_distance(sample(f, spec), g)


def test_values_must_be_finite():
    with pytest.raises(ValueError):
        GridFunction(UNIT, [0, np.nan, 1])


def test_gridspec_validation():
    with pytest.raises(ValueError):
        GridSpec((1.0,), (0.0,), (3,))
    with pytest.raises(ValueError):
        GridSpec((0.0,), (1.0,), (1,))


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 3), st.integers(0, 2**31))
def test_multilinear_exact_on_separately_affine(d, seed):
    rng = np.random.default_rng(seed)
    # f = prod_j (alpha_j + beta_j x_j) is affine in each coordinate
    alpha, beta = rng.normal(size=d), rng.normal(size=d)
    f = lambda X: np.prod(alpha + beta * X, axis=1)
    spec = GridSpec(tuple(rng.uniform(-2, -1, d)), tuple(rng.uniform(1, 2, d)), tuple(rng.integers(2, 7, d)))
    gf = sample(f, spec)
    P = rng.uniform(spec.lo, spec.hi, size=(200, d))
    assert np.allclose(gf(P), f(P), rtol=0, atol=1e-12)


def test_continuity_across_cell_faces():
    spec = GridSpec((-1.0, -1.0), (1.0, 1.0), (5, 5))
    rng = np.random.default_rng(3)
    gf = GridFunction(spec, rng.normal(size=spec.shape))
    face = spec.axes()[0][2]
    y = rng.uniform(-1, 1, 100)
    left = gf(np.column_stack([np.full(100, np.nextafter(face, -np.inf)), y]))
    right = gf(np.column_stack([np.full(100, np.nextafter(face, np.inf)), y]))
    on = gf(np.column_stack([np.full(100, face), y]))
    assert np.max(np.abs(left - on)) < 1e-12
    assert np.max(np.abs(right - on)) < 1e-12


def test_interpolation_error_is_second_order():
    f = lambda X: np.sin(2 * X[:, 0]) * np.cos(X[:, 1])
    # off-node probe points at a fixed fraction of every grid's cells
    errors = []
    for nodes in (11, 21, 41, 81):
        spec = GridSpec.cube(0, 2, nodes, 2)
        h = spec.spacing[0]
        gf = sample(f, spec)
        probe = spec.points()[np.all(spec.indices() < nodes - 1, axis=1)] + h / 3
        errors.append(np.max(np.abs(gf(probe) - f(probe))))
    ratios = [errors[i] / errors[i + 1] for i in range(3)]
    assert all(3 <= r <= 5 for r in ratios), ratios


def test_csv_round_trip(tmp_path):
    spec = GridSpec((-1.0, 0.0), (1.0, 2.0), (3, 4))
    gf = sample(lambda X: np.exp(X[:, 0]) - X[:, 1] / 3, spec, "zero")
    text = gf.to_csv(tmp_path / "g.csv", {"t": 0.5})
    lines = text.splitlines()
    assert lines[0] == "# t=0.5"
    assert lines[2] == "i1,i2,x1,x2,value"
    assert lines[3].startswith("0,0,-1.0,0.0,")
    assert lines[4].startswith("0,1,")  # last index fastest
    back = read_csv(str(tmp_path / "g.csv"))
    assert back.spec == spec
    assert back.extension == "zero"
    assert np.array_equal(back.values, gf.values)


def test_sample_independent_of_threads():
    spec = GridSpec.cube(-3, 3, 101, 2)
    f = lambda X: np.tanh(X[:, 0]) * np.exp(-X[:, 1] ** 2)
    a = sample(f, spec, threads=1)
    b = sample(f, spec, threads=4)
    assert np.array_equal(a.values, b.values)
