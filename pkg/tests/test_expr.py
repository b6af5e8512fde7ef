import numpy as np
import pytest

from occurelax.expr import (
    Abs,
    Add,
    BoxIndicator,
    Const,
    Div,
    DomainGuardViolation,
    MissingBlock,
    Mul,
    Norm,
    Pow,
    Sqrt,
    Sub,
    Var,
    evaluate,
    free_blocks,
    grad_fd,
    probe_shape,
)

Y1 = Var("y", (0,))
Y2 = Var("y", (1,))
Z11 = Var("z", (0, 0))
Z21 = Var("z", (1, 0))


def example_42_lagrangian():
    # y1*y2 + z11^2 + z21^2
    return Add(Mul(Y1, Y2), Add(Pow(Z11, 2), Pow(Z21, 2)))


def test_eval_example_42_point():
    e = example_42_lagrangian()
    val = evaluate(e, {"y": np.array([1.0, 1.0]), "z": np.zeros((2, 1))})
    assert val == 1.0


def test_eval_zero_expression():
    assert evaluate(Const(0.0), {"y": np.array([3.0])}) == 0.0


def test_eval_envelope_43_closed_form():
    # |z1 + z2| - 1 at z = (1, -1)
    e = Sub(Abs(Add(Z11, Z21)), Const(1.0))
    val = evaluate(e, {"z": np.array([[1.0], [-1.0]])})
    assert val == -1.0


def test_eval_batched_matches_scalar():
    e = example_42_lagrangian()
    ys = np.array([[1.0, 1.0], [0.5, -2.0], [0.0, 0.0]])
    zs = np.zeros((3, 2, 1))
    zs[1, 0, 0] = 2.0
    batch = evaluate(e, {"y": ys, "z": zs})
    singles = [evaluate(e, {"y": ys[i], "z": zs[i]}) for i in range(3)]
    assert np.allclose(batch, singles)


def test_eval_deterministic():
    e = example_42_lagrangian()
    pt = {"y": np.array([0.3, -0.7]), "z": np.array([[0.11], [0.42]])}
    a = evaluate(e, pt)
    b = evaluate(e, pt)
    assert a == b  # bit-for-bit


def test_missing_block():
    with pytest.raises(MissingBlock):
        evaluate(Y1, {"x": np.array([0.0])})


def test_division_guard():
    e = Div(Const(1.0), Y1)
    assert evaluate(e, {"y": np.array([2.0])}) == 0.5
    with pytest.raises(DomainGuardViolation):
        evaluate(e, {"y": np.array([0.0])})


def test_sqrt_guard():
    e = Sqrt(Y1)
    assert evaluate(e, {"y": np.array([4.0])}) == 2.0
    with pytest.raises(DomainGuardViolation):
        evaluate(e, {"y": np.array([-1.0])})


def test_indicator_boundary_inside():
    e = BoxIndicator("O", "x", (0.0, 0.0), (1.0, 1.0))
    assert evaluate(e, {"x": np.array([1.0, 0.0])}) == 1.0
    assert evaluate(e, {"x": np.array([1.0, 1.5])}) == 0.0


def test_norm_node():
    e = Norm((Z11, Z21))
    assert evaluate(e, {"z": np.array([[3.0], [4.0]])}) == 5.0


def test_free_blocks():
    assert free_blocks(example_42_lagrangian()) == {"y", "z"}


def test_grad_square():
    e = Pow(Y1, 2)
    g = grad_fd(e, {"y": np.array([3.0])}, "y")
    assert abs(g[0] - 6.0) < 1e-6


def test_grad_constant_is_zero():
    g = grad_fd(Const(7.0), {"y": np.array([1.0, 2.0])}, "y")
    assert np.all(g == 0.0)


def test_grad_product_matches_hand_gradient():
    e = Mul(Y1, Y2)
    g = grad_fd(e, {"y": np.array([2.0, 5.0])}, "y")
    assert np.allclose(g, [5.0, 2.0], atol=1e-6)


def test_grad_z_block_shape():
    e = Add(Pow(Z11, 2), Pow(Z21, 2))
    g = grad_fd(e, {"z": np.array([[1.0], [2.0]])}, "z")
    assert g.shape == (2, 1)
    assert np.allclose(g, [[2.0], [4.0]], atol=1e-6)


def test_grad_affine_is_constant_across_points():
    e = Add(Sub(Y1, Mul(Const(2.0), Y2)), Const(1.0))
    rng = np.random.default_rng(5)
    grads = [grad_fd(e, {"y": rng.uniform(-3, 3, 2)}, "y") for _ in range(10)]
    for g in grads:
        assert np.allclose(g, grads[0], atol=1e-8)


def test_probe_quadratic_convex():
    e = Add(Pow(Z11, 2), Pow(Z21, 2))
    box = {"z": (np.zeros((2, 1)) - 1.0, np.zeros((2, 1)) + 1.0)}
    assert probe_shape(e, box, samples=64, seed=1).kind == "convex-likely"


def test_probe_affine():
    e = Add(Sub(Y1, Neg := Mul(Const(-2.0), Y2)), Const(-1.0))
    box = {"y": (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))}
    assert probe_shape(e, box, samples=64, seed=1).kind == "affine"


def test_probe_nonconvex_with_sound_witness():
    e = Mul(Y1, Y2)
    box = {"y": (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))}
    verdict = probe_shape(e, box, samples=64, seed=3)
    assert verdict.kind == "nonconvex"
    p, q, violation = verdict.witness
    mid = {"y": 0.5 * (p["y"] + q["y"])}
    fm = evaluate(e, mid)
    avg = 0.5 * (evaluate(e, p) + evaluate(e, q))
    assert fm - avg > 1e-8  # witness re-checks as a strict violation
    assert abs((fm - avg) - violation) < 1e-12


def test_probe_deterministic():
    e = Mul(Y1, Y2)
    box = {"y": (np.array([-1.0, -1.0]), np.array([1.0, 1.0]))}
    v1 = probe_shape(e, box, samples=32, seed=11)
    v2 = probe_shape(e, box, samples=32, seed=11)
    assert v1.kind == v2.kind
    assert np.array_equal(v1.witness[0]["y"], v2.witness[0]["y"])
