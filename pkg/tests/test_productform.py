import numpy as np
import pytest

import generators as gen
from srbm.errors import PreconditionError, SingularMatrixError
from srbm.model import SrbmData, TandemSpec, build_tandem, is_stable
from srbm.productform import (
    alpha,
    evaluate_polys,
    lambda_marginal,
    product_form_report,
    skew_matrix_residual,
    skew_symmetry_check,
    theta_ray,
)


def tandem2(beta, cv):
    return build_tandem(TandemSpec(2, beta, cv))


def test_polys_examples():
    data = SrbmData([[2.0]], [-1.0], [[1.0]])
    p0 = evaluate_polys(data, [0.0])
    assert p0.gamma == 0.0 and np.all(p0.gamma_i == 0.0)
    assert evaluate_polys(data, [-1.0]).gamma == -2.0
    with pytest.raises(PreconditionError):
        evaluate_polys(data, [0.0, 0.0])


def test_skew_examples():
    assert skew_symmetry_check(SrbmData(np.diag([1.0, 3.0, 2.0]), [-1, -1, -1], np.eye(3))).is_skew
    assert skew_symmetry_check(tandem2((1, 1.5, 2), (1, 1, 1))).is_skew
    bad = skew_symmetry_check(tandem2((1, 1.5, 2), (1, 2, 1)))
    assert not bad.is_skew and bad.residual > 1.0


def test_skew_zero_diagonal_error():
    with pytest.raises(PreconditionError, match="R\\[2,2\\] = 0"):
        skew_matrix_residual(np.eye(2), [[1.0, 0.0], [0.0, 0.0]])


def test_alpha_examples():
    for beta, cv in (((1, 1.5, 2), (1, 1, 1)), ((1.2, 3, 2), (0.5, 2, 1))):
        b0, b1, b2 = beta
        c0, c1, c2 = cv
        want = [2 * (b1 - b0) / (b0 * (c0**2 + c1**2)), 2 * (b2 - b0) / (b0 * (c1**2 + c2**2))]
        assert np.allclose(alpha(tandem2(beta, cv)), want)
    assert np.allclose(alpha(SrbmData(2 * np.eye(4), -np.ones(4), np.eye(4))), 1.0)
    assert np.allclose(alpha(tandem2((1, 1.5, 2), (1, 1, 1))), [0.5, 1.0])


def test_alpha_singular():
    with pytest.raises(SingularMatrixError):
        alpha(SrbmData(np.eye(2), [-1, -1], np.ones((2, 2))))


def test_ray_examples():
    for s2, m in ((2.0, -1.0), (0.7, -0.3), (3.0, 0.5)):
        ray, _ = theta_ray(SrbmData([[s2]], [m], [[1.0]]), 1)
        assert ray[0] == pytest.approx(-2 * m / s2)
    mu = np.zeros(4)
    mu[0] = -1
    ray, delta = theta_ray(SrbmData(np.eye(4), mu, np.eye(4)), 1)
    assert delta == 2.0 and np.array_equal(ray, [2.0, 0, 0, 0])
    b0, b1, b2 = 1.0, 1.7, 2.3
    c0, c1, c2 = 0.8, 1.3, 1.9
    ray, _ = theta_ray(tandem2((b0, b1, b2), (c0, c1, c2)), 2)
    assert ray[1] == pytest.approx(2 * (b2 - b0) / (b0 * (c0**2 + c2**2)))


def test_lambda_off_skew():
    data = tandem2((1, 1.5, 2), (1, 2, 1))
    assert lambda_marginal(data, 2) == pytest.approx(1.0)
    assert alpha(data)[1] == pytest.approx(0.4)
    assert lambda_marginal(SrbmData([[2.0]], [-3.0], [[1.0]]), 1) == pytest.approx(3.0)


def test_lambda_zero_q_diagonal():
    q = np.array([[0.0, 1.0], [1.0, 1.0]])
    with pytest.raises(PreconditionError, match="lambda_1 is undefined"):
        lambda_marginal(SrbmData(np.eye(2), [-1.0, -1.0], np.linalg.inv(q)), 1)


def test_index_bounds():
    with pytest.raises(Exception):
        theta_ray(SrbmData([[1.0]], [-1.0], [[1.0]]), 2)


def test_ray_property_and_lambda_identity():
    rng = np.random.default_rng(0)
    for n in range(500):
        data = gen.stable_instance(rng, int(rng.integers(1, 6)), general_r=bool(n % 2))
        for i in range(1, data.d + 1):
            ray, delta = theta_ray(data, i)
            poly = evaluate_polys(data, ray)
            scale = np.max(np.abs(data.r)) * np.sum(np.abs(ray))
            assert abs(poly.gamma) <= 1e-10 * (0.5 * abs(ray @ data.sigma @ ray) + abs(data.mu @ ray))
            assert np.all(np.abs(np.delete(poly.gamma_i, i - 1)) <= 1e-10 * scale)
            assert abs(poly.gamma_i[i - 1]) > 1e-6 * scale
            assert delta > 0
            assert lambda_marginal(data, i) == pytest.approx(ray[i - 1], rel=1e-12)


def test_skew_polynomial_identity():
    rng = np.random.default_rng(1)
    for _ in range(50):
        data = gen.skew_instance(rng, int(rng.integers(1, 6)))
        a = alpha(data)
        w = np.diag(data.sigma) / (2 * np.diag(data.r))
        for theta in rng.uniform(-3, 0, (100, data.d)):
            p = evaluate_polys(data, theta)
            assert p.gamma == pytest.approx(np.sum(w * p.gamma_i * (a - theta)), rel=1e-9, abs=1e-9)


def test_report_contents():
    data = tandem2((1, 1.5, 2), (1, 1, 1))
    rep = product_form_report(data)
    assert rep.is_skew and np.allclose(rep.alpha, rep.lam)
    assert np.allclose(rep.rays[:, 1], theta_ray(data, 2)[0])
    d = rep.to_dict()
    assert d["rays"][1] == list(rep.rays[:, 1])
    assert "is_skew" in d["interpretation"]
    assert is_stable(data)


def test_report_records_undefined_lambda():
    q = np.array([[0.0, 1.0, 1.0], [1.0, 1.0, 0.0], [1.0, 0.0, 1.0]])
    rep = product_form_report(SrbmData(np.eye(3), [-1.0, -1.0, -1.0], np.linalg.inv(q)))
    assert np.isnan(rep.lam[0]) and rep.to_dict()["lambda"][0] is None
    assert any("undefined" in n for n in rep.notes)
