import numpy as np
import pytest

import generators as gen
from srbm.decomposition import (
    NECESSARY_ONLY,
    SUFFICIENT,
    check_decomposability,
    check_feedforward,
    condition3_matrix,
    find_decompositions,
    tandem_decomposability,
    tandem_report,
)
from srbm.errors import PreconditionError
from srbm.model import Partition, SrbmData, TandemSpec, build_tandem
from srbm.reduction import reduce_feedforward

BETA3 = (1, 1.5, 2, 2.5)


def tandem(cv, beta=None):
    d = len(cv) - 1
    return build_tandem(TandemSpec(d, beta or tuple(1 + 0.5 * i for i in range(d + 1)), cv))


def test_feedforward_examples():
    data = tandem((1, 1, 1, 1))
    assert check_feedforward(data, Partition.from_k([1], 3))
    assert not check_feedforward(data, Partition.from_k([2], 3))
    eye = SrbmData(np.eye(3), -np.ones(3), np.eye(3))
    for k in ([1], [2], [3], [1, 3], [2, 3]):
        assert check_feedforward(eye, Partition.from_k(k, 3))


def test_feedforward_uses_exact_zero():
    r = np.array([[1.0, 1e-300], [-1.0, 1.0]])
    assert not check_feedforward(SrbmData(np.eye(2), [-1.0, -1.0], r), Partition.from_k([1], 2))


def test_decomposability_examples():
    assert check_decomposability(tandem((1, 1, 2, 3), BETA3), Partition.from_k([1], 3)).decomposable
    assert not check_decomposability(tandem((1, 2, 1)), Partition.from_k([1], 2)).decomposable


def test_block_diagonal_skew_residuals_zero():
    rng = np.random.default_rng(0)
    r = np.zeros((4, 4))
    r[:2, :2] = gen.m_matrix(rng, 2)
    r[2:, 2:] = gen.m_matrix(rng, 2)
    sigma = np.zeros((4, 4))
    sigma[:2, :2] = gen.skew_sigma(r[:2, :2], np.array([1.0, 1.5]))
    sigma[2:, 2:] = gen.spd(rng, 2)
    data = SrbmData(sigma, gen.stable_drift(rng, r), r)
    rep = check_decomposability(data, Partition.from_k([1, 2], 4))
    assert rep.cond1_residual < 1e-14 and rep.cond2_residual == 0.0
    assert rep.decomposable


def test_not_feedforward_error_names_entry():
    with pytest.raises(PreconditionError, match=r"R\[2,1\]"):
        check_decomposability(tandem((1, 1, 1, 1)), Partition.from_k([2], 3))


def test_partition_dimension_mismatch():
    with pytest.raises(PreconditionError):
        check_decomposability(tandem((1, 1, 1)), Partition.from_k([1], 3))


def test_singleton_k_cond1_is_roundoff():
    rng = np.random.default_rng(1)
    for _ in range(100):
        d = int(rng.integers(2, 6))
        r = gen.m_matrix(rng, d)
        r[0, 1:] = 0.0
        data = SrbmData(gen.spd(rng, d), gen.stable_drift(rng, r), r)
        rep = check_decomposability(data, Partition.from_k([1], d))
        assert rep.cond1_residual <= 1e-14 * np.linalg.norm(data.sigma)


def test_report_invariant_and_sigma_tilde():
    rng = np.random.default_rng(2)
    for _ in range(300):
        d = int(rng.integers(2, 6))
        k = int(rng.integers(1, d))
        data = gen.feedforward_decomposable(rng, d, k)
        part = Partition.from_k(range(1, k + 1), d)
        rep = check_decomposability(data, part)
        assert rep.decomposable
        assert rep.feedforward and rep.l_block_stable
        sig_l = reduce_feedforward(data, part).sigma_u
        assert np.max(np.abs(sig_l - data.sigma[k:, k:])) < 1e-10 * np.max(np.abs(data.sigma))


def test_cond2_violation_detected():
    rng = np.random.default_rng(3)
    data = gen.feedforward_decomposable(rng, 3, 1)
    sigma = data.sigma.copy()
    sigma[1, 0] += 0.05
    sigma[0, 1] += 0.05
    bad = SrbmData(sigma, data.mu, data.r)
    rep = check_decomposability(bad, Partition.from_k([1], 3))
    assert rep.cond2_residual > 0.05 and not rep.decomposable
    assert np.linalg.norm(condition3_matrix(bad, Partition.from_k([1], 3))) > 1e-3


def test_stationarity_certainty():
    # tandem: R[L,L] is an M-matrix
    rep = check_decomposability(tandem((1, 1, 2, 3), BETA3), Partition.from_k([1], 3))
    assert rep.stationarity_certainty == SUFFICIENT
    # R[L,L] of size 3, completely-S but not P
    r = np.eye(4)
    r[1:, 1:] = [[1.0, 0.0, 2.0], [2.0, 1.0, 0.0], [0.0, 2.0, 1.0]]
    r[1:, 0] = -0.1
    mu = r @ -np.ones(4)
    sigma = np.diag([2.0, 1.0, 1.0, 1.0])
    sigma[1:, 0] = sigma[0, 1:] = 0.5 * -0.1 * 2.0
    rep = check_decomposability(SrbmData(sigma, mu, r), Partition.from_k([1], 4))
    assert rep.l_block_stable and rep.stationarity_certainty == NECESSARY_ONLY
    assert any("necessary" in n for n in rep.notes)


def test_unstable_not_decomposable():
    data = build_tandem(TandemSpec(2, (2.0, 1.0, 3.0), (1, 1, 1)))
    rep = check_decomposability(data, Partition.from_k([1], 2))
    assert rep.cond1_residual == 0 and rep.cond2_residual < 1e-15
    assert not rep.stable and not rep.decomposable


def test_find_decompositions_examples():
    reps = find_decompositions(tandem((1, 1, 1, 5)))
    parts = [str(r.partition) for r in reps]
    assert parts == ["1,2/3", "1/2,3"]
    eye = SrbmData(np.diag([1.0, 2.0, 3.0]), -np.ones(3), np.eye(3))
    assert len(find_decompositions(eye)) == 6
    assert find_decompositions(tandem((1, 2, 1))) == []


def test_find_decompositions_include_all():
    reps = find_decompositions(tandem((1, 2, 1)), include_all=True)
    assert [str(r.partition) for r in reps] == ["1/2"]
    assert not reps[0].decomposable


def test_find_decompositions_size_cap():
    with pytest.raises(PreconditionError):
        find_decompositions(SrbmData(np.eye(21), -np.ones(21), np.eye(21)))


def test_tandem_cv_rule_examples():
    spec = TandemSpec(3, BETA3, (1, 1, 2, 3))
    assert tandem_decomposability(spec, 1)
    assert not tandem_decomposability(spec, 2)
    flat = TandemSpec(4, (1, 2, 3, 4, 5), (1.3,) * 5)
    assert all(tandem_decomposability(flat, k) for k in range(1, 4))
    with pytest.raises(PreconditionError):
        tandem_decomposability(spec, 3)


def test_tandem_report_matches_cv_rule():
    rng = np.random.default_rng(4)
    for _ in range(200):
        spec = gen.tandem_spec(rng, int(rng.integers(2, 6)))
        for k in range(1, spec.d):
            assert tandem_report(spec, k).decomposable == tandem_decomposability(spec, k)


def test_report_to_dict():
    d = check_decomposability(tandem((1, 1, 2)), Partition.from_k([1], 2)).to_dict()
    assert d["partition"] == {"k": [1], "l": [2]}
    assert d["decomposable"] is True
