"""Random instance generators shared by the property and acceptance tests."""

import numpy as np

from srbm.model import SrbmData, TandemSpec, spd_check


def m_matrix(rng, d):
    """Strictly row-diagonally-dominant with nonpositive off-diagonal entries."""
    n = rng.uniform(0.0, 1.0, (d, d)) * (rng.random((d, d)) < 0.6)
    np.fill_diagonal(n, 0.0)
    diag = n.sum(axis=1) + rng.uniform(0.2, 1.5, d)
    return np.diag(diag) - n


def spd(rng, d):
    a = rng.normal(size=(d, d))
    return a @ a.T + 0.5 * np.eye(d)


def stable_drift(rng, r):
    # R (-u) has R^-1 mu = -u < 0
    return r @ -rng.uniform(0.2, 2.0, r.shape[0])


def stable_instance(rng, d, general_r=False):
    if general_r:
        while True:
            r = rng.normal(size=(d, d)) + 2.0 * np.eye(d)
            if np.linalg.cond(r) < 1e4:
                break
    else:
        r = m_matrix(rng, d)
    return SrbmData(spd(rng, d), stable_drift(rng, r), r)


def skew_sigma(r, s):
    """Sigma with diagonal ``s`` satisfying the skew-symmetry condition for ``r``."""
    m = r * (s / np.diag(r))[None, :]
    return 0.5 * (m + m.T)


def skew_instance(rng, d):
    while True:
        r = m_matrix(rng, d)
        sigma = skew_sigma(r, rng.uniform(0.5, 2.0, d))
        if spd_check(sigma)[0]:
            return SrbmData(sigma, stable_drift(rng, r), r)


def feedforward_decomposable(rng, d, k):
    """Random instance with R[K,L] = 0 and both decomposability conditions holding; K = {1..k}."""
    while True:
        r = np.zeros((d, d))
        r[:k, :k] = m_matrix(rng, k)
        r[k:, k:] = m_matrix(rng, d - k)
        r[k:, :k] = -rng.uniform(0.0, 1.0, (d - k, k))
        s = rng.uniform(0.5, 2.0, k)
        sigma = np.zeros((d, d))
        sigma[:k, :k] = skew_sigma(r[:k, :k], s)
        if not spd_check(sigma[:k, :k])[0]:
            continue
        sigma[k:, :k] = 0.5 * r[k:, :k] * (s / np.diag(r[:k, :k]))[None, :]
        sigma[:k, k:] = sigma[k:, :k].T
        schur = sigma[k:, :k] @ np.linalg.solve(sigma[:k, :k], sigma[:k, k:])
        sigma[k:, k:] = schur + spd(rng, d - k)
        sigma = 0.5 * (sigma + sigma.T)
        if spd_check(sigma)[0]:
            return SrbmData(sigma, stable_drift(rng, r), r)


CV_LEVELS = (0.5, 1.0, 1.5, 2.0)


def tandem_spec(rng, d):
    """Stable tandem; cv entries repeat often so both verdicts occur."""
    beta = (1.0,) + tuple(1.0 + rng.uniform(0.1, 2.0, d))
    cv = [float(rng.choice(CV_LEVELS))]
    for _ in range(d):
        cv.append(cv[-1] if rng.random() < 0.6 else float(rng.choice(CV_LEVELS)))
    return TandemSpec(d, beta, tuple(cv))
