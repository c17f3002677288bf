import math

import numpy as np
import pytest

from smh.experiments import StudyKernel, rho_study, scaling_study
from smh.kernels import KernelConfig
from smh.models import LogisticRegression
from smh.proposals import PCN, ScaledRW

GRID = [128, 256, 512, 1024]


def small_study(threads=1, seed=0):
    ks = [KernelConfig("mh", 2, math.inf, 600, 100),
          KernelConfig("smh", 2, math.inf, 600, 100),
          StudyKernel(KernelConfig("fmh_naive", 1, math.inf, 600, 100), ScaledRW(0.1))]
    return scaling_study(LogisticRegression(), ks, GRID, repetitions=2, seed=seed, d=3,
                         threads=threads)


def test_scaling_study_structure():
    res = small_study()
    assert res.labels == ("MH", "SMH-2", "FMH-naive")
    np.testing.assert_array_equal(res.n_grid, GRID)
    assert res.mean_evals.shape == (3, 4) and res.raw_evals.shape == (3, 4, 2)
    np.testing.assert_array_equal(res.mean_evals[0], GRID)
    assert res.slope("MH").slope == pytest.approx(1.0, abs=1e-12)
    assert all(math.isfinite(f.slope) for f in res.fits.values())
    assert np.all((res.accept_rate >= 0) & (res.accept_rate <= 1))


def test_scaling_study_independent_of_thread_count():
    a, b = small_study(threads=1), small_study(threads=3)
    np.testing.assert_array_equal(a.raw_evals, b.raw_evals)
    np.testing.assert_array_equal(a.raw_accept, b.raw_accept)


def test_truncate_at_n_uses_grid_size():
    k = StudyKernel(KernelConfig("smh", 1, 0.0, 300, 50), ScaledRW(5.0), truncate_at_n=True)
    res = scaling_study(LogisticRegression(), [k], GRID, repetitions=1, seed=1, d=3)
    assert np.all(res.mean_evals[0] <= res.n_grid)
    full = StudyKernel(KernelConfig("smh", 1, 0.0, 300, 50), ScaledRW(5.0))
    res0 = scaling_study(LogisticRegression(), [full], GRID, repetitions=1, seed=1, d=3)
    np.testing.assert_array_equal(res0.mean_evals[0], GRID)


def test_scaling_study_validation():
    k = [KernelConfig("mh", 2, math.inf, 200, 10)]
    with pytest.raises(ValueError):
        scaling_study(LogisticRegression(), k, [100, 200, 300])
    with pytest.raises(ValueError):
        scaling_study(LogisticRegression(), k, [100, 300, 200, 400])


def test_rho_study_rows():
    rows = rho_study(LogisticRegression(), [256, 1024], [0.0, 0.25, 0.5, 0.75],
                     iterations=1000, seed=0, d=3)
    assert len(rows) == 8
    assert [r.rho for r in rows[:4]] == [0.0, 0.25, 0.5, 0.75]
    assert all(0 <= r.accept_rate <= 1 for r in rows)
    assert all(r.ess > 0 and r.ess_per_sec > 0 for r in rows)
    with pytest.raises(ValueError):
        rho_study(LogisticRegression(), [256], [1.0])
