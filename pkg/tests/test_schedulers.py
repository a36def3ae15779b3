from __future__ import annotations

import numpy as np
import pytest

from dense_face.exceptions import ConfigError, ContractError, TimestepRangeError
from dense_face.schedulers import (
    add_noise,
    ddim_step,
    make_schedule,
    plan_timesteps,
    predict_x0,
)


@pytest.mark.parametrize("kind", ["cosine", "linear"])
def test_alpha_bars_strictly_decreasing_in_unit_interval(kind: str) -> None:
    sched = make_schedule(kind, 1000)
    ab = sched.alpha_bars
    assert ab.shape == (1000,)
    assert (np.diff(ab) < 0).all()
    assert (ab > 0).all()
    assert (ab < 1).all()
    assert (sched.betas > 0).all()
    assert (sched.betas < 1).all()


def test_schedule_rejects_bad_config() -> None:
    with pytest.raises(ConfigError):
        make_schedule("cosine", 5)
    with pytest.raises(ConfigError):
        make_schedule("quadratic", 100)


def test_add_noise_closed_form_and_range_check() -> None:
    sched = make_schedule("cosine", 100)
    rng = np.random.default_rng(0)
    x0 = rng.standard_normal((2, 3, 4, 4))
    eps = rng.standard_normal((2, 3, 4, 4))
    xt = add_noise(x0, eps, [10, 50], sched)
    ab = sched.alpha_bars[[10, 50]]
    expected = np.sqrt(ab)[:, None, None, None] * x0 + np.sqrt(1 - ab)[:, None, None, None] * eps
    np.testing.assert_allclose(xt, expected)
    with pytest.raises(TimestepRangeError):
        add_noise(x0, eps, 100, sched)
    with pytest.raises(TimestepRangeError):
        add_noise(x0, eps, -1, sched)


def test_plan_timesteps_shape() -> None:
    plan = plan_timesteps(1000, 25)
    assert plan.timesteps[0] == 999
    assert plan.timesteps[-1] == 0
    assert len(plan.timesteps) == 25
    assert all(a > b for a, b in zip(plan.timesteps, plan.timesteps[1:], strict=False))
    assert plan.transitions()[-1] == (0, None)
    assert plan_timesteps(1000, 1).timesteps == (999,)
    with pytest.raises(ConfigError):
        plan_timesteps(100, 0)
    with pytest.raises(ConfigError):
        plan_timesteps(100, 101)


def test_single_step_plan_reads_out_from_the_top() -> None:
    sched = make_schedule("cosine", 1000)
    plan = plan_timesteps(1000, 1)
    assert plan.steps == 1
    assert plan.transitions() == [(999, None)]
    rng = np.random.default_rng(4)
    x0 = np.clip(rng.standard_normal((1, 3, 8, 8)) * 0.3, -1, 1)
    eps = rng.standard_normal(x0.shape)
    x = add_noise(x0, eps, 999, sched)
    ((t, _),) = plan.transitions()
    np.testing.assert_allclose(predict_x0(x, eps, t, sched), x0, atol=1e-6)


def test_ddim_step_with_oracle_noise_recovers_clean_sample() -> None:
    sched = make_schedule("cosine", 1000)
    rng = np.random.default_rng(1)
    x0 = np.clip(rng.standard_normal((1, 3, 8, 8)) * 0.3, -1, 1)
    eps = rng.standard_normal(x0.shape)
    x = add_noise(x0, eps, 999, sched)
    plan = plan_timesteps(1000, 10)
    for t, t_prev in plan.transitions():
        if t_prev is None:
            x = predict_x0(x, eps, t, sched)
        else:
            x = ddim_step(x, eps, t, t_prev, 0.0, sched)
    np.testing.assert_allclose(x, x0, atol=1e-8)


def test_ddim_step_contracts() -> None:
    sched = make_schedule("cosine", 100)
    x = np.zeros((1, 3, 2, 2))
    with pytest.raises(ContractError):
        ddim_step(x, x, 10, 10, 0.0, sched)
    with pytest.raises(ContractError):
        ddim_step(x, x, 20, 10, 0.5, sched)
    with pytest.raises(ConfigError):
        ddim_step(x, x, 20, 10, 1.5, sched)


def test_ddim_step_eta_is_reproducible() -> None:
    sched = make_schedule("cosine", 100)
    x = np.random.default_rng(2).standard_normal((1, 3, 4, 4))
    eps = np.random.default_rng(3).standard_normal((1, 3, 4, 4))
    a = ddim_step(x, eps, 50, 40, 1.0, sched, np.random.default_rng(7))
    b = ddim_step(x, eps, 50, 40, 1.0, sched, np.random.default_rng(7))
    c = ddim_step(x, eps, 50, 40, 0.0, sched)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)
