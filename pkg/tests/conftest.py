"""Shared fixtures and independent numerical oracles.

The oracles here deliberately avoid the package's banded stepper and
class formulas: dense matrices, a local Runge-Kutta step, and explicit
similarity transforms, so that agreement is evidence rather than
tautology.
"""

import numpy as np
import pytest

from ctmcpert import (RateFunction, WeightSequence, batch_arrival_chain,
                      batch_chain, batch_service_chain, birth_death_chain,
                      parse_rate, rate_family)


def dense_rk4(matrix_at, y0, t0, t1, steps):
    """Classical one-step method on a dense matrix function; independent
    of the solver module."""
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / steps
    for i in range(steps):
        t = t0 + i * h
        k1 = matrix_at(t) @ y
        k2 = matrix_at(t + h / 2) @ (y + h / 2 * k1)
        k3 = matrix_at(t + h / 2) @ (y + h / 2 * k2)
        k4 = matrix_at(t + h) @ (y + h * k3)
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    return y


def expm_ode(m, h, steps=400):
    """Matrix exponential of h*m via column-wise integration of the
    identity."""
    m = np.asarray(m, dtype=float)
    return dense_rk4(lambda _t: m, np.eye(len(m)), 0.0, h, steps)


def random_rate(rng, allow_zero=True):
    kind = rng.integers(0, 3)
    lo = 0.0 if allow_zero else 0.1
    if kind == 0:
        return RateFunction.constant(float(rng.uniform(lo, 3.0)), period=1.0)
    amp = float(rng.uniform(0.0, 0.95))
    base = float(rng.uniform(max(lo, 0.1), 2.0))
    fn = "sin" if kind == 1 else "cos"
    return parse_rate(f"{base}*(1+{amp}*{fn}(2*pi*t))", period=1.0)


def random_family(rng, count):
    if rng.random() < 0.5:
        return rate_family(shared=random_rate(rng),
                           multipliers=rng.uniform(0.1, 3.0, count))
    return rate_family(members=[random_rate(rng) for _ in range(count)])


def random_batches(rng, n):
    top = min(n, 6)
    sizes = rng.choice(np.arange(1, top), size=int(rng.integers(1, 4)) if top > 4
                       else 1, replace=False)
    return {int(k): random_rate(rng) for k in sizes}


def random_chain(rng, kind, n):
    size = n + 1
    if kind == "birth-death":
        return birth_death_chain(random_family(rng, n), random_family(rng, n),
                                 size, validation_grid=32)
    if kind == "batch-arrival":
        return batch_arrival_chain(random_batches(rng, n),
                                   random_family(rng, n), size,
                                   validation_grid=32)
    if kind == "batch-service":
        return batch_service_chain(random_family(rng, n),
                                   random_batches(rng, n), size,
                                   validation_grid=32)
    return batch_chain(random_batches(rng, n), random_batches(rng, n), size,
                       validation_grid=32)


def random_weights(rng, n):
    r = rng.random()
    if r < 0.34:
        return WeightSequence.unit(n)
    if r < 0.67:
        return WeightSequence.geometric(float(rng.uniform(1.0, 2.0)), n)
    return WeightSequence.explicit(1.0 + np.cumsum(rng.uniform(0.0, 1.0, n)))


@pytest.fixture(scope="session")
def loss_queue():
    """299-server loss queue with 1-periodic arrivals (the first bundled
    study)."""
    lam = parse_rate("200*(1+sin(2*pi*t))", period=1.0)
    mu = RateFunction.constant(1.0)
    return birth_death_chain(lam, rate_family(shared=mu,
                                              multipliers=np.arange(1, 300)),
                             size=300)


@pytest.fixture(scope="session")
def pair_queue():
    """Two-server queue with single and pair arrivals, truncated to 300
    states (the second bundled study)."""
    lam = parse_rate("1+sin(2*pi*t)", period=1.0)
    pairs = parse_rate("0.5*(1+sin(2*pi*t))", period=1.0)
    mu = RateFunction.constant(3.0)
    services = rate_family(shared=mu,
                           multipliers=np.minimum(np.arange(1, 300), 2))
    return batch_arrival_chain({1: lam, 2: pairs}, services, size=300,
                               truncated=True)
