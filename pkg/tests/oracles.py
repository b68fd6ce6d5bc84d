"""Independent brute-force oracles used by the particle-engine tests."""

import math

import numpy as np

from mdkinetics import ParameterSet


def brute_force_expected_means(samples: np.ndarray, p: ParameterSet, dt: float) -> np.ndarray:
    """Exact one-step expected mean change by exhaustive enumeration.

    Enumerates every partner draw (probability 1/n each), the Bernoulli
    acceptance of every channel, and both two-point noise signs.  Channels
    compose loss-then-gain inside a step; the gain increments of N, D and M do
    not depend on the post-loss value, while the controlled C gain does
    (through -nu * x), so C is enumerated over the full joint outcome.
    """
    xN, xD, xM, xC = samples
    n = samples.shape[1]

    def phi(v):
        return v / (1.0 + v)

    exp_N = []
    for x in xN:
        loss = sum((1.0 / n) * dt * (1 + c) * (-p.beta_N * phi(c) * x) for c in xC)
        gain = sum((1.0 / n) * (1.0 / n) * dt * (1 + z) * (p.beta_D * phi(z) * y)
                   for z in xM for y in xD)
        exp_N.append(x + loss + gain)
    exp_D = []
    for x in xD:
        loss = sum((1.0 / n) * dt * (1 + z) * (-p.beta_D * phi(z) * x) for z in xM)
        gain = sum((1.0 / n) * (1.0 / n) * dt * (1 + c) * (p.beta_N * phi(c) * nn)
                   for c in xC for nn in xN)
        exp_D.append(x + loss + gain)
    exp_M = []
    for x in xM:
        loss = dt * (-p.beta_M * x)  # +/- noise signs cancel in the mean
        gain = sum((1.0 / n) * dt * (p.gamma_M * y) for y in xD)
        exp_M.append(x + loss + gain)
    exp_C = []
    s = math.sqrt(p.sigma2_C)
    for x in xC:
        acc = np.array([dt, dt, 1 - dt])            # decay fired +s, fired -s, idle
        after_decay = np.array([x * (1 - p.beta_C + s), x * (1 - p.beta_C - s), x])
        probs = acc * np.array([0.5, 0.5, 1.0])
        val = 0.0
        for pr, xg in zip(probs, after_decay):
            no_rec = (1 - dt) * xg
            rec = sum((1.0 / n) * dt * (xg + p.gamma_C * z - p.nu_control * xg)
                      for z in xM)
            val += pr * (no_rec + rec)
        exp_C.append(val)
    expected = np.array([np.mean(exp_N), np.mean(exp_D), np.mean(exp_M), np.mean(exp_C)])
    return expected - samples.mean(axis=1)
