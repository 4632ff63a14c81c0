import numpy as np
import pytest

from apseq import OperatorSequence
from apseq.operator_model import induced_bound


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_matrix(rng, dim):
    return rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))


def scaled_to_certificate(m, family, target):
    """Rescale a matrix so its worst induced bound over the family equals
    target."""
    worst = max(induced_bound(m, sn) for sn in family)
    return m * (target / worst)


def random_certified_operator(rng, family, target_sup, backend="constant",
                              period=3, probe=None):
    """Random operator sequence whose auto-certificates stay at target_sup."""
    dim = family.dim
    if backend == "constant":
        m = scaled_to_certificate(random_matrix(rng, dim), family, target_sup)
        return OperatorSequence.constant(m, family=family)
    if backend == "periodic":
        mats = [scaled_to_certificate(random_matrix(rng, dim), family,
                                      target_sup * rng.uniform(0.5, 1.0))
                for _ in range(period)]
        return OperatorSequence.periodic(mats, family=family)
    if backend == "generator":
        base = scaled_to_certificate(random_matrix(rng, dim), family,
                                     target_sup)

        def fn(k, _b=base):
            return _b * (0.55 + 0.45 * np.sin(0.7 * k))

        return OperatorSequence.from_function(dim, fn, family=family,
                                              sup_probe=probe or (-64, 64))
    raise ValueError(backend)
