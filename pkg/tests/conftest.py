import numpy as np
import pytest

from rwmlab import GSpec, normalize
from rwmlab import _loops
from rwmlab.targets import UNIT


@pytest.fixture(scope="session")
def uniform_target():
    return normalize(GSpec("uniform"))


@pytest.fixture(scope="session")
def linear2_target():
    return normalize(GSpec("linear", (2.0,)))


@pytest.fixture(scope="session")
def halfline_exp_target():
    return normalize(GSpec("linear", (1.0,), support="halfline"))


def make_rng(seed):
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def run_chain_trace(target, d, l, n_iters, rng, kind="rwm", c=1.0, x0=None):
    """Run one chain with the compiled driver; returns (trace, accept_rate,
    esjd_scaled, final_state)."""
    import math

    from rwmlab.kernels import KernelConfig

    cfg = KernelConfig(l=l, d=d, kind=kind, c=c)
    if x0 is None:
        from rwmlab import sample_iid

        x = sample_iid(target, d, rng)
    else:
        x = np.array(x0, dtype=float)
    kind_code = {"rwm": _loops.KIND_RWM, "mwg": _loops.KIND_MWG, "rwh": _loops.KIND_RWH}[kind]
    trace = np.empty(n_iters)
    dummy = np.empty(1)
    wins = np.zeros(1, np.int64)
    support_code = 0 if target.support == UNIT else 1
    n_acc, sum_sq, *_ = _loops.run_chain(
        target._coeffs, support_code, kind_code, cfg.sigma, d, cfg.n_update,
        n_iters, x, rng, trace, True, dummy, False, 0, False, 0, wins,
    )
    return trace, n_acc / n_iters, d * sum_sq / n_iters, x
