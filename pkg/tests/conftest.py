import numpy as np
import pytest

from cfactivity.netmodel import Scenario, SimParams, build_clusters, generate_scenario, sample_activity, synthesize_received

DESK = SimParams(M=20, N=2, K=100, L=20, eps=0.1, area_side=2000.0)


def small_params(**kw):
    base = dict(M=4, N=4, K=12, L=8, eps=0.3, area_side=500.0, power_policy="full")
    base.update(kw)
    return SimParams(**base)


def make_instance(params, seed):
    """Scenario, batch and T=1 clusters of one seeded trial."""
    scn = generate_scenario(params, seed)
    act, _ = sample_activity(params.K, params.eps, seed + 1)
    batch = synthesize_received(scn, act, seed + 2)
    return scn, batch


def handmade_scenario(beta, rho, S, sigma2, n_antennas=1):
    beta = np.asarray(beta, float)
    M, K = beta.shape
    return Scenario(
        ap_positions=np.zeros((M, 2)),
        user_positions=np.zeros((K, 2)),
        beta=beta,
        rho=np.asarray(rho, float),
        S=np.asarray(S, complex),
        sigma2=float(sigma2),
        n_antennas=n_antennas,
        side=1000.0,
    )


def random_hpd(rng, L, cond=10.0):
    A = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
    Q, _ = np.linalg.qr(A)
    w = rng.uniform(1.0, cond, L)
    return (Q * w) @ Q.conj().T


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance summary: tests append (criterion, passed, detail); printed at the end of the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for crit, ok, detail in sorted(ACCEPTANCE_LINES, key=lambda x: int(x[0].split()[0])):
            terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {crit}: {detail}")
