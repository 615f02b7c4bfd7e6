"""Moment-matching maximum likelihood for a fully observed spin model.

The gradient of the log-likelihood is the gap between data moments and
model moments; the model side is estimated with a fresh batch of PMP
samples each iteration.  Because sampling is just noisy MAP decoding,
the whole loop is message passing.  We fit a 6-spin model to exact
samples from a known ground truth and check the learned model's moments
and MMD against held-out data.
"""
import numpy as np

from pmp.evaluation import enumerate_states, exact_distribution, mmd2
from pmp.graph import ising_graph
from pmp.learning import TrainConfig, train_ising_spin
from pmp.samplers import ising_pmp_sample


def spin_moments(x01):
    s = 2.0 * np.asarray(x01, dtype=np.float64) - 1.0
    second = s.T @ s / s.shape[0]
    np.fill_diagonal(second, 0.0)
    return second, s.mean(axis=0)


def main():
    rng = np.random.default_rng(3)
    n = 6
    A = rng.normal(0, 0.4, (n, n))
    J_true = np.triu(A, 1) + np.triu(A, 1).T
    h_true = rng.normal(0, 0.2, n)

    # Exact data via enumeration (2^6 states).
    p = exact_distribution(ising_graph(J_true, h_true))
    states = enumerate_states([2] * n)
    X = states[rng.choice(p.size, size=1200, p=p)].astype(np.int8)
    X_train, X_held = X[:1000], X[1000:]

    # Two stages: a fast coarse fit, then a gentle pass whose tail
    # iterates are averaged to squash the sampling noise in the gradient.
    coarse = TrainConfig(iters=300, lr=0.02, minibatch=200, sweeps=20,
                         optimizer="adam", init_sigma=0.0)
    fine = TrainConfig(iters=400, lr=0.005, minibatch=500, sweeps=20,
                       optimizer="adam", avg_tail=0.5)
    stage1 = train_ising_spin(X_train, coarse, rng)
    fit = train_ising_spin(X_train, fine, rng, J0=stage1.J, h0=stage1.h)

    xs = ising_pmp_sample(fit.J, fit.h, 50_000, 20, rng)
    m2s, m1s = spin_moments(xs)
    m2d, m1d = spin_moments(X_train)
    gap = max(np.abs(m2s - m2d).max(), np.abs(m1s - m1d).max())
    print(f"max |sample moment - data moment| = {gap:.4f}")

    mmd_fit = mmd2(xs[:2000], X_held)
    uniform = (rng.random((2000, n)) < 0.5).astype(np.int8)
    print(f"MMD^2 to held-out data: fitted model {mmd_fit:.5f}   "
          f"uniform baseline {mmd2(uniform, X_held):.5f}")
    print(f"coupling RMSE vs ground truth = "
          f"{np.sqrt(np.mean((fit.J - J_true) ** 2)):.4f}")


if __name__ == "__main__":
    main()
