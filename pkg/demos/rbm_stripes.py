"""Train a small RBM on striped binary patterns with PMP negative phases.

Both expectation phases of the RBM gradient are replaced by samples
from the perturbed model: clamped-visible decoding for the positive
phase (which is exact, since pinned visibles decouple the hiddens) and
free decoding for the negative phase.  Sample quality is scored by the
squared maximum mean discrepancy to held-out data under an exponential
average-Hamming kernel; lower is better.

This runs a reduced protocol (a minute or so).  The experiment command
`python3 -m pmp rbm` runs the full desk-scale version.
"""
import numpy as np

from pmp.data_io import striped_patterns
from pmp.evaluation import mmd2
from pmp.learning import TrainConfig, init_rbm, train_rbm
from pmp.samplers import rbm_pmp_sample


def main():
    rng = np.random.default_rng(0)
    side, n_hidden = 8, 32
    data = striped_patterns(1000, side, rng).images.reshape(1000, -1)
    train, held = data[:800], data[800:]

    W0, b0, c0 = init_rbm(n_hidden, side * side, rng)
    config = TrainConfig(iters=300, lr=0.02, minibatch=100, sweeps=30,
                         damping=0.5, optimizer="sgd", avg_tail=0.4)
    fit = train_rbm(train, W0, b0, c0, config, rng, method="pmp")

    def score(W, b, c, label):
        v, _ = rbm_pmp_sample(W, b, c, 400, 100, rng)
        print(f"  MMD^2({label:>9s}, held-out) = {mmd2(v, held):.5f}")
        return mmd2(v, held)

    print("samples at 100 sweeps:")
    untrained = score(W0, b0, c0, "untrained")
    trained = score(fit.W, fit.b, fit.c, "trained")
    print(f"log improvement = {np.log(untrained) - np.log(trained):.2f} nats")


if __name__ == "__main__":
    main()
