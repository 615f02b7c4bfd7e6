"""Gumbel perturbation of unary potentials.

Perturb-and-MAP replaces sampling with optimization: draw one Gumbel noise
value per (variable, state), add it to the unary log-potentials and take the
MAP of the perturbed model.  The noise is Gumbel(-gamma, 1) with gamma the
Euler-Mascheroni constant, i.e. zero mean, variance pi^2/6 and inverse CDF

    F^{-1}(u) = -gamma - log(-log(u)).

For a model with only unary terms the perturbed argmax is an exact sample
from the Gibbs distribution (the classic Gumbel-max construction applied
independently per variable).

A low-variance variant keeps the noise correlated across calls: a latent
standard-normal state gamma_t evolves as an AR(1) chain,

    gamma_t = sqrt(rho) * gamma_{t-1} + sqrt(1 - rho) * delta_t,
    delta_t ~ N(0, 1),

and is pushed through NormalCDF then the Gumbel inverse CDF, so every step
is marginally Gumbel(-gamma, 1) while consecutive steps are correlated
(rho = 1 freezes the noise, rho = 0 gives fresh draws).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr

EULER_GAMMA = float(np.euler_gamma)

# NormalCDF output is clipped into this range before the Gumbel inverse CDF
# so that log(-log(u)) stays finite for any float input.
_U_LO = 1e-300
_U_HI = 1.0 - 1e-16


def chain_rng(master_seed: int, chain_id: int) -> np.random.Generator:
    """Counter-based per-chain stream: (master seed, chain id) -> Generator.

    Each chain owns an independent Philox stream, so the draw sequence of a
    chain does not depend on how many other chains run or in which order.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed),
                                 spawn_key=(int(chain_id),))
    return np.random.Generator(np.random.Philox(seq))


def draw_gumbel(rng: np.random.Generator, size) -> np.ndarray:
    """Zero-mean Gumbel(-gamma, 1) draws."""
    return rng.gumbel(loc=-EULER_GAMMA, scale=1.0, size=size)


def gumbel_icdf(u: np.ndarray) -> np.ndarray:
    """Inverse CDF of Gumbel(-gamma, 1); input clipped away from {0, 1}."""
    u = np.clip(u, _U_LO, _U_HI)
    return -EULER_GAMMA - np.log(-np.log(u))


def perturb(unaries, eps_blocks):
    """Add per-(variable, state) noise to unary log-potential vectors.

    Both arguments are lists of per-variable arrays; a noise block may carry
    a leading batch axis, in which case it broadcasts against the unary.
    Returns new arrays, inputs untouched.
    """
    if len(unaries) != len(eps_blocks):
        raise ValueError("need one noise block per variable")
    return [np.asarray(u) + np.asarray(e) for u, e in zip(unaries, eps_blocks)]


def split_flat(flat: np.ndarray, cards) -> list:
    """Split a flat (..., sum cards) noise array into per-variable blocks."""
    out = []
    at = 0
    for c in cards:
        out.append(flat[..., at:at + c])
        at += c
    return out


@dataclass
class PersistentGumbel:
    """AR(1)-correlated Gumbel noise, one value per (variable, state).

    ``step`` advances the latent normal chain and returns the matching
    Gumbel field.  rho in [0, 1]; the first step initializes the latent
    state from N(0, 1) so every step, including the first, is marginally
    Gumbel(-gamma, 1).
    """

    rho: float
    size: object          # int or shape tuple
    _state: np.ndarray = None

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")

    def step(self, rng: np.random.Generator) -> np.ndarray:
        if self._state is None:
            self._state = rng.standard_normal(self.size)
        else:
            delta = rng.standard_normal(self.size)
            self._state = (np.sqrt(self.rho) * self._state
                           + np.sqrt(1.0 - self.rho) * delta)
        return gumbel_icdf(ndtr(self._state))


def persistent_step(state: PersistentGumbel,
                    rng: np.random.Generator) -> np.ndarray:
    """Functional wrapper over :meth:`PersistentGumbel.step`."""
    return state.step(rng)
