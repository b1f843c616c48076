"""Likelihood models for the phase-estimation probes.

Every model depends on the unknown phases and the controls only through the
per-mode sums ``phi_k + theta_k``; the vectorised entry point
:meth:`ProbeModel.outcome_probabilities` therefore takes those effective
phases directly.
"""

from functools import lru_cache
from itertools import combinations_with_replacement

import numpy as np

from ._validation import check_angles, check_random_state
from .exceptions import DomainError, UnsupportedModelError

FD_STEP = 1e-5
PROBABILITY_FLOOR = 1e-12


class ProbeModel:
    """Base class for a probe + measurement with enumerable outcomes."""

    model_id = None
    parameter_count = None
    outcome_count = None

    def outcome_probabilities(self, psi):
        """Outcome distribution at effective phases ``psi`` of shape (..., p).

        Returns an array of shape (..., outcome_count).
        """
        raise NotImplementedError

    def probabilities(self, phi, theta):
        """Outcome distribution for phases ``phi`` (..., p) and controls ``theta``."""
        psi = np.asarray(phi, dtype=float) + np.asarray(theta, dtype=float)
        return self.outcome_probabilities(psi)

    def shifted_probabilities(self, phi, thetas):
        """Outcome distributions for every pairing of ``thetas`` (K, p) with ``phi`` (n, p).

        Returns shape (K, n, outcome_count).
        """
        phi = np.asarray(phi, dtype=float)
        thetas = np.asarray(thetas, dtype=float)
        return self.outcome_probabilities(phi[None, :, :] + thetas[:, None, :])

    def likelihood(self, m, phi, theta):
        m = self._check_outcome(m)
        phi = check_angles(phi, self.parameter_count, "phi")
        theta = check_angles(theta, self.parameter_count, "theta")
        return float(self.probabilities(phi, theta)[m])

    def _check_outcome(self, m):
        if isinstance(m, bool) or not isinstance(m, (int, np.integer)):
            raise DomainError(f"outcome index must be an integer, got {m!r}")
        if not 0 <= m < self.outcome_count:
            raise DomainError(
                f"outcome {m} outside [0, {self.outcome_count}) for {self.model_id}"
            )
        return int(m)

    def __repr__(self):
        return f"{type(self).__name__}()"


class SingleQubitModel(ProbeModel):
    """Qubit (or two-arm interferometer) with outcome probabilities cos^2 / sin^2."""

    model_id = "single_qubit"
    parameter_count = 1
    outcome_count = 2

    def outcome_probabilities(self, psi):
        psi = np.asarray(psi, dtype=float)[..., 0]
        c = np.cos(0.5 * psi) ** 2
        return np.stack([c, 1.0 - c], axis=-1)


def fourier_matrix(d):
    """d-mode discrete Fourier unitary, entries exp(2 pi i j k / d) / sqrt(d)."""
    j = np.arange(d)
    return np.exp(2j * np.pi * np.outer(j, j) / d) / np.sqrt(d)


class FourierMultiportModel(ProbeModel):
    """Two photons through Fourier multiport, phase layer, Fourier multiport.

    The circuit is ``F_d diag(1, e^{i psi_1}, ..., e^{i psi_p}) F_d`` with
    ``d = p + 1``; the photons enter modes 0 and 1 and number-resolving
    detectors register an unordered pair of output modes.  Outcomes are the
    pairs ``(0, 0), (0, 1), ..., (d-1, d-1)`` in lexicographic order.
    """

    def __init__(self, p):
        if p not in (2, 3):
            raise UnsupportedModelError(f"Fourier multiport supports p in {{2, 3}}, got {p}")
        self.parameter_count = p
        self.modes = p + 1
        self.model_id = f"fourier_p{p}"
        self.outcomes = list(combinations_with_replacement(range(self.modes), 2))
        self.outcome_count = len(self.outcomes)
        f = fourier_matrix(self.modes)
        # M[c, j] = sum_k f[c, k] e^{i psi_k} f[k, j]; only input columns 0 and 1 matter
        c0 = f * f[:, 0][None, :]
        c1 = f * f[:, 1][None, :]
        # Each amplitude M_c0 M_e1 + M_c1 M_e0 is a quadratic form in the phasors
        # e_k = e^{i psi_k}; store its coefficients on the products e_k e_l, k <= l.
        self._products = list(combinations_with_replacement(range(self.modes), 2))
        first, second = np.array(self._products).T
        self._pk, self._pl = first, second
        q = np.zeros((self.outcome_count, len(self._products)), dtype=complex)
        for o, (c, e) in enumerate(self.outcomes):
            a = np.outer(c0[c], c1[e]) + np.outer(c1[c], c0[e])
            sym = a + a.T
            for j, (k, l) in enumerate(self._products):
                q[o, j] = a[k, k] if k == l else sym[k, l]
        self._q = q
        self._bunched = np.array([c == e for c, e in self.outcomes])

    def transfer_matrix(self, psi):
        """Full d x d circuit unitary at effective phases ``psi``."""
        psi = check_angles(psi, self.parameter_count, "psi")
        f = fourier_matrix(self.modes)
        phase = np.exp(1j * np.concatenate([[0.0], psi]))
        return f @ np.diag(phase) @ f

    def _phasor_products(self, psi):
        e = np.empty((psi.shape[0], self.modes), dtype=complex)
        e[:, 0] = 1.0
        e[:, 1:] = np.exp(1j * psi)
        return e[:, self._pk] * e[:, self._pl]

    def _finish(self, amp):
        prob = amp.real**2 + amp.imag**2
        # |2 M_c0 M_c1|^2 / 2 for a bunched pair
        prob[..., self._bunched] *= 0.5
        return prob

    def outcome_probabilities(self, psi):
        psi = np.asarray(psi, dtype=float)
        lead = psi.shape[:-1]
        products = self._phasor_products(psi.reshape(-1, self.parameter_count))
        prob = self._finish(products @ self._q.T)
        return prob.reshape(lead + (self.outcome_count,))

    def shifted_probabilities(self, phi, thetas):
        # a control shift multiplies product e_k e_l by e^{i(theta_k + theta_l)},
        # so all candidates share one matrix product against the particle phasors
        phi = np.asarray(phi, dtype=float)
        thetas = np.atleast_2d(np.asarray(thetas, dtype=float))
        shift = np.zeros((thetas.shape[0], self.modes))
        shift[:, 1:] = thetas
        phase = np.exp(1j * (shift[:, self._pk] + shift[:, self._pl]))  # (K, products)
        coeff = phase[:, :, None] * self._q.T[None, :, :]  # (K, products, outcomes)
        coeff = np.transpose(coeff, (1, 0, 2)).reshape(len(self._products), -1)
        amp = self._phasor_products(phi) @ coeff  # (n, K * outcomes)
        prob = self._finish(amp.reshape(phi.shape[0], thetas.shape[0], self.outcome_count))
        return np.transpose(prob, (1, 0, 2))

    def __repr__(self):
        return f"FourierMultiportModel(p={self.parameter_count})"


@lru_cache(maxsize=None)
def get_model(model_id):
    """Look up a model by identifier: ``single_qubit``, ``fourier_p2``, ``fourier_p3``."""
    if model_id == "single_qubit":
        return SingleQubitModel()
    if model_id in ("fourier_p2", "fourier_p3"):
        return FourierMultiportModel(int(model_id[-1]))
    raise UnsupportedModelError(f"unknown model id {model_id!r}")


MODEL_IDS = ("single_qubit", "fourier_p2", "fourier_p3")


def sample_outcome(model, phi, theta, random_state=None):
    """Draw one outcome index by inverting the outcome CDF with one uniform."""
    rng = check_random_state(random_state)
    probs = model.probabilities(phi, theta)
    u = rng.random()
    idx = int(np.searchsorted(np.cumsum(probs), u, side="right"))
    return min(idx, model.outcome_count - 1)


def fisher_matrices(model, psi):
    """Classical Fisher matrices at a batch of effective phases ``psi`` (G, p).

    Central differences with step ``FD_STEP``; outcomes with probability below
    ``PROBABILITY_FLOOR`` contribute nothing.
    """
    psi = np.atleast_2d(np.asarray(psi, dtype=float))
    g, p = psi.shape
    probs = model.outcome_probabilities(psi)
    grads = np.empty((g, p, model.outcome_count))
    for j in range(p):
        shift = np.zeros(p)
        shift[j] = FD_STEP
        hi = model.outcome_probabilities(psi + shift)
        lo = model.outcome_probabilities(psi - shift)
        grads[:, j, :] = (hi - lo) / (2.0 * FD_STEP)
    keep = probs >= PROBABILITY_FLOOR
    inv = np.where(keep, 1.0 / np.where(keep, probs, 1.0), 0.0)
    fim = np.einsum("gjm,gkm,gm->gjk", grads, grads, inv)
    return 0.5 * (fim + np.swapaxes(fim, 1, 2))


def fisher_matrix(model, phi, theta):
    """Fisher information matrix (p x p) of one probe at ``(phi, theta)``."""
    phi = check_angles(phi, model.parameter_count, "phi")
    theta = check_angles(theta, model.parameter_count, "theta")
    return fisher_matrices(model, (phi + theta)[None, :])[0]
