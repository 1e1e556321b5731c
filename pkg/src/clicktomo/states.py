"""Joint photon-number distributions for test states.

Provides the two reference states used throughout (a heralded single
photon split on a beam splitter, and a split multithermal beam), plus
analytic click-probability references for the multithermal case and
construction of arbitrary diagonal states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import TruncationError

__all__ = [
    "JointDistribution",
    "ThermalSpec",
    "heralded_split_state",
    "multithermal_marginal",
    "split_on_beamsplitter",
    "multithermal_click_reference",
    "custom_state",
    "state_from_json",
    "state_to_json",
]


@dataclass(frozen=True)
class JointDistribution:
    """Nonnegative tensor of joint photon-number probabilities.

    ``values`` has shape ``(N+1,) * M`` where entry ``[n1, ..., nM]`` is
    the probability of finding ``nj`` photons in mode ``j``.  The
    flattened layout is row-major with mode 1 slowest, so for two modes
    the flat index of (n, k) is ``k + n * (N + 1)``.

    ``leakage`` is the declared probability mass lost to truncation;
    the entries are kept unnormalized (summing to ``1 - leakage``)
    unless :meth:`normalized` is called explicitly.
    """

    values: np.ndarray
    leakage: float = 0.0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim < 1:
            raise ValueError("values must have at least one axis")
        sizes = set(values.shape)
        if len(sizes) != 1:
            raise ValueError("all modes must share the same truncation")
        if np.any(values < 0):
            raise ValueError("probabilities must be nonnegative")
        if not (0.0 <= self.leakage < 1.0):
            raise ValueError("leakage must lie in [0, 1)")
        total = values.sum()
        if not math.isclose(total, 1.0 - self.leakage, abs_tol=1e-9):
            raise ValueError(
                f"entries sum to {total}, expected {1.0 - self.leakage} "
                "(declared leakage does not match)"
            )
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def modes(self) -> int:
        return self.values.ndim

    @property
    def truncation(self) -> int:
        return self.values.shape[0] - 1

    def flat(self) -> np.ndarray:
        """Row-major flattening, mode 1 slowest."""
        return self.values.reshape(-1)

    def normalized(self) -> "JointDistribution":
        """Explicitly renormalize away the truncation leakage."""
        total = self.values.sum()
        if total <= 0:
            raise ValueError("cannot normalize an all-zero distribution")
        return JointDistribution(self.values / total, leakage=0.0)

    @staticmethod
    def from_flat(flat, modes: int, leakage: float = 0.0) -> "JointDistribution":
        flat = np.asarray(flat, dtype=np.float64)
        per_mode = round(flat.size ** (1.0 / modes))
        if per_mode**modes != flat.size:
            raise ValueError(
                f"flat length {flat.size} is not a perfect {modes}-th power"
            )
        return JointDistribution(flat.reshape((per_mode,) * modes), leakage=leakage)


@dataclass(frozen=True)
class ThermalSpec:
    """Multithermal beam: ``num_modes`` equal thermal modes carrying a
    total mean photon number ``mean_photons``."""

    mean_photons: float
    num_modes: float = 1.0

    def __post_init__(self):
        if not self.mean_photons > 0:
            raise ValueError("mean_photons must be positive")
        if not self.num_modes >= 1:
            raise ValueError("num_modes must be >= 1")


def heralded_split_state(tau: float, truncation: int) -> JointDistribution:
    """One photon routed by a beam splitter of transmissivity ``tau``.

    The diagonal of the split single-photon state: probability ``tau``
    of the photon ending in mode 2 and ``1 - tau`` in mode 1.
    """
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must lie in (0, 1), got {tau}")
    if truncation < 1:
        raise TruncationError("truncation must be >= 1 to hold one photon")
    values = np.zeros((truncation + 1, truncation + 1))
    values[0, 1] = tau
    values[1, 0] = 1.0 - tau
    return JointDistribution(values)


def multithermal_marginal(spec: ThermalSpec, truncation: int) -> np.ndarray:
    """Photon-number distribution of a multithermal beam up to ``truncation``.

    Negative-binomial form: rho_n = C(n+mu-1, n) (Nbar/mu)^n / (1+Nbar/mu)^(n+mu).
    The truncation leakage is ``1 - result.sum()``.
    """
    if truncation < 0:
        raise ValueError("truncation must be >= 0")
    mu = spec.num_modes
    nbar = spec.mean_photons
    n = np.arange(truncation + 1)
    log_rho = (
        gammaln(n + mu)
        - gammaln(mu)
        - gammaln(n + 1)
        + n * (np.log(nbar) - np.log(mu))
        - (n + mu) * np.log1p(nbar / mu)
    )
    return np.exp(log_rho)


def split_on_beamsplitter(
    marginal, tau: float, truncation: int
) -> JointDistribution:
    """Route a single-mode distribution through a beam splitter.

    Each of ``s`` photons goes to mode 1 with probability ``tau``
    independently, so rho[n, k] = marginal[n+k] * C(n+k, n) tau^n (1-tau)^k.
    """
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    marginal = np.asarray(marginal, dtype=np.float64)
    if marginal.ndim != 1:
        raise ValueError("marginal must be a vector")
    if np.any(marginal < 0):
        raise ValueError("marginal entries must be nonnegative")
    if marginal.size - 1 > truncation:
        raise TruncationError(
            f"marginal supports up to {marginal.size - 1} photons but "
            f"truncation is {truncation}"
        )
    values = np.zeros((truncation + 1, truncation + 1))
    for s in range(marginal.size):
        for n in range(s + 1):
            k = s - n
            values[n, k] = (
                marginal[s] * math.comb(s, n) * tau**n * (1.0 - tau) ** k
            )
    leakage = max(0.0, 1.0 - marginal.sum())
    return JointDistribution(values, leakage=leakage)


def _mth_survival(mu: float, x: float) -> float:
    # (1 + x/mu)^(-mu), stable for large mu
    return math.exp(-mu * math.log1p(x / mu))


def multithermal_click_reference(
    spec: ThermalSpec, tau: float, eta: float
) -> tuple[float, float, float, float]:
    """Analytic click probabilities (p00, p01, p10, p11) of a split
    multithermal beam at efficiency ``eta``."""
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    mu = spec.num_modes
    nbar = spec.mean_photons
    p00 = _mth_survival(mu, eta * nbar)
    p01 = _mth_survival(mu, eta * tau * nbar) - p00
    p10 = _mth_survival(mu, eta * (1.0 - tau) * nbar) - p00
    p11 = 1.0 - p00 - p01 - p10
    return p00, p01, p10, p11


def custom_state(flat, modes: int, leakage: float = 0.0) -> JointDistribution:
    """Build a distribution from explicitly supplied flattened entries."""
    return JointDistribution.from_flat(flat, modes, leakage=leakage)


def state_from_json(doc: dict) -> JointDistribution:
    """Construct a state from its JSON description.

    Supported kinds: ``heralded`` (tau), ``multithermal_split``
    (tau, mean_photons, num_modes) and ``custom`` (modes, values,
    optional leakage). All kinds carry ``truncation``.
    """
    kind = doc.get("kind")
    if kind == "heralded":
        return heralded_split_state(doc["tau"], doc["truncation"])
    if kind == "multithermal_split":
        spec = ThermalSpec(doc["mean_photons"], doc.get("num_modes", 1.0))
        marg = multithermal_marginal(spec, doc["truncation"])
        return split_on_beamsplitter(marg, doc["tau"], doc["truncation"])
    if kind == "custom":
        return custom_state(
            doc["values"], doc["modes"], leakage=doc.get("leakage", 0.0)
        )
    raise ValueError(f"unknown state kind {kind!r}")


def state_to_json(doc_kind: str, **params) -> dict:
    """Normalize a state description into its JSON document form."""
    doc = {"kind": doc_kind}
    doc.update(params)
    state_from_json(doc)  # validate eagerly
    return doc
