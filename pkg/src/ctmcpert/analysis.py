"""Weighted-norm machinery and ergodicity certificates.

For a chain on 0..n, eliminating p_0 gives a reduced system for
z = (p_1, ..., p_n).  With a nondecreasing weight sequence d_1 <= ... <= d_n
and the cumulative upper-triangular weight matrix D (row i holds d_i from
column i on), the similarity transform of the reduced matrix by D has, for
each structural kind, an explicit banded form whose column sums are cheap
to evaluate on a time grid.  The per-column decay rates and their infimum
drive the certificates:

* weighted certificate (amplitude M, rate a): the D-weighted distance of
  any two solutions contracts at least like M * exp(-a (t-s));
* uniform certificate (amplitude c, rate b): twice the ergodicity
  coefficient is bounded by c * exp(-b (t-s)), so the total-variation
  distance of any two solutions is at most that same envelope (hence
  c >= 2).

Certificates are only issued for chains whose rates declare a common
period; sup-type constants are grid suprema over one period and are
flagged as such in reports.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ChainSpec, catastrophe_floor_at, reduced_system_at
from .quadrature import (ANALYSIS_GRID, adaptive_simpson, doubled_grid,
                         peak_running_integral, simpson_on_grid)
from .rates import RateFunction, periodic_mean

WEIGHTED_KINDS = ("birth-death", "batch-arrival", "batch-service", "batch")


class CertificateError(ValueError):
    """Raised when a certificate is requested outside its domain."""


# ---------------------------------------------------------------------------
# weight sequences

@dataclass(frozen=True, eq=False)
class WeightSequence:
    """Nondecreasing positive weights d_1 <= d_2 <= ... <= d_n."""

    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", vals)
        if vals.ndim != 1 or len(vals) == 0:
            raise ValueError("weights must be a nonempty vector")
        if np.any(vals <= 0):
            raise ValueError("weights must be positive")
        if np.any(np.diff(vals) < 0):
            raise ValueError("weights must be nondecreasing")

    @staticmethod
    def unit(n: int) -> "WeightSequence":
        return WeightSequence(np.ones(n))

    @staticmethod
    def geometric(delta: float, n: int) -> "WeightSequence":
        if delta < 1.0:
            raise ValueError("geometric weights need delta >= 1")
        return WeightSequence(delta ** np.arange(n))

    @staticmethod
    def explicit(values) -> "WeightSequence":
        return WeightSequence(np.asarray(values, dtype=float))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def min_weight(self) -> float:
        """inf of the weights (their first element, by monotonicity)."""
        return float(self.values.min())

    @property
    def state_ratio_min(self) -> float:
        """inf over i of d_i / i; positive iff limiting-mean bounds exist."""
        return float((self.values / np.arange(1, len(self.values) + 1)).min())

    @property
    def column_norm(self) -> float:
        """l1 operator norm of the cumulative weight matrix."""
        return float(self.values.sum())

    def matrix(self) -> np.ndarray:
        n = len(self.values)
        return np.triu(np.tile(self.values[:, None], (1, n)))

    def inverse_matrix(self) -> np.ndarray:
        n = len(self.values)
        inv = np.diag(1.0 / self.values)
        idx = np.arange(n - 1)
        inv[idx, idx + 1] = -1.0 / self.values[1:]
        return inv

    def weighted_norm(self, z: np.ndarray) -> float:
        """l1 norm of D z, via tail sums of z."""
        tails = np.cumsum(z[::-1])[::-1]
        return float(np.abs(tails * self.values).sum())


# ---------------------------------------------------------------------------
# the transformed reduced matrix, band by band

def _batch_scalars(batches, n: int, t: float) -> tuple[np.ndarray, int]:
    """Batch rates as a dense vector indexed 1..n plus the largest size."""
    vals = np.zeros(n + 1)
    top = 0
    for k, fam in batches.items():
        vals[k] = float(fam.values(t)[0])
        top = max(top, k)
    return vals, top


def weighted_reduced_bands(spec: ChainSpec, w: WeightSequence,
                           t: float) -> tuple[np.ndarray, dict[int, np.ndarray]]:
    """Diagonal and off-diagonal bands of the weighted reduced matrix.

    Band key is row - column; positive keys sit below the diagonal.
    Entries are exact per-kind formulas (no dense similarity transform),
    including the tail corrections that truncation introduces in the last
    columns of the batch kinds.
    """
    if spec.kind not in WEIGHTED_KINDS:
        raise CertificateError(
            f"weighted reduction is defined for kinds {WEIGHTED_KINDS}, "
            f"not {spec.kind!r}")
    n = spec.n
    d = w.values
    if len(d) != n:
        raise CertificateError(f"need {n} weights, got {len(d)}")
    bands: dict[int, np.ndarray] = {}

    if spec.kind == "birth-death":
        lam = spec.births.values(t)
        mu = spec.deaths.values(t)
        diag = -(lam + mu)
        if n > 1:
            bands[1] = (d[1:] / d[:-1]) * lam[1:]
            bands[-1] = (d[:-1] / d[1:]) * mu[:-1]
        return diag, bands

    if spec.kind == "batch-arrival":
        a, top = _batch_scalars(spec.arrival_batches, n, t)
        cum_a = np.cumsum(a)
        mu = spec.services.values(t)
        diag = -(mu + cum_a[1:][::-1])
        if n > 1:
            bands[-1] = (d[:-1] / d[1:]) * mu[:-1]
        for o in range(1, min(top + 1, n)):
            bands[o] = (d[o:] / d[:n - o]) * (a[o] - a[o + 1:][::-1])
        return diag, bands

    if spec.kind == "batch-service":
        lam = spec.births.values(t)
        b, top = _batch_scalars(spec.service_batches, n, t)
        cum_b = np.cumsum(b)
        diag = -(lam + cum_b[1:])
        if n > 1:
            bands[1] = (d[1:] / d[:-1]) * lam[1:]
        for o in range(1, min(top + 1, n)):
            bands[-o] = (d[:n - o] / d[o:]) * (b[o] - b[o + 1:])
        return diag, bands

    a, top_a = _batch_scalars(spec.arrival_batches, n, t)
    b, top_b = _batch_scalars(spec.service_batches, n, t)
    cum_a = np.cumsum(a)
    cum_b = np.cumsum(b)
    diag = -(cum_a[1:][::-1] + cum_b[1:])
    for o in range(1, min(top_a + 1, n)):
        bands[o] = (d[o:] / d[:n - o]) * (a[o] - a[o + 1:][::-1])
    for o in range(1, min(top_b + 1, n)):
        bands[-o] = (d[:n - o] / d[o:]) * (b[o] - b[o + 1:])
    return diag, bands


def weighted_reduced_matrix(spec: ChainSpec, w: WeightSequence,
                            t: float) -> np.ndarray:
    """Dense weighted reduced matrix from the per-kind band formulas."""
    diag, bands = weighted_reduced_bands(spec, w, t)
    n = spec.n
    m = np.diag(diag)
    for k, vals in bands.items():
        idx = np.arange(len(vals))
        if k > 0:
            m[idx + k, idx] = vals
        else:
            m[idx, idx - k] = vals
    return m


def similarity_reduced_matrix(spec: ChainSpec, w: WeightSequence,
                              t: float) -> np.ndarray:
    """Cross-check path: the same matrix via the dense similarity
    transform D B D^{-1} of the reduced system."""
    red = reduced_system_at(spec, t)
    return w.matrix() @ red.matrix @ w.inverse_matrix()


def _column_stats(diag: np.ndarray,
                  bands: dict[int, np.ndarray]) -> tuple[np.ndarray, np.ndarray]:
    """(decay rates, l1 column sums) from a band representation."""
    n = len(diag)
    offabs = np.zeros(n)
    for k, vals in bands.items():
        if k > 0:
            offabs[:len(vals)] += np.abs(vals)
        else:
            offabs[-len(vals):] += np.abs(vals)
    return -(diag + offabs), np.abs(diag) + offabs


def log_norm(m: np.ndarray) -> float:
    """Logarithmic norm induced by the l1 vector norm: the largest column
    sum of (diagonal entry) + (absolute off-diagonal entries)."""
    m = np.asarray(m, dtype=float)
    diag = np.diag(m)
    return float((np.abs(m).sum(axis=0) - np.abs(diag) + diag).max())


def decay_rates_at(spec: ChainSpec, w: WeightSequence, t: float) -> np.ndarray:
    """Per-column exponential decay rates of the weighted reduced matrix;
    their minimum is -log_norm of that matrix."""
    diag, bands = weighted_reduced_bands(spec, w, t)
    rates, _ = _column_stats(diag, bands)
    return rates


def decay_rate_at(spec: ChainSpec, w: WeightSequence, t: float) -> float:
    return float(decay_rates_at(spec, w, t).min())


def decay_rate_fn(spec: ChainSpec, w: WeightSequence) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized t -> overall decay rate, for quadrature."""

    def fn(ts: np.ndarray) -> np.ndarray:
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return np.array([decay_rate_at(spec, w, t) for t in ts])

    return fn


def reduced_norm_at(spec: ChainSpec, w: WeightSequence, t: float) -> float:
    """l1 norm of the weighted reduced matrix at time t."""
    diag, bands = weighted_reduced_bands(spec, w, t)
    _, colsums = _column_stats(diag, bands)
    return float(colsums.max())


def _forcing(spec: ChainSpec, t: float) -> np.ndarray:
    """Reduced-system forcing vector without a full band assembly."""
    f = np.zeros(spec.n)
    if spec.kind in ("birth-death", "batch-service"):
        f[0] = spec.births.first(t)
    else:
        for k, fam in spec.arrival_batches.items():
            f[k - 1] = fam.first(t)
    return f


def forcing_norm_at(spec: ChainSpec, w: WeightSequence, t: float) -> float:
    """Weighted l1 norm of the reduced-system forcing vector at time t."""
    f = spec.bands_at(t).forcing()
    return w.weighted_norm(f)


# ---------------------------------------------------------------------------
# certificates

def peak_deviation(rate: RateFunction, mean: float | None = None,
                   grid: int = ANALYSIS_GRID) -> float:
    """Largest running integral of (rate - periodic mean) over one period.

    exp of this value converts the integral decay e^{-int rate} into the
    exponential-constant form amplitude * e^{-mean (t-s)}.
    """
    if rate.period is None:
        raise ValueError("peak deviation requires a declared period")
    if mean is None:
        mean = periodic_mean(rate)
    return peak_running_integral(rate.values, rate.period, mean, grid)


@dataclass(frozen=True)
class ErgodicityCertificate:
    """Constants witnessing exponential weak ergodicity.

    ``approach == "weighted"``: D-weighted distances contract like
    amplitude * exp(-rate (t-s)).  ``approach == "uniform"``: twice the
    ergodicity coefficient (hence the total-variation distance of any two
    solutions) is bounded by amplitude * exp(-rate (t-s)); amplitude >= 2.
    """

    approach: str
    certified: bool
    amplitude: float
    rate: float
    period_mean: float
    peak_dev: float
    period: float
    grid: int
    min_weight: float | None = None
    weight_state_ratio: float | None = None
    weight_column_norm: float | None = None
    reduced_norm_sup: float | None = None
    forcing_norm_sup: float | None = None

    @property
    def has_mean_bound(self) -> bool:
        return self.weight_state_ratio is not None and self.weight_state_ratio > 0


def _require_period(spec: ChainSpec) -> float:
    if spec.period is None:
        raise CertificateError(
            "certificates are only issued for rates with a declared period")
    return spec.period


def weighted_certificate(spec: ChainSpec, w: WeightSequence,
                         grid: int = ANALYSIS_GRID) -> ErgodicityCertificate:
    """Certificate from the periodic mean of the overall decay rate.

    The mean decay rate over one period is the certified rate; the
    amplitude is exp of the peak running deviation of the decay rate from
    its mean.  A nonpositive mean yields an uncertified result.  The
    reduced-matrix and forcing norms are grid suprema over one period
    (grid plus one refinement), not analytic bounds.
    """
    period = _require_period(spec)
    if spec.kind not in WEIGHTED_KINDS:
        raise CertificateError(f"no weighted certificate for kind {spec.kind!r}")
    ts = doubled_grid(period, grid)
    alphas = np.empty(len(ts))
    b_sup = 0.0
    f_sup = 0.0
    for i, t in enumerate(ts):
        diag, bands = weighted_reduced_bands(spec, w, t)
        rates, colsums = _column_stats(diag, bands)
        alphas[i] = rates.min()
        b_sup = max(b_sup, float(colsums.max()))
        f_sup = max(f_sup, w.weighted_norm(_forcing(spec, t)))
    alpha = decay_rate_fn(spec, w)
    total = simpson_on_grid(alphas, period)
    if total is None:
        total = adaptive_simpson(alpha, 0.0, period)
    mean = float(total / period)
    peak = float(peak_running_integral(alpha, period, mean, grid, values=alphas))
    return ErgodicityCertificate(
        approach="weighted",
        certified=mean > 0.0,
        amplitude=float(np.exp(peak)),
        rate=mean,
        period_mean=mean,
        peak_dev=peak,
        period=period,
        grid=grid,
        min_weight=w.min_weight,
        weight_state_ratio=w.state_ratio_min,
        weight_column_norm=w.column_norm,
        reduced_norm_sup=b_sup,
        forcing_norm_sup=f_sup,
    )


def uniform_from_weighted(cert: ErgodicityCertificate,
                          w: WeightSequence) -> ErgodicityCertificate:
    """Uniform certificate derived from a weighted one on a finite space:
    amplitude 4 * ||D||_1 * M / d, same rate."""
    if cert.approach != "weighted":
        raise CertificateError("expected a weighted certificate")
    if not cert.certified:
        raise CertificateError("cannot derive uniform constants: not certified")
    c = 4.0 * w.column_norm * cert.amplitude / w.min_weight
    return ErgodicityCertificate(
        approach="uniform",
        certified=True,
        amplitude=c,
        rate=cert.rate,
        period_mean=cert.period_mean,
        peak_dev=cert.peak_dev,
        period=cert.period,
        grid=cert.grid,
        min_weight=cert.min_weight,
        weight_state_ratio=cert.weight_state_ratio,
        weight_column_norm=cert.weight_column_norm,
        reduced_norm_sup=cert.reduced_norm_sup,
        forcing_norm_sup=cert.forcing_norm_sup,
    )


def catastrophe_uniform_certificate(spec: ChainSpec,
                                    grid: int = ANALYSIS_GRID) -> ErgodicityCertificate:
    """Uniform certificate for a catastrophe chain from the floor of the
    direct-to-zero intensities: amplitude 2 e^{peak}, rate = periodic mean
    of the floor."""
    if spec.kind != "catastrophe":
        raise CertificateError("uniform catastrophe certificate needs a "
                               "catastrophe chain")
    period = _require_period(spec)

    def floor_vec(ts):
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
        return np.array([catastrophe_floor_at(spec, t) for t in ts])

    floors = floor_vec(doubled_grid(period, grid))
    total = simpson_on_grid(floors, period)
    if total is None:
        total = adaptive_simpson(floor_vec, 0.0, period)
    mean = float(total / period)
    peak = float(peak_running_integral(floor_vec, period, mean, grid,
                                       values=floors))
    return ErgodicityCertificate(
        approach="uniform",
        certified=mean > 0.0,
        amplitude=float(2.0 * np.exp(peak)),
        rate=mean,
        period_mean=mean,
        peak_dev=peak,
        period=period,
        grid=grid,
    )


def generator_norm_at(chain, t: float) -> float:
    """l1 norm of the full generator slice; equals twice the largest
    diagonal magnitude because columns sum to zero."""
    return float(2.0 * np.abs(chain.bands_at(t).diag).max())
