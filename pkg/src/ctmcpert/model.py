"""Markovian queueing chains with time-dependent intensities.

Five structural kinds are supported, all on states 0..n:

* ``birth-death``    — single steps up (birth) and down (death);
* ``batch-arrival``  — arrivals in groups of k at rate a_k(t), served
  one by one at state-dependent rates;
* ``batch-service``  — single arrivals, departures in groups of exactly k
  at rate b_k(t) (a group larger than the current population cannot
  occur);
* ``batch``          — group arrivals and group services combined;
* ``catastrophe``    — any base chain overlaid with direct k -> 0
  transitions from every state.

A countable chain is represented by truncation to 0..n: transitions that
would leave the truncated range are dropped and the diagonal recomputed,
so every slice of the transposed intensity matrix A(t) is a conservative
generator (columns sum to zero, off-diagonal entries nonnegative).

Generators are stored band-wise: the matrix entry A[j+k, j] (an upward
jump of size k) or A[i, i+k] (a downward jump) lives on the band with
offset +k or -k.  Catastrophes add a dense row 0 on top of the bands and
the mass-arrival perturbation adds a dense column 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np

from .quadrature import ANALYSIS_GRID
from .rates import RateFunction

KINDS = ("birth-death", "batch-arrival", "batch-service", "batch", "catastrophe")


class ChainValidationError(ValueError):
    """Raised when a chain definition fails grid validation."""


# ---------------------------------------------------------------------------
# rate families

@dataclass(frozen=True, eq=False)
class RateFamily:
    """A k-indexed family of nonnegative rates.

    Either a shared rate function with per-index multipliers (covers the
    common shapes mu_k(t) = k*mu(t) and min(k, c)*mu(t) compactly) or an
    explicit list of member functions, again with per-member scale
    factors.  ``values(t)`` returns the family evaluated at one time as a
    vector.
    """

    multipliers: np.ndarray
    shared: RateFunction | None = None
    members: tuple[RateFunction, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "multipliers",
                           np.asarray(self.multipliers, dtype=float))
        if (self.shared is None) == (self.members is None):
            raise ValueError("family needs exactly one of shared / members")
        if self.members is not None and len(self.members) != self.count:
            raise ValueError("member count does not match multipliers")

    @property
    def count(self) -> int:
        return len(self.multipliers)

    def values(self, t: float) -> np.ndarray:
        if self.shared is not None:
            return self.multipliers * self.shared(t)
        return self.multipliers * np.array([m(t) for m in self.members])

    def first(self, t: float) -> float:
        """Scalar value of the first member; cheap path for batch rates."""
        if self.shared is not None:
            return float(self.multipliers[0]) * self.shared(t)
        return float(self.multipliers[0]) * self.members[0](t)

    def value_grid(self, ts: np.ndarray) -> np.ndarray:
        """(len(ts), count) matrix of family values."""
        if self.shared is not None:
            return np.outer(self.shared.values(ts), self.multipliers)
        cols = np.stack([m.values(ts) for m in self.members], axis=1)
        return cols * self.multipliers

    def scaled(self, factor: float) -> "RateFamily":
        return replace(self, multipliers=self.multipliers * factor)

    def rescaled_members(self, factors: np.ndarray) -> "RateFamily":
        return replace(self, multipliers=self.multipliers * factors)

    @property
    def rate_functions(self) -> tuple[RateFunction, ...]:
        if self.shared is not None:
            return (self.shared,)
        return self.members


def rate_family(shared: RateFunction | None = None,
                multipliers: Sequence[float] | None = None,
                members: Sequence[RateFunction] | None = None,
                count: int | None = None) -> RateFamily:
    """Build a family; ``count`` sizes the default unit multipliers."""
    if members is not None:
        members = tuple(members)
        mults = np.ones(len(members)) if multipliers is None \
            else np.asarray(multipliers, dtype=float)
        return RateFamily(mults, members=members)
    if shared is None:
        raise ValueError("either shared or members is required")
    if multipliers is None:
        if count is None:
            raise ValueError("count is required with default multipliers")
        multipliers = np.ones(count)
    return RateFamily(np.asarray(multipliers, dtype=float), shared=shared)


# ---------------------------------------------------------------------------
# generator slices

@dataclass
class GeneratorBands:
    """One time slice of A(t) in band form.

    ``bands[k]`` holds the entries with row - column = k (length
    n+1-|k|); ``row0``/``col0`` are optional dense overlays for the top
    row and the first column (index 0 entries unused); ``diag`` restores
    zero column sums.
    """

    n: int
    diag: np.ndarray
    bands: dict[int, np.ndarray]
    row0: np.ndarray | None = None
    col0: np.ndarray | None = None

    def matvec(self, p: np.ndarray) -> np.ndarray:
        def col(v):
            return v if p.ndim == 1 else v[:, None]

        out = col(self.diag) * p
        for k, vals in self.bands.items():
            if k > 0:
                out[k:] += col(vals) * p[:-k]
            else:
                out[:k] += col(vals) * p[-k:]
        if self.row0 is not None:
            out[0] += self.row0[1:] @ p[1:]
        if self.col0 is not None:
            out += col(self.col0) * p[0]
        return out

    def dense(self) -> np.ndarray:
        m = np.zeros((self.n + 1, self.n + 1))
        for k, vals in self.bands.items():
            idx = np.arange(len(vals))
            if k > 0:
                m[idx + k, idx] += vals
            else:
                m[idx, idx - k] += vals
        if self.row0 is not None:
            m[0, 1:] += self.row0[1:]
        if self.col0 is not None:
            m[1:, 0] += self.col0[1:]
        m[np.arange(self.n + 1), np.arange(self.n + 1)] = self.diag
        return m

    def column_offdiag_sums(self) -> np.ndarray:
        """Per-column sums of the off-diagonal entries (all nonnegative)."""
        s = np.zeros(self.n + 1)
        for k, vals in self.bands.items():
            if k > 0:
                s[:len(vals)] += vals
            else:
                s[-len(vals):] += vals
        if self.row0 is not None:
            s[1:] += self.row0[1:]
        if self.col0 is not None:
            s[0] += self.col0[1:].sum()
        return s

    def forcing(self) -> np.ndarray:
        """Column 0 without its diagonal entry: the vector (A[1,0], ..., A[n,0])."""
        f = np.zeros(self.n)
        for k, vals in self.bands.items():
            if k > 0:
                f[k - 1] += vals[0]
        if self.col0 is not None:
            f += self.col0[1:]
        return f


def _finish_bands(n: int, bands: dict[int, np.ndarray],
                  row0: np.ndarray | None, col0: np.ndarray | None) -> GeneratorBands:
    gb = GeneratorBands(n, np.zeros(n + 1), bands, row0, col0)
    gb.diag = -gb.column_offdiag_sums()
    return gb


# ---------------------------------------------------------------------------
# chain definitions

@dataclass(frozen=True, eq=False)
class ChainSpec:
    """An inhomogeneous chain of one of the five structural kinds.

    Immutable; generator slices are pure functions of (spec, t) and safe
    to evaluate concurrently.
    """

    kind: str
    n: int
    truncated: bool = False
    period: float | None = None
    births: RateFamily | None = None          # birth-death, batch-service
    deaths: RateFamily | None = None          # birth-death
    services: RateFamily | None = None        # batch-arrival
    arrival_batches: Mapping[int, RateFamily] = field(default_factory=dict)
    service_batches: Mapping[int, RateFamily] = field(default_factory=dict)
    base: "ChainSpec | None" = None           # catastrophe
    catastrophes: RateFamily | None = None    # catastrophe
    declared_bound: float | None = None
    validation_grid: int = ANALYSIS_GRID

    @property
    def size(self) -> int:
        return self.n + 1

    def _offdiag(self, t: float) -> tuple[dict[int, np.ndarray], np.ndarray | None,
                                          np.ndarray | None]:
        n = self.n
        if self.kind == "catastrophe":
            bands, row0, col0 = self.base._offdiag(t)
            extra = np.zeros(n + 1)
            extra[1:] = self.catastrophes.values(t)
            row0 = extra if row0 is None else row0 + extra
            return bands, row0, col0
        bands: dict[int, np.ndarray] = {}
        if self.kind == "birth-death":
            bands[1] = self.births.values(t)
            bands[-1] = self.deaths.values(t)
        elif self.kind == "batch-arrival":
            for k, fam in self.arrival_batches.items():
                bands[k] = np.full(n + 1 - k, float(fam.values(t)[0]))
            bands[-1] = self.services.values(t)
        elif self.kind == "batch-service":
            bands[1] = self.births.values(t)
            for k, fam in self.service_batches.items():
                bands[-k] = np.full(n + 1 - k, float(fam.values(t)[0]))
        elif self.kind == "batch":
            for k, fam in self.arrival_batches.items():
                bands[k] = np.full(n + 1 - k, float(fam.values(t)[0]))
            for k, fam in self.service_batches.items():
                bands[-k] = np.full(n + 1 - k, float(fam.values(t)[0]))
        else:
            raise ValueError(f"unknown chain kind {self.kind!r}")
        return bands, None, None

    def bands_at(self, t: float) -> GeneratorBands:
        bands, row0, col0 = self._offdiag(t)
        return _finish_bands(self.n, bands, row0, col0)

    def rate_slots(self) -> list[tuple[str, RateFamily]]:
        """All rate families, named by their structural role."""
        slots = []
        if self.kind == "catastrophe":
            slots.extend(self.base.rate_slots())
            slots.append(("catastrophe", self.catastrophes))
            return slots
        for name in ("births", "deaths", "services"):
            fam = getattr(self, name)
            if fam is not None:
                slots.append((name.rstrip("s"), fam))
        for k, fam in sorted(self.arrival_batches.items()):
            slots.append((f"arrival[{k}]", fam))
        for k, fam in sorted(self.service_batches.items()):
            slots.append((f"service[{k}]", fam))
        return slots

    def _replace_slots(self, new: Mapping[str, RateFamily]) -> "ChainSpec":
        kw = {}
        if self.kind == "catastrophe":
            base_new = {k: v for k, v in new.items() if k != "catastrophe"}
            kw["base"] = self.base._replace_slots(base_new)
            if "catastrophe" in new:
                kw["catastrophes"] = new["catastrophe"]
        else:
            for name in ("births", "deaths", "services"):
                slot = name.rstrip("s")
                if slot in new:
                    kw[name] = new[slot]
            for coll, prefix in (("arrival_batches", "arrival"),
                                 ("service_batches", "service")):
                batches = dict(getattr(self, coll))
                changed = False
                for k in batches:
                    slot = f"{prefix}[{k}]"
                    if slot in new:
                        batches[k] = new[slot]
                        changed = True
                if changed:
                    kw[coll] = batches
        return replace(self, **kw)

    @cached_property
    def l_bound(self) -> float:
        """Grid supremum of |A_kk(t)| (the validated intensity bound)."""
        return _validate_chain(self)


@dataclass(frozen=True, eq=False)
class MassArrivalChain:
    """A chain perturbed by jumps from the empty state to every state k at
    rate eps/(k(k+1)).

    On the truncated range the tail rate sum(eps/(k(k+1)), k >= n) = eps/n
    is assigned to the top state, so the outflow rate from state 0 gains
    exactly eps and the stationary balance across every interior cut is
    the same as for the countable chain.
    """

    base: ChainSpec
    eps: float

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("mass-arrival magnitude must be nonnegative")

    @property
    def n(self) -> int:
        return self.base.n

    @property
    def size(self) -> int:
        return self.base.size

    @property
    def period(self) -> float | None:
        return self.base.period

    @property
    def kind(self) -> str:
        return "mass-arrival-perturbed"

    @cached_property
    def _col0(self) -> np.ndarray:
        n = self.n
        col = np.zeros(n + 1)
        ks = np.arange(1, n)
        col[1:n] = self.eps / (ks * (ks + 1.0))
        col[n] = self.eps / n
        return col

    def bands_at(self, t: float) -> GeneratorBands:
        bands, row0, col0 = self.base._offdiag(t)
        extra = self._col0
        col0 = extra if col0 is None else col0 + extra
        return _finish_bands(self.n, bands, row0, col0)

    @cached_property
    def l_bound(self) -> float:
        return self.base.l_bound + self.eps


Chain = ChainSpec | MassArrivalChain


# ---------------------------------------------------------------------------
# validation

def _validation_times(spec: ChainSpec) -> np.ndarray:
    horizon = spec.period if spec.period is not None else 1.0
    return np.linspace(0.0, horizon, spec.validation_grid + 1)


def _validate_family(name: str, fam: RateFamily, ts: np.ndarray):
    if np.any(fam.multipliers < 0):
        raise ChainValidationError(f"{name}: negative multiplier")
    grid = fam.value_grid(ts)
    if not np.all(np.isfinite(grid)):
        raise ChainValidationError(f"{name}: non-finite rate value on the grid")
    if np.any(grid < 0):
        i_t, _ = np.unravel_index(int(np.argmin(grid)), grid.shape)
        raise ChainValidationError(
            f"{name}: negative rate value at t={ts[i_t]}")


def _validate_chain(spec: ChainSpec) -> float:
    ts = _validation_times(spec)
    for name, fam in spec.rate_slots():
        _validate_family(name, fam, ts)
    sup = 0.0
    for t in ts:
        sup = max(sup, float(np.abs(spec.bands_at(t).diag).max()))
    if spec.declared_bound is not None and sup > spec.declared_bound * (1 + 1e-12):
        raise ChainValidationError(
            f"declared intensity bound {spec.declared_bound} exceeded: "
            f"grid supremum {sup}")
    return sup


def _resolve_period(spec: ChainSpec) -> float | None:
    fns: list[RateFunction] = []
    for _, fam in spec.rate_slots():
        fns.extend(fam.rate_functions)
    declared = {f.period for f in fns if f.period is not None}
    if len(declared) > 1:
        raise ChainValidationError(f"conflicting declared periods {sorted(declared)}")
    if not declared:
        return None
    period = declared.pop()
    for f in fns:
        if f.period is None and not f.time_invariant:
            raise ChainValidationError(
                "time-dependent rate without a declared period in a periodic chain")
    return period


def _built(spec: ChainSpec) -> ChainSpec:
    spec = replace(spec, period=_resolve_period(spec))
    spec.l_bound  # eager validation
    return spec


def _family_arg(fam, count: int, name: str) -> RateFamily:
    if isinstance(fam, RateFamily):
        if fam.count != count:
            raise ChainValidationError(
                f"{name}: family covers {fam.count} indices, need {count}")
        return fam
    if isinstance(fam, RateFunction):
        return rate_family(shared=fam, count=count)
    if isinstance(fam, (list, tuple)):
        if len(fam) != count:
            raise ChainValidationError(
                f"{name}: {len(fam)} rates given, need {count}")
        return rate_family(members=fam)
    raise TypeError(f"{name}: expected RateFamily, RateFunction or sequence")


def _batch_arg(batches: Mapping[int, RateFunction], n: int,
               name: str) -> dict[int, RateFamily]:
    out = {}
    for k, fn in batches.items():
        if not 1 <= k <= n:
            raise ChainValidationError(f"{name}: batch size {k} outside 1..{n}")
        out[k] = fn if isinstance(fn, RateFamily) else rate_family(shared=fn, count=1)
    return out


# ---------------------------------------------------------------------------
# builders

def birth_death_chain(births, deaths, size: int, truncated: bool = False,
                      declared_bound: float | None = None,
                      validation_grid: int = ANALYSIS_GRID) -> ChainSpec:
    """Chain with single births (rate family on states 0..n-1) and single
    deaths (family on states 1..n)."""
    n = size - 1
    spec = ChainSpec(kind="birth-death", n=n, truncated=truncated,
                     births=_family_arg(births, n, "births"),
                     deaths=_family_arg(deaths, n, "deaths"),
                     declared_bound=declared_bound,
                     validation_grid=validation_grid)
    return _built(spec)


def batch_arrival_chain(arrival_batches: Mapping[int, RateFunction], services,
                        size: int, truncated: bool = False,
                        declared_bound: float | None = None,
                        validation_grid: int = ANALYSIS_GRID) -> ChainSpec:
    """Group arrivals (size k at rate a_k(t)) with one-by-one service at
    state-dependent rates (family on states 1..n)."""
    n = size - 1
    spec = ChainSpec(kind="batch-arrival", n=n, truncated=truncated,
                     arrival_batches=_batch_arg(arrival_batches, n, "arrivals"),
                     services=_family_arg(services, n, "services"),
                     declared_bound=declared_bound,
                     validation_grid=validation_grid)
    return _built(spec)


def batch_service_chain(births, service_batches: Mapping[int, RateFunction],
                        size: int, truncated: bool = False,
                        declared_bound: float | None = None,
                        validation_grid: int = ANALYSIS_GRID) -> ChainSpec:
    """Single arrivals with group service of exact size k at rate b_k(t)."""
    n = size - 1
    spec = ChainSpec(kind="batch-service", n=n, truncated=truncated,
                     births=_family_arg(births, n, "births"),
                     service_batches=_batch_arg(service_batches, n, "services"),
                     declared_bound=declared_bound,
                     validation_grid=validation_grid)
    return _built(spec)


def batch_chain(arrival_batches: Mapping[int, RateFunction],
                service_batches: Mapping[int, RateFunction],
                size: int, truncated: bool = False,
                declared_bound: float | None = None,
                validation_grid: int = ANALYSIS_GRID) -> ChainSpec:
    """Group arrivals and group services combined."""
    n = size - 1
    spec = ChainSpec(kind="batch", n=n, truncated=truncated,
                     arrival_batches=_batch_arg(arrival_batches, n, "arrivals"),
                     service_batches=_batch_arg(service_batches, n, "services"),
                     declared_bound=declared_bound,
                     validation_grid=validation_grid)
    return _built(spec)


def catastrophe_chain(base: ChainSpec, catastrophes,
                      declared_bound: float | None = None) -> ChainSpec:
    """Overlay direct k -> 0 transitions (family on states 1..n) on any
    base chain; the diagonal is recomputed so columns still sum to zero."""
    if isinstance(base, MassArrivalChain):
        raise TypeError("catastrophes must be overlaid on a structural chain")
    spec = ChainSpec(kind="catastrophe", n=base.n, truncated=base.truncated,
                     base=base,
                     catastrophes=_family_arg(catastrophes, base.n, "catastrophes"),
                     declared_bound=declared_bound,
                     validation_grid=base.validation_grid)
    return _built(spec)


# ---------------------------------------------------------------------------
# derived slices

@dataclass(frozen=True)
class GeneratorSlice:
    """Dense A(t) at a fixed time, with the banded original attached."""

    t: float
    matrix: np.ndarray
    bands: GeneratorBands


@dataclass(frozen=True)
class ReducedSystem:
    """The system for z = (p_1, ..., p_n) after eliminating p_0:
    dz/dt = matrix @ z + forcing."""

    t: float
    matrix: np.ndarray
    forcing: np.ndarray


@dataclass(frozen=True)
class CatastropheReduction:
    """Kolmogorov system rewritten around the catastrophe floor:
    dp/dt = matrix @ p + forcing with matrix essentially nonnegative."""

    t: float
    matrix: np.ndarray
    forcing: np.ndarray
    floor: float


def generator_at(chain: Chain, t: float) -> GeneratorSlice:
    """Dense transposed intensity matrix at time t."""
    if t < 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    gb = chain.bands_at(t)
    if isinstance(chain, ChainSpec) and chain.declared_bound is not None:
        worst = float(np.abs(gb.diag).max())
        if worst > chain.declared_bound * (1 + 1e-12):
            raise ChainValidationError(
                f"intensity bound violated at t={t}: {worst}")
    return GeneratorSlice(t=t, matrix=gb.dense(), bands=gb)


def reduced_system_at(chain: Chain, t: float) -> ReducedSystem:
    """Eliminate p_0 = 1 - sum(p_i): matrix entries A[i, j] - A[i, 0]."""
    if chain.size < 2:
        raise ValueError("reduced system needs at least two states")
    a = generator_at(chain, t).matrix
    return ReducedSystem(t=t, matrix=a[1:, 1:] - a[1:, :1], forcing=a[1:, 0].copy())


def direct_to_zero_rates(spec: ChainSpec, t: float) -> np.ndarray:
    """The intensities A[0, k] of jumping straight to the empty state,
    indexed by k = 1..n."""
    bands, row0, _ = spec._offdiag(t)
    out = np.zeros(spec.n)
    for k, vals in bands.items():
        if k < 0:
            out[-k - 1] += vals[0]
    if row0 is not None:
        out += row0[1:]
    return out


def catastrophe_floor_at(spec: ChainSpec, t: float) -> float:
    """Smallest direct-to-zero intensity over states 1..n."""
    return float(direct_to_zero_rates(spec, t).min())


def catastrophe_reduction_at(spec: ChainSpec, t: float) -> CatastropheReduction:
    """Subtract the floor from row 0 and move it into a forcing term."""
    if spec.kind != "catastrophe":
        raise ValueError("catastrophe reduction requires a catastrophe chain")
    a = generator_at(spec, t).matrix.copy()
    floor = float(a[0, 1:].min())
    a[0, :] -= floor
    g = np.zeros(spec.size)
    g[0] = floor
    return CatastropheReduction(t=t, matrix=a, forcing=g, floor=floor)


# ---------------------------------------------------------------------------
# perturbations

@dataclass(frozen=True)
class Perturbation:
    """Recipe for a perturbed chain.

    Modes: ``rate-offsets`` (seeded per-rate offsets of magnitude <= eps,
    shaped like the rate itself so nonnegativity survives), ``explicit``
    (replacement rate families), ``mass-arrival`` (jumps from the empty
    state) and ``multiplicative`` (all rates scaled by 1 + eps).
    """

    mode: str
    eps: float = 0.0
    seed: int | None = None
    replacements: Mapping[str, RateFamily] | None = None

    MODES = ("rate-offsets", "explicit", "mass-arrival", "multiplicative")

    def __post_init__(self):
        if self.mode not in self.MODES:
            raise ValueError(f"unknown perturbation mode {self.mode!r}")
        if self.eps < 0:
            raise ValueError("perturbation magnitude must be nonnegative")


def _family_sup(fam: RateFamily, ts: np.ndarray) -> np.ndarray:
    """Per-member grid suprema, used to shape offset draws."""
    return fam.value_grid(ts).max(axis=0)


def _offset_family(fam: RateFamily, eps: float, coeffs: np.ndarray,
                   sups: np.ndarray) -> RateFamily:
    factors = np.ones(fam.count)
    ok = sups > 0
    factors[ok] = 1.0 + coeffs[ok] * eps / sups[ok]
    # a downward offset may not push a small rate negative
    factors = np.maximum(factors, 0.0)
    return fam.rescaled_members(factors)


def perturb(spec: ChainSpec, pert: Perturbation) -> Chain:
    """Apply a perturbation recipe; eps = 0 reproduces the generator
    entrywise for every mode."""
    if pert.mode == "mass-arrival":
        return MassArrivalChain(base=spec, eps=pert.eps)
    if pert.mode == "multiplicative":
        new = {name: fam.scaled(1.0 + pert.eps) for name, fam in spec.rate_slots()}
        return _built(spec._replace_slots(new))
    if pert.mode == "explicit":
        return _built(spec._replace_slots(dict(pert.replacements or {})))
    rng = np.random.default_rng(0 if pert.seed is None else pert.seed)
    ts = _validation_times(spec)
    new = {}
    for name, fam in spec.rate_slots():
        coeffs = rng.uniform(-1.0, 1.0, size=fam.count)
        new[name] = _offset_family(fam, pert.eps, coeffs, _family_sup(fam, ts))
    return _built(spec._replace_slots(new))
