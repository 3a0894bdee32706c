"""Polynomial NARX terms, candidate pools, model structures and static curves.

A term is a product of lagged output and input factors, e.g. ``y(k-1)u(k-2)^2``.
Terms with ``p`` output factors and ``m`` input factors belong to the term
cluster ``(p, m)``.  Summing the coefficients of a model inside each cluster
gives the cluster coefficients, from which the steady-state (static) relation
of the model follows directly when the output enters only linearly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations_with_replacement
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import DegenerateStaticGain, NotStaticPolynomial

DEGENERATE_GAIN_TOL = 1e-9


class ClusterLabel(NamedTuple):
    """Output degree ``p`` and input degree ``m`` of a term cluster."""

    p: int
    m: int

    def __str__(self) -> str:
        if self.p == 0 and self.m == 0:
            return "Omega_0"
        parts = []
        if self.p:
            parts.append("y" if self.p == 1 else f"y^{self.p}")
        if self.m:
            parts.append("u" if self.m == 1 else f"u^{self.m}")
        return "Omega_" + "".join(parts)


@dataclass(frozen=True)
class TermSpec:
    """One candidate regressor.

    ``output_lags`` holds one entry per output factor, so ``y(k-2)^2`` is
    ``(2, 2)``.  Lags are stored sorted, which makes equality of two terms the
    same as equality of the underlying monomials.
    """

    output_lags: tuple[int, ...] = ()
    input_lags: tuple[int, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "output_lags", tuple(sorted(int(l) for l in self.output_lags)))
        object.__setattr__(self, "input_lags", tuple(sorted(int(l) for l in self.input_lags)))
        if any(l < 1 for l in self.output_lags + self.input_lags):
            raise ValueError(f"lags must be positive, got {self.output_lags}/{self.input_lags}")

    @property
    def is_constant(self) -> bool:
        return not self.output_lags and not self.input_lags

    @property
    def degree(self) -> int:
        return len(self.output_lags) + len(self.input_lags)

    @cached_property
    def label(self) -> ClusterLabel:
        return ClusterLabel(len(self.output_lags), len(self.input_lags))

    @property
    def max_lag(self) -> int:
        return max(self.output_lags + self.input_lags, default=0)

    def sort_key(self):
        return (self.degree, self.label, self.output_lags, self.input_lags)

    def to_dict(self) -> dict:
        return {"y_lags": list(self.output_lags), "u_lags": list(self.input_lags)}

    @classmethod
    def from_dict(cls, d: dict) -> "TermSpec":
        return cls(tuple(d.get("y_lags", ())), tuple(d.get("u_lags", ())))

    def __str__(self) -> str:
        if self.is_constant:
            return "1"
        out = []
        for name, lags in (("y", self.output_lags), ("u", self.input_lags)):
            for lag in sorted(set(lags), reverse=True):
                power = lags.count(lag)
                out.append(f"{name}(k-{lag})" + (f"^{power}" if power > 1 else ""))
        return "".join(out)


def term(y: Iterable[int] = (), u: Iterable[int] = ()) -> TermSpec:
    """Shorthand constructor: ``term(y=[1], u=[2, 2])`` is y(k-1)u(k-2)^2."""
    return TermSpec(tuple(y), tuple(u))


def classify(t: TermSpec) -> ClusterLabel:
    return t.label


@dataclass(frozen=True)
class PoolConfig:
    n_u: int
    n_y: int
    n_l: int

    def __post_init__(self):
        for name in ("n_u", "n_y", "n_l"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")

    @property
    def max_lag(self) -> int:
        return max(self.n_u, self.n_y)


def term_count(config: PoolConfig) -> int:
    """Closed-form number of candidate terms for a full polynomial NARX pool."""
    n_prev, total = 1, 1
    for i in range(1, config.n_l + 1):
        n_prev = n_prev * (config.n_y + config.n_u + i - 1) // i
        total += n_prev
    return total


@dataclass(frozen=True)
class TermPool:
    terms: tuple[TermSpec, ...]
    config: PoolConfig
    _index: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        object.__setattr__(self, "terms", terms)
        index = {t: i for i, t in enumerate(terms)}
        if len(index) != len(terms):
            raise ValueError("duplicate terms in pool")
        for t in terms:
            if t.degree > self.config.n_l or any(l > self.config.n_y for l in t.output_lags) \
                    or any(l > self.config.n_u for l in t.input_lags):
                raise ValueError(f"term {t} outside pool configuration {self.config}")
        object.__setattr__(self, "_index", index)

    def __len__(self) -> int:
        return len(self.terms)

    def __iter__(self):
        return iter(self.terms)

    def __getitem__(self, i: int) -> TermSpec:
        return self.terms[i]

    def __contains__(self, t: TermSpec) -> bool:
        return t in self._index

    def index(self, t: TermSpec) -> int:
        try:
            return self._index[t]
        except KeyError:
            raise KeyError(f"term {t} not in pool") from None

    def labels(self) -> list[ClusterLabel]:
        return [t.label for t in self.terms]

    def subset(self, keep) -> "TermPool":
        return TermPool(tuple(t for t in self.terms if keep(t)), self.config)

    def to_dict(self) -> dict:
        return {
            "n_u": self.config.n_u,
            "n_y": self.config.n_y,
            "n_l": self.config.n_l,
            "terms": [t.to_dict() for t in self.terms],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TermPool":
        config = PoolConfig(int(d["n_u"]), int(d["n_y"]), int(d["n_l"]))
        return cls(tuple(TermSpec.from_dict(t) for t in d["terms"]), config)


def generate_term_pool(config: PoolConfig) -> TermPool:
    """Enumerate every monomial of lagged y/u factors with degree <= n_l.

    Ordering is degree-major, then cluster label, then lag lists, so bit ``i``
    of a genome refers to the same term on every run.
    """
    factors = [("y", lag) for lag in range(1, config.n_y + 1)]
    factors += [("u", lag) for lag in range(1, config.n_u + 1)]
    terms = []
    for degree in range(config.n_l + 1):
        for combo in combinations_with_replacement(factors, degree):
            terms.append(TermSpec(
                tuple(lag for name, lag in combo if name == "y"),
                tuple(lag for name, lag in combo if name == "u"),
            ))
    terms.sort(key=TermSpec.sort_key)
    return TermPool(tuple(terms), config)


def is_static_admissible(label: ClusterLabel) -> bool:
    """True for clusters that keep the static relation polynomial in u.

    Nonlinear output clusters (p >= 2) and cross-term clusters (p >= 1,
    m >= 1) are excluded.
    """
    return label.p == 0 or (label.p == 1 and label.m == 0)


def prune_pool(pool: TermPool) -> TermPool:
    """Drop nonlinear output and input-output cross-term clusters."""
    return pool.subset(lambda t: is_static_admissible(t.label))


def prune_to_linear(pool: TermPool) -> TermPool:
    """Keep only the constant, linear output and linear input clusters."""
    return pool.subset(lambda t: t.degree <= 1)


PRUNERS = {
    "clusters": prune_pool,
    "linear": prune_to_linear,
    "none": lambda pool: pool,
}


@dataclass(frozen=True, eq=False)
class ModelStructure:
    """A subset of a term pool, optionally with estimated coefficients."""

    pool: TermPool
    selected: tuple[int, ...]
    theta: np.ndarray | None = None

    def __post_init__(self):
        selected = tuple(int(i) for i in self.selected)
        if any(b <= a for a, b in zip(selected, selected[1:])):
            raise ValueError("selected indices must be strictly increasing")
        if selected and (selected[0] < 0 or selected[-1] >= len(self.pool)):
            raise IndexError("selected index outside pool")
        object.__setattr__(self, "selected", selected)
        if self.theta is not None:
            theta = np.array(self.theta, dtype=float)
            theta.setflags(write=False)
            if theta.shape != (len(selected),):
                raise ValueError(f"expected {len(selected)} coefficients, got {theta.shape}")
            object.__setattr__(self, "theta", theta)

    @classmethod
    def from_terms(cls, pool: TermPool, terms: Sequence[TermSpec], theta=None) -> "ModelStructure":
        """Build a structure from terms in any order; coefficients follow the terms."""
        idx = [pool.index(t) for t in terms]
        order = np.argsort(idx, kind="stable")
        if len(set(idx)) != len(idx):
            raise ValueError("repeated term")
        sel = tuple(idx[i] for i in order)
        if theta is not None:
            theta = np.asarray(theta, dtype=float)[order]
        return cls(pool, sel, theta)

    @classmethod
    def from_genome(cls, pool: TermPool, genome) -> "ModelStructure":
        bits = np.asarray(genome, dtype=bool)
        if bits.shape != (len(pool),):
            raise ValueError(f"genome length {bits.shape} does not match pool size {len(pool)}")
        return cls(pool, tuple(np.flatnonzero(bits)))

    @property
    def terms(self) -> list[TermSpec]:
        return [self.pool[i] for i in self.selected]

    @property
    def xi(self) -> int:
        return len(self.selected)

    @property
    def is_estimated(self) -> bool:
        return self.theta is not None

    def genome(self) -> np.ndarray:
        bits = np.zeros(len(self.pool), dtype=bool)
        bits[list(self.selected)] = True
        return bits

    def with_theta(self, theta) -> "ModelStructure":
        return ModelStructure(self.pool, self.selected, theta)

    def __str__(self) -> str:
        if self.theta is None:
            return " + ".join(str(t) for t in self.terms) or "0"
        return " + ".join(f"{c:.6g}*{t}" if not t.is_constant else f"{c:.6g}"
                          for c, t in zip(self.theta, self.terms)) or "0"

    def to_dict(self) -> dict:
        d = self.pool.to_dict()
        d["terms"] = [t.to_dict() for t in self.terms]
        if self.theta is not None:
            d["coefficients"] = [float(c) for c in self.theta]
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, pool: TermPool | None = None) -> "ModelStructure":
        """Rebuild a structure; the pool defaults to the full pool of the stored config."""
        terms = [TermSpec.from_dict(t) for t in d["terms"]]
        if pool is None:
            pool = generate_term_pool(PoolConfig(int(d["n_u"]), int(d["n_y"]), int(d["n_l"])))
        return cls.from_terms(pool, terms, d.get("coefficients"))

    @classmethod
    def from_json(cls, s: str, pool: TermPool | None = None) -> "ModelStructure":
        return cls.from_dict(json.loads(s), pool)


class ClusterCoefficients(dict):
    """Map from :class:`ClusterLabel` to the sum of coefficients in that cluster.

    Absent clusters read as 0.
    """

    def __missing__(self, key):
        return 0.0


def cluster_coefficients(structure: ModelStructure) -> ClusterCoefficients:
    if structure.theta is None:
        raise ValueError("structure has no estimated coefficients")
    sums = ClusterCoefficients()
    for t, c in zip(structure.terms, structure.theta):
        sums[t.label] = sums[t.label] + float(c)
    return sums


@dataclass(frozen=True)
class StaticPolynomial:
    """Steady-state output as a polynomial in the constant input, lowest power first."""

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        if not all(np.isfinite(coeffs)):
            raise ValueError("static polynomial coefficients must be finite")
        object.__setattr__(self, "coefficients", coeffs)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def __call__(self, u_bar):
        return eval_static(self, u_bar)


def static_polynomial(structure: ModelStructure) -> StaticPolynomial:
    """Static relation ``y = a_0 + a_1 u + ... + a_nl u^nl`` of a pruned-pool model.

    ``a_i = S_{u^i} / (1 - S_y)`` where ``S`` are cluster coefficients and
    ``S_{u^0}`` is the constant cluster.

    Raises
    ------
    NotStaticPolynomial
        If the structure uses a nonlinear output or cross-term cluster.
    DegenerateStaticGain
        If ``|1 - S_y| < 1e-9``.
    """
    for t in structure.terms:
        if not is_static_admissible(t.label):
            raise NotStaticPolynomial(f"term {t} has no polynomial steady state")
    sums = cluster_coefficients(structure)
    denom = 1.0 - sums[ClusterLabel(1, 0)]
    if abs(denom) < DEGENERATE_GAIN_TOL:
        raise DegenerateStaticGain(f"1 - sum of output coefficients = {denom:.3g}")
    n_l = structure.pool.config.n_l
    return StaticPolynomial(tuple(sums[ClusterLabel(0, m)] / denom for m in range(n_l + 1)))


def eval_static(poly: StaticPolynomial, u_bar):
    # Horner, highest power first
    u_bar = np.asarray(u_bar, dtype=float)
    acc = np.zeros_like(u_bar)
    for c in reversed(poly.coefficients):
        acc = acc * u_bar + c
    return float(acc) if acc.ndim == 0 else acc


def buck_static_reference(u_bar, V_d: float = 24.0):
    """Ideal buck static curve, ``4 V_d / 3 - (V_d / 3) u``."""
    u_bar = np.asarray(u_bar, dtype=float)
    out = 4.0 * V_d / 3.0 - V_d / 3.0 * u_bar
    return float(out) if out.ndim == 0 else out
