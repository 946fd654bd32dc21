"""
Semilinear terms F(t, x, u) with their first and second u-derivatives.

Every callable takes (t, x, u): t a scalar or array, x the tuple of spatial
coordinate arrays, u an array; results broadcast against u.
"""
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np
from scipy.interpolate import RegularGridInterpolator

logger = logging.getLogger(__name__)

TermFunction = Callable[[Any, Tuple[np.ndarray, ...], np.ndarray], np.ndarray]
CoefficientSpec = Union[float, int, Dict[str, Any]]

FAMILY_NAMES = ("zero", "linear_potential", "cubic_absorbing", "power_law_fnon", "logistic")


@dataclass(frozen=True)
class TermMetadata:
    """Declared hypothesis flags and constants of a semilinear term."""
    satisfies_t1a: bool = False
    satisfies_t1b: bool = False
    kappa0: Optional[float] = None
    mu: Optional[Callable[[np.ndarray], np.ndarray]] = None
    b1: Optional[float] = None
    b2: Optional[float] = None
    odd: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            "satisfies_t1a": self.satisfies_t1a,
            "satisfies_t1b": self.satisfies_t1b,
            "kappa0": self.kappa0,
            "has_mu": self.mu is not None,
            "b1": self.b1,
            "b2": self.b2,
            "odd": self.odd,
        }


@dataclass(frozen=True, eq=False)
class SemilinearTerm:
    """An evaluatable nonlinearity F with derivatives dF/du and d2F/du2."""
    name: str
    f: TermFunction
    du: TermFunction
    d2u: TermFunction
    metadata: TermMetadata = field(default_factory=TermMetadata)
    params: Dict[str, Any] = field(default_factory=dict)

    def __call__(self, t, x, u):
        return self.f(t, x, u)

    def plus(self, other: "SemilinearTerm", weight: float = 1.0) -> "SemilinearTerm":
        """The term F + weight * G."""
        a, b = self, other
        meta_a, meta_b = a.metadata, b.metadata
        kappa0 = None
        if meta_a.kappa0 is not None and meta_b.kappa0 is not None:
            kappa0 = meta_a.kappa0 + abs(weight) * meta_b.kappa0
        mu = None
        if meta_a.mu is not None and meta_b.mu is not None:
            mu = lambda s: meta_a.mu(s) + abs(weight) * meta_b.mu(s)  # noqa: E731
        metadata = TermMetadata(
            satisfies_t1a=meta_a.satisfies_t1a and (meta_b.satisfies_t1a or weight == 0),
            satisfies_t1b=meta_a.satisfies_t1b and (weight == 0 or (weight > 0 and meta_b.satisfies_t1b)),
            kappa0=kappa0,
            mu=mu,
            odd=meta_a.odd and (meta_b.odd or weight == 0),
        )
        return SemilinearTerm(
            name=f"{a.name}+{weight:g}*{b.name}",
            f=lambda t, x, u: a.f(t, x, u) + weight * b.f(t, x, u),
            du=lambda t, x, u: a.du(t, x, u) + weight * b.du(t, x, u),
            d2u=lambda t, x, u: a.d2u(t, x, u) + weight * b.d2u(t, x, u),
            metadata=metadata,
            params={"base": a.params, "other": b.params, "weight": weight},
        )

    def with_bump(self, center: float, width: float, amplitude: float) -> "SemilinearTerm":
        """The term F + amplitude * beta((u - center) / width) with a compactly supported C-infinity beta."""
        if width <= 0:
            raise ValueError(f"bump width must be positive, got {width}")
        base = self

        def profile(u):
            z = (np.asarray(u, dtype=float) - center) / width
            inside = np.abs(z) < 1.0
            zi = np.where(inside, z, 0.0)
            one_minus = 1.0 - zi ** 2
            beta = np.where(inside, np.exp(-1.0 / one_minus), 0.0)
            g1 = -2.0 * zi / one_minus ** 2
            g2 = -2.0 / one_minus ** 2 - 8.0 * zi ** 2 / one_minus ** 3
            return beta, np.where(inside, g1 * beta, 0.0), np.where(inside, (g2 + g1 ** 2) * beta, 0.0)

        metadata = replace(
            base.metadata,
            satisfies_t1a=base.metadata.satisfies_t1a and abs(center) >= width,
            satisfies_t1b=base.metadata.satisfies_t1b and amplitude == 0,
            kappa0=base.metadata.kappa0 if abs(center) >= width else None,
            odd=base.metadata.odd and amplitude == 0,
            b1=None,
            b2=None,
        )
        return SemilinearTerm(
            name=f"{base.name}+bump({center:g},{width:g},{amplitude:g})",
            f=lambda t, x, u: base.f(t, x, u) + amplitude * profile(u)[0],
            du=lambda t, x, u: base.du(t, x, u) + (amplitude / width) * profile(u)[1],
            d2u=lambda t, x, u: base.d2u(t, x, u) + (amplitude / width ** 2) * profile(u)[2],
            metadata=metadata,
            params={"base": base.params, "bump": {"center": center, "width": width, "amplitude": amplitude}},
        )

    def mirrored(self) -> "SemilinearTerm":
        """The term -F(t, x, -u)."""
        base = self
        return SemilinearTerm(
            name=f"mirror({base.name})",
            f=lambda t, x, u: -base.f(t, x, -np.asarray(u)),
            du=lambda t, x, u: base.du(t, x, -np.asarray(u)),
            d2u=lambda t, x, u: -base.d2u(t, x, -np.asarray(u)),
            metadata=base.metadata,
            params={"mirror_of": base.params},
        )


# -- coefficient profiles ---------------------------------------------------

@dataclass(frozen=True)
class Coefficient:
    """A (t, x) coefficient with known range; constant coefficients keep their value."""
    func: Callable[[Any, Tuple[np.ndarray, ...]], np.ndarray]
    lower: float
    upper: float
    constant: Optional[float] = None

    def __call__(self, t, x):
        return self.func(t, x)


def _sine_product(x: Tuple[np.ndarray, ...], length: float) -> np.ndarray:
    out = 1.0
    for xi in x:
        out = out * np.sin(np.pi * np.asarray(xi) / length)
    return out


def _bump_product(x: Tuple[np.ndarray, ...], length: float) -> np.ndarray:
    out = 1.0
    for xi in x:
        z = np.asarray(xi) / length
        out = out * 16.0 * z ** 2 * (1.0 - z) ** 2
    return out


def make_coefficient(spec: CoefficientSpec, name: str = "coefficient") -> Coefficient:
    """
    Parse a coefficient specification.

    A number gives a constant. A dict selects a profile:
    {"profile": "sine" | "bump" | "time_sine", "amplitude": a, "offset": b, "length": L}
    giving b + a * phi(t, x) with phi in [0, 1].
    """
    if isinstance(spec, (int, float)):
        value = float(spec)
        return Coefficient(lambda t, x: value, value, value, constant=value)
    if not isinstance(spec, dict):
        raise ValueError(f"{name}: expected a number or a profile dict, got {spec!r}")
    profile = spec.get("profile", "constant")
    amplitude = float(spec.get("amplitude", 1.0))
    offset = float(spec.get("offset", 0.0))
    length = float(spec.get("length", 1.0))
    if profile == "constant":
        return make_coefficient(offset + amplitude, name)
    if profile == "sine":
        shape = lambda t, x: _sine_product(x, length)  # noqa: E731
    elif profile == "bump":
        shape = lambda t, x: _bump_product(x, length)  # noqa: E731
    elif profile == "time_sine":
        shape = lambda t, x: (0.75 + 0.25 * np.sin(2 * np.pi * np.asarray(t))) * _sine_product(x, length)  # noqa: E731
    else:
        raise ValueError(f"{name}: unknown profile '{profile}'")
    lower = offset + min(0.0, amplitude)
    upper = offset + max(0.0, amplitude)
    return Coefficient(lambda t, x: offset + amplitude * shape(t, x), lower, upper)


# -- builtin families -------------------------------------------------------

def _zero(params: Dict[str, Any]) -> SemilinearTerm:
    zero = lambda t, x, u: np.zeros_like(np.asarray(u, dtype=float))  # noqa: E731
    metadata = TermMetadata(True, True, 0.0, mu=lambda s: np.zeros_like(np.asarray(s, dtype=float)),
                            b1=0.0, b2=0.0, odd=True)
    return SemilinearTerm("zero", zero, zero, zero, metadata, dict(params))


def _linear_potential(params: Dict[str, Any]) -> SemilinearTerm:
    q = make_coefficient(params.get("q", 1.0), "q")
    bound = max(abs(q.lower), abs(q.upper))
    metadata = TermMetadata(
        satisfies_t1a=True,
        satisfies_t1b=True,
        kappa0=abs(q.constant) if q.constant is not None else None,
        mu=lambda s: bound * np.asarray(s, dtype=float),
        b1=max(0.0, -q.lower),
        b2=0.0,
        odd=True,
    )
    return SemilinearTerm(
        "linear_potential",
        f=lambda t, x, u: q(t, x) * u,
        du=lambda t, x, u: q(t, x) * np.ones_like(np.asarray(u, dtype=float)),
        d2u=lambda t, x, u: np.zeros_like(np.asarray(u, dtype=float)),
        metadata=metadata,
        params=dict(params),
    )


def _cubic_absorbing(params: Dict[str, Any]) -> SemilinearTerm:
    c = make_coefficient(params.get("c", 1.0), "c")
    cmax = max(abs(c.lower), abs(c.upper))
    metadata = TermMetadata(
        satisfies_t1a=True,
        satisfies_t1b=c.lower >= 0,
        kappa0=0.0,
        mu=lambda s: cmax * np.asarray(s, dtype=float) ** 3,
        odd=True,
    )
    return SemilinearTerm(
        "cubic_absorbing",
        f=lambda t, x, u: -c(t, x) * u ** 3,
        du=lambda t, x, u: -3.0 * c(t, x) * u ** 2,
        d2u=lambda t, x, u: -6.0 * c(t, x) * u,
        metadata=metadata,
        params=dict(params),
    )


def _logistic(params: Dict[str, Any]) -> SemilinearTerm:
    rho = float(params.get("rho", 1.0))
    capacity = float(params.get("K", 1.0))
    if capacity <= 0:
        raise ValueError(f"logistic capacity K must be positive, got {capacity}")
    metadata = TermMetadata(
        satisfies_t1a=True,
        satisfies_t1b=rho / capacity <= 0,
        kappa0=abs(rho) + 2.0 * abs(rho) / capacity,
        mu=lambda s: abs(rho) * (np.asarray(s, dtype=float) + np.asarray(s, dtype=float) ** 2 / capacity),
    )
    return SemilinearTerm(
        "logistic",
        f=lambda t, x, u: -rho * u * (1.0 - u / capacity),
        du=lambda t, x, u: -rho * (1.0 - 2.0 * u / capacity),
        d2u=lambda t, x, u: (2.0 * rho / capacity) * np.ones_like(np.asarray(u, dtype=float)),
        metadata=metadata,
        params=dict(params),
    )


# Inverse of [[1,1,1],[3,4,5],[6,12,20]]: maps normalized end conditions to
# normalized coefficients (c3 e^3, c4 e^4, c5 e^5) of the join polynomial.
_JOIN_INVERSE = np.array([[10.0, -4.0, 0.5], [-15.0, 7.0, -1.0], [6.0, -3.0, 0.5]])


@dataclass(frozen=True)
class _JoinSide:
    """p(v) = a v + c3 v^3 + c4 v^4 + c5 v^5 on [0, eps1]."""
    a: float
    c3: float
    c4: float
    c5: float

    def values(self, v):
        return self.a * v + self.c3 * v ** 3 + self.c4 * v ** 4 + self.c5 * v ** 5

    def first(self, v):
        return self.a + 3 * self.c3 * v ** 2 + 4 * self.c4 * v ** 3 + 5 * self.c5 * v ** 4

    def second(self, v):
        return 6 * self.c3 * v + 12 * self.c4 * v ** 2 + 20 * self.c5 * v ** 3


def _natural_slope(end: Tuple[float, float, float], eps1: float) -> float:
    """Slope at 0 for which the quintic coefficient vanishes."""
    f0, f1, f2 = end
    m0, m1, m2 = _JOIN_INVERSE[2]
    return (m0 * f0 + m1 * f1 * eps1 + m2 * f2 * eps1 ** 2) / (eps1 * (m0 + m1))


def _join_side(end: Tuple[float, float, float], eps1: float, a: float) -> _JoinSide:
    f0, f1, f2 = end
    rhs = np.array([f0 - a * eps1, (f1 - a) * eps1, f2 * eps1 ** 2])
    c3, c4, c5 = _JOIN_INVERSE @ rhs
    return _JoinSide(a, c3 / eps1 ** 3, c4 / eps1 ** 4, c5 / eps1 ** 5)


def _power_law_fnon(params: Dict[str, Any]) -> SemilinearTerm:
    """
    F = q_plus (1 + |u|)^gamma_plus for u >= eps1 and q_minus (1 + |u|)^gamma_minus
    for u <= -eps1, times the modulation, joined through F(0) = 0 on |u| < eps1.

    A single coefficient q sets the u >= eps1 branch and defaults q_minus to -q,
    so {"q": -1, "gamma": 2, "eps1": 0.5} is -(1 + |u|)^2 for u >= 0.5 with its
    odd mirror below -0.5. On each side the join is a quintic matching value,
    first and second derivative at |u| = eps1, so F is C^2 across |u| = eps1 and
    smooth elsewhere.
    """
    q_plus = float(params.get("q_plus", params.get("q", -1.0)))
    q_minus = float(params.get("q_minus", -q_plus))
    gamma = params.get("gamma", 3.0)
    g_plus = float(params.get("gamma_plus", gamma))
    g_minus = float(params.get("gamma_minus", gamma))
    eps1 = float(params.get("eps1", 1.0))
    modulation = make_coefficient(params.get("modulation", 1.0), "modulation")
    if g_plus < 1 or g_minus < 1:
        raise ValueError(f"power_law_fnon needs gamma >= 1, got ({g_plus}, {g_minus})")
    if q_plus > 0 or q_minus < 0:
        raise ValueError(
            f"power_law_fnon needs q_plus <= 0 <= q_minus, got ({q_plus}, {q_minus}); "
            f"q_plus (alias q) is the u >= eps1 coefficient and q_minus the u <= -eps1 one"
        )
    if eps1 <= 0:
        raise ValueError(f"power_law_fnon needs eps1 > 0, got {eps1}")
    if modulation.lower < 0:
        raise ValueError("power_law_fnon modulation must be non-negative")

    # outer branches and their derivatives at |u| = eps1, in the mirrored variable for u < 0
    base = 1.0 + eps1
    right_end = (q_plus * base ** g_plus, q_plus * g_plus * base ** (g_plus - 1),
                 q_plus * g_plus * (g_plus - 1) * base ** (g_plus - 2))
    left_end = (-q_minus * base ** g_minus, -q_minus * g_minus * base ** (g_minus - 1),
                -q_minus * g_minus * (g_minus - 1) * base ** (g_minus - 2))
    slope = 0.5 * (_natural_slope(right_end, eps1) + _natural_slope(left_end, eps1))
    right = _join_side(right_end, eps1, slope)
    left = _join_side(left_end, eps1, slope)

    def evaluate(u, order):
        u = np.asarray(u, dtype=float)
        m = np.abs(u)
        if order == 0:
            outer_p = q_plus * (1 + m) ** g_plus
            outer_m = q_minus * (1 + m) ** g_minus
            join_p, join_m = right.values(m), -left.values(m)
        elif order == 1:
            outer_p = q_plus * g_plus * (1 + m) ** (g_plus - 1)
            outer_m = -q_minus * g_minus * (1 + m) ** (g_minus - 1)
            join_p, join_m = right.first(m), left.first(m)
        else:
            outer_p = q_plus * g_plus * (g_plus - 1) * (1 + m) ** (g_plus - 2)
            outer_m = q_minus * g_minus * (g_minus - 1) * (1 + m) ** (g_minus - 2)
            join_p, join_m = right.second(m), -left.second(m)
        positive = u >= 0
        inner = m < eps1
        return np.where(inner, np.where(positive, join_p, join_m), np.where(positive, outer_p, outer_m))

    probe = np.linspace(0.0, eps1, 401)
    concave_join = bool(np.all(right.second(probe) <= 1e-12) and np.all(left.second(probe) <= 1e-12))
    join_sup = float(max(np.max(np.abs(right.values(probe))), np.max(np.abs(left.values(probe)))))
    qmax, gmax = max(abs(q_plus), abs(q_minus)), max(g_plus, g_minus)
    linear_growth = g_plus <= 1 and g_minus <= 1
    metadata = TermMetadata(
        satisfies_t1a=True,
        satisfies_t1b=concave_join,
        kappa0=abs(slope) * modulation.constant if modulation.constant is not None else None,
        mu=lambda s: modulation.upper * qmax * (1 + np.asarray(s, dtype=float)) ** gmax + modulation.upper * join_sup,
        b1=2.0 * qmax if linear_growth else None,
        b2=qmax if linear_growth else None,
        odd=bool(np.isclose(q_plus, -q_minus) and np.isclose(g_plus, g_minus)),
    )
    if not concave_join:
        logger.warning(
            f"power_law_fnon join on |u| < {eps1} breaks the sign condition on d2F/du2 "
            f"(needs eps1*(gamma-1) > 1)"
        )
    resolved = {"q_plus": q_plus, "q_minus": q_minus, "gamma_plus": g_plus,
                "gamma_minus": g_minus, "eps1": eps1, "slope_at_zero": slope,
                "modulation": params.get("modulation", 1.0)}
    return SemilinearTerm(
        "power_law_fnon",
        f=lambda t, x, u: modulation(t, x) * evaluate(u, 0),
        du=lambda t, x, u: modulation(t, x) * evaluate(u, 1),
        d2u=lambda t, x, u: modulation(t, x) * evaluate(u, 2),
        metadata=metadata,
        params=resolved,
    )


_FAMILIES: Dict[str, Callable[[Dict[str, Any]], SemilinearTerm]] = {
    "zero": _zero,
    "linear_potential": _linear_potential,
    "cubic_absorbing": _cubic_absorbing,
    "power_law_fnon": _power_law_fnon,
    "logistic": _logistic,
}


def builtin_family(name: str, params: Optional[Dict[str, Any]] = None) -> SemilinearTerm:
    """
    Construct a builtin semilinear term.

    Args:
        name: zero, linear_potential, cubic_absorbing, power_law_fnon or logistic
        params: Family parameters

    Returns:
        The SemilinearTerm with analytic derivatives and metadata
    """
    if name not in _FAMILIES:
        raise ValueError(f"unknown nonlinearity '{name}'; expected one of {FAMILY_NAMES}")
    term = _FAMILIES[name](dict(params or {}))
    logger.debug(f"Built nonlinearity {name} with params {term.params}")
    return term


class TabulatedTerm:
    """
    F supplied on a (t, x..., u) lattice, interpolated multilinearly.

    The u-derivatives are tabulated with numpy.gradient on the same lattice.
    """

    def __init__(self, t: np.ndarray, axes: Tuple[np.ndarray, ...], u: np.ndarray, values: np.ndarray):
        self.t = np.asarray(t, dtype=float)
        self.axes = tuple(np.asarray(a, dtype=float) for a in axes)
        self.u = np.asarray(u, dtype=float)
        self.values = np.asarray(values, dtype=float)
        points = (self.t,) + self.axes + (self.u,)
        expected = tuple(len(p) for p in points)
        if self.values.shape != expected:
            raise ValueError(f"table shape {self.values.shape} does not match lattice {expected}")
        d1 = np.gradient(self.values, self.u, axis=-1)
        d2 = np.gradient(d1, self.u, axis=-1)
        self._interp = [
            RegularGridInterpolator(points, table, method="linear", bounds_error=False, fill_value=None)
            for table in (self.values, d1, d2)
        ]

    @classmethod
    def from_npz(cls, path: Union[str, Path]) -> "TabulatedTerm":
        """Load arrays t, x (and y in 2D), u, F from an .npz archive."""
        with np.load(path) as data:
            axes = tuple(data[k] for k in ("x", "y") if k in data)
            return cls(data["t"], axes, data["u"], data["F"])

    def _evaluate(self, which: int, t, x, u):
        u = np.asarray(u, dtype=float)
        arrays = np.broadcast_arrays(np.asarray(t, dtype=float), *[np.asarray(xi) for xi in x], u)
        shape = arrays[-1].shape
        pts = np.stack([a.ravel() for a in arrays], axis=-1)
        return self._interp[which](pts).reshape(shape)

    def as_term(self, name: str = "tabulated") -> SemilinearTerm:
        zero_row = np.nonzero(np.isclose(self.u, 0.0))[0]
        t1a = bool(zero_row.size and np.max(np.abs(self.values[..., zero_row[0]])) <= 1e-12)
        d2 = np.gradient(np.gradient(self.values, self.u, axis=-1), self.u, axis=-1)
        pos, neg = self.u >= 0, self.u <= 0
        t1b = bool(np.all(d2[..., pos] <= 1e-10) and np.all(d2[..., neg] >= -1e-10))
        metadata = TermMetadata(satisfies_t1a=t1a, satisfies_t1b=t1b)
        return SemilinearTerm(
            name,
            f=lambda t, x, u: self._evaluate(0, t, x, u),
            du=lambda t, x, u: self._evaluate(1, t, x, u),
            d2u=lambda t, x, u: self._evaluate(2, t, x, u),
            metadata=metadata,
            params={"lattice": [len(self.t)] + [len(a) for a in self.axes] + [len(self.u)]},
        )
