"""Data model definitions for the kinetic market laboratory."""

from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..config.constants import BOX_EDGE

ArrayLike = Union[float, Sequence[float], np.ndarray]


@dataclass(frozen=True)
class CompactRateFunction:
    """
    Nonnegative piecewise-linear function of r >= 0 with compact support.

    The tabulation starts at r = 0 and its last value is 0, so the function
    is continuous and vanishes identically on [R0, inf).
    """
    breakpoints: Tuple[float, ...]
    values: Tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(x) for x in self.breakpoints)
        vals = tuple(float(y) for y in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        if len(bp) < 2 or len(bp) != len(vals):
            raise ValueError("Rate function needs at least two breakpoints, one value each")
        if bp[0] != 0.0:
            raise ValueError(f"First breakpoint must be 0, got {bp[0]}")
        if any(b >= c for b, c in zip(bp[:-1], bp[1:])):
            raise ValueError("Breakpoints must be strictly increasing")
        if any(v < 0.0 or not np.isfinite(v) for v in vals):
            raise ValueError("Rate function values must be finite and nonnegative")
        if vals[-1] != 0.0:
            raise ValueError(f"Value at support radius R0={bp[-1]} must be 0, got {vals[-1]}")

    # ---- constructors -------------------------------------------------

    @classmethod
    def zero(cls, radius: float = 1.0) -> "CompactRateFunction":
        """Identically zero function."""
        return cls((0.0, radius), (0.0, 0.0))

    @classmethod
    def box(cls, height: float, radius: float, edge: float = BOX_EDGE) -> "CompactRateFunction":
        """Box of the given height on [0, radius] with a steep linear edge."""
        return cls((0.0, radius - edge, radius), (height, height, 0.0))

    @classmethod
    def ramp(cls, value_at_zero: float, radius: float) -> "CompactRateFunction":
        """Linear decay from value_at_zero at r = 0 to 0 at r = radius."""
        return cls((0.0, radius), (value_at_zero, 0.0))

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "CompactRateFunction":
        """Build from {"breakpoints": [...], "values": [...]}."""
        return cls(tuple(data["breakpoints"]), tuple(data["values"]))

    def to_dict(self) -> Dict[str, Any]:
        """Serialize to the scenario-file representation."""
        return {"breakpoints": list(self.breakpoints), "values": list(self.values)}

    # ---- evaluation ---------------------------------------------------

    @property
    def support_radius(self) -> float:
        """R0, the end of the support."""
        return self.breakpoints[-1]

    @property
    def is_zero(self) -> bool:
        return not any(self.values)

    def _arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        return np.asarray(self.breakpoints), np.asarray(self.values)

    def __call__(self, r: ArrayLike) -> Union[float, np.ndarray]:
        bp, vals = self._arrays()
        out = np.interp(r, bp, vals, left=vals[0], right=0.0)
        return float(out) if np.ndim(out) == 0 else out

    def antiderivative(self, r: ArrayLike) -> Union[float, np.ndarray]:
        """Exact int_0^r of the function (piecewise quadratic)."""
        bp, vals = self._arrays()
        seg = np.diff(bp)
        cum = np.concatenate(([0.0], np.cumsum(0.5 * seg * (vals[:-1] + vals[1:]))))
        x = np.clip(np.asarray(r, dtype=float), 0.0, bp[-1])
        idx = np.clip(np.searchsorted(bp, x, side="right") - 1, 0, bp.size - 2)
        u = x - bp[idx]
        slope = (vals[idx + 1] - vals[idx]) / seg[idx]
        out = cum[idx] + vals[idx] * u + 0.5 * slope * u * u
        return float(out) if np.ndim(out) == 0 else out

    def total(self) -> float:
        """Exact int_0^inf of the function."""
        return float(self.antiderivative(self.support_radius))

    def scaled(self, factor: float) -> "CompactRateFunction":
        """Pointwise multiple of the function."""
        return CompactRateFunction(self.breakpoints, tuple(factor * v for v in self.values))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """
        Draw n radii from the normalized density f / int f.

        Args:
            rng: Random generator
            n: Number of draws

        Returns:
            Array of radii in [0, R0]
        """
        if n <= 0:
            return np.empty(0)
        bp, vals = self._arrays()
        seg = np.diff(bp)
        masses = 0.5 * seg * (vals[:-1] + vals[1:])
        total = masses.sum()
        if total <= 0.0:
            raise ValueError("Cannot sample from a rate function with zero mass")
        idx = rng.choice(masses.size, size=n, p=masses / total)
        target = rng.random(n) * masses[idx]
        y0 = vals[idx]
        slope = (vals[idx + 1] - vals[idx]) / seg[idx]
        # root of y0*u + slope*u^2/2 = target, cancellation-free form
        u = 2.0 * target / (y0 + np.sqrt(np.maximum(y0 * y0 + 2.0 * slope * target, 0.0)))
        return bp[idx] + np.minimum(u, seg[idx])


@dataclass(frozen=True)
class MarketParams:
    """Parameters of one elementary market."""
    v_plus: float
    v_minus: float
    lambda_plus: CompactRateFunction
    lambda_minus: CompactRateFunction
    mu_plus: CompactRateFunction
    mu_minus: CompactRateFunction
    p_plus_minus: Optional[CompactRateFunction] = None
    p_minus_plus: Optional[CompactRateFunction] = None

    @property
    def has_recycling(self) -> bool:
        return self.p_plus_minus is not None or self.p_minus_plus is not None

    def kernel_plus_minus(self) -> CompactRateFunction:
        """p(+,-,r); identically zero when absent."""
        return self.p_plus_minus if self.p_plus_minus is not None else CompactRateFunction.zero()

    def kernel_minus_plus(self) -> CompactRateFunction:
        """p(-,+,r); identically zero when absent."""
        return self.p_minus_plus if self.p_minus_plus is not None else CompactRateFunction.zero()

    def rate_functions(self) -> Tuple[CompactRateFunction, ...]:
        funcs = [self.lambda_plus, self.lambda_minus, self.mu_plus, self.mu_minus]
        funcs.extend(k for k in (self.p_plus_minus, self.p_minus_plus) if k is not None)
        return tuple(funcs)

    @property
    def support_radius(self) -> float:
        """Largest R0 over all rate functions of the market."""
        return max(f.support_radius for f in self.rate_functions())

    def without_recycling(self) -> "MarketParams":
        return MarketParams(
            self.v_plus, self.v_minus,
            self.lambda_plus, self.lambda_minus,
            self.mu_plus, self.mu_minus,
        )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MarketParams":
        def rate(key: str) -> Optional[CompactRateFunction]:
            value = data.get(key)
            return CompactRateFunction.from_dict(value) if value is not None else None

        return cls(
            v_plus=float(data["v_plus"]),
            v_minus=float(data["v_minus"]),
            lambda_plus=rate("lambda_plus"),
            lambda_minus=rate("lambda_minus"),
            mu_plus=rate("mu_plus"),
            mu_minus=rate("mu_minus"),
            p_plus_minus=rate("p_plus_minus"),
            p_minus_plus=rate("p_minus_plus"),
        )

    def to_dict(self) -> Dict[str, Any]:
        out: Dict[str, Any] = {"v_plus": self.v_plus, "v_minus": self.v_minus}
        for key in ("lambda_plus", "lambda_minus", "mu_plus", "mu_minus",
                    "p_plus_minus", "p_minus_plus"):
            value = getattr(self, key)
            if value is not None:
                out[key] = value.to_dict()
        return out


@dataclass(frozen=True)
class VelocityProfile:
    """Boundary trace f(0, v) of a one-particle density, piecewise linear in v."""
    velocities: Tuple[float, ...]
    density: Tuple[float, ...]
    v_bound: float

    def __post_init__(self):
        vs = tuple(float(v) for v in self.velocities)
        ds = tuple(float(d) for d in self.density)
        object.__setattr__(self, "velocities", vs)
        object.__setattr__(self, "density", ds)
        if len(vs) != len(ds) or len(vs) < 2:
            raise ValueError("Velocity profile needs matching samples, at least two")
        if any(a >= b for a, b in zip(vs[:-1], vs[1:])):
            raise ValueError("Velocity samples must be strictly increasing")
        if vs[0] < -self.v_bound or vs[-1] > self.v_bound:
            raise ValueError(f"Velocity samples must lie in [-{self.v_bound}, {self.v_bound}]")
        if any(d < 0.0 for d in ds):
            raise ValueError("Velocity profile must be nonnegative")
        if ds[0] != 0.0 or ds[-1] != 0.0:
            raise ValueError("Velocity profile must vanish at the ends of its tabulation")

    @classmethod
    def zero(cls, v_bound: float) -> "VelocityProfile":
        return cls((-v_bound, v_bound), (0.0, 0.0), v_bound)

    @classmethod
    def delta_like(cls, v: float, weight: float, v_bound: float, width: float = 1e-6) -> "VelocityProfile":
        """Narrow symmetric triangle of total mass `weight` centred at v."""
        peak = weight / width
        return cls((v - width, v, v + width), (0.0, peak, 0.0), v_bound)

    @classmethod
    def uniform(cls, lo: float, hi: float, weight: float, v_bound: float,
                edge: float = BOX_EDGE) -> "VelocityProfile":
        """Approximately uniform mass on [lo, hi] with steep linear edges."""
        height = weight / (hi - lo)
        return cls((lo - edge, lo, hi, hi + edge), (0.0, height, height, 0.0), v_bound)

    @property
    def is_zero(self) -> bool:
        return not any(self.density)

    def __call__(self, v: ArrayLike) -> Union[float, np.ndarray]:
        out = np.interp(v, self.velocities, self.density, left=0.0, right=0.0)
        return float(out) if np.ndim(out) == 0 else out

    def mirrored(self) -> "VelocityProfile":
        """Profile g(v) = f(-v)."""
        return VelocityProfile(
            tuple(-v for v in reversed(self.velocities)),
            tuple(reversed(self.density)),
            self.v_bound,
        )


@dataclass(frozen=True)
class NetworkSpec:
    """
    A set of elementary markets with routing kernels.

    routing_minus_plus[(k, m)] is p_km(-,+,r): annihilated mass of market k
    re-entering the (+)-phase of market m. routing_plus_minus likewise for
    the (-)-phase. Missing pairs are identically zero.
    """
    markets: Tuple[MarketParams, ...]
    routing_minus_plus: Dict[Tuple[int, int], CompactRateFunction] = field(default_factory=dict)
    routing_plus_minus: Dict[Tuple[int, int], CompactRateFunction] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "markets", tuple(self.markets))

    @property
    def size(self) -> int:
        return len(self.markets)

    def kernel_minus_plus(self, k: int, m: int) -> CompactRateFunction:
        return self.routing_minus_plus.get((k, m), CompactRateFunction.zero())

    def kernel_plus_minus(self, k: int, m: int) -> CompactRateFunction:
        return self.routing_plus_minus.get((k, m), CompactRateFunction.zero())

    @classmethod
    def from_market(cls, market: MarketParams) -> "NetworkSpec":
        """One-market network whose self-routing equals the market's recycling kernels."""
        mp = {(0, 0): market.p_minus_plus} if market.p_minus_plus is not None else {}
        pm = {(0, 0): market.p_plus_minus} if market.p_plus_minus is not None else {}
        return cls((market.without_recycling(),), mp, pm)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "NetworkSpec":
        markets = tuple(MarketParams.from_dict(m) for m in data["markets"])
        routing = {"minus_plus": {}, "plus_minus": {}}
        for entry in data.get("routing", []):
            key = (int(entry["source"]), int(entry["target"]))
            routing[entry["kind"]][key] = CompactRateFunction.from_dict(entry["kernel"])
        return cls(markets, routing["minus_plus"], routing["plus_minus"])

    def to_dict(self) -> Dict[str, Any]:
        routing = []
        for kind, table in (("minus_plus", self.routing_minus_plus),
                            ("plus_minus", self.routing_plus_minus)):
            for (k, m), kernel in sorted(table.items()):
                routing.append({"kind": kind, "source": k, "target": m, "kernel": kernel.to_dict()})
        return {"markets": [m.to_dict() for m in self.markets], "routing": routing}


@dataclass(frozen=True)
class InitialDensity:
    """Initial radial densities of both phases and the initial boundary."""
    rho_plus: CompactRateFunction
    rho_minus: CompactRateFunction
    b0: float = 0.0

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "InitialDensity":
        return cls(
            CompactRateFunction.from_dict(data["rho_plus"]),
            CompactRateFunction.from_dict(data["rho_minus"]),
            float(data.get("b0", 0.0)),
        )

    def to_dict(self) -> Dict[str, Any]:
        return {"rho_plus": self.rho_plus.to_dict(), "rho_minus": self.rho_minus.to_dict(), "b0": self.b0}


def eval_rate(f: CompactRateFunction, r: ArrayLike) -> Union[float, np.ndarray]:
    """Evaluate a rate function at radii r >= 0; exactly 0 for r >= R0."""
    return f(r)
