"""The porous-media nonlinearity psi(u) = Phi(u)^2 u and its kappa-regularization."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

KINDS = ("linear", "power_law", "stefan", "table")


@dataclass(frozen=True)
class NonlinearitySpec:
    """Immutable description of psi.

    ``kind`` selects the family:

    * ``linear``     psi(u) = u
    * ``power_law``  psi(u) = u^m on [0, u_max], C^1 linear continuation beyond
    * ``stefan``     psi = 0 on [0, u_c], slope * (u - u_c) afterwards
    * ``table``      piecewise-linear interpolation of sampled (u, psi(u))

    psi is extended to u < 0 as an odd function.
    """

    kind: str
    m: float = 1.0
    u_max: float = 1.0
    u_c: float = 0.0
    slope: float = 1.0
    table_u: tuple = field(default=(), repr=False)
    table_psi: tuple = field(default=(), repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}")
        if self.kind == "power_law":
            if self.m < 1:
                raise ValueError("power_law needs m >= 1 (fast diffusion is not supported)")
            if self.u_max <= 0:
                raise ValueError("power_law needs u_max > 0")
        if self.kind == "stefan" and (self.u_c < 0 or self.slope <= 0):
            raise ValueError("stefan needs u_c >= 0 and slope > 0")
        if self.kind == "table":
            u = np.asarray(self.table_u, dtype=float)
            if len(u) < 2 or u[0] != 0.0 or np.any(np.diff(u) <= 0):
                raise ValueError("table u-samples must start at 0 and increase strictly")
            if len(self.table_psi) != len(u):
                raise ValueError("table needs as many psi samples as u samples")
            object.__setattr__(self, "table_u", tuple(float(x) for x in u))
            object.__setattr__(self, "table_psi", tuple(float(x) for x in self.table_psi))

    # constructors -------------------------------------------------------

    @classmethod
    def linear(cls):
        return cls("linear")

    @classmethod
    def power_law(cls, m, u_max):
        return cls("power_law", m=float(m), u_max=float(u_max))

    @classmethod
    def stefan(cls, u_c, slope=1.0, u_max=None):
        u_max = 2.0 * (u_c + 1.0) if u_max is None else u_max
        return cls("stefan", u_c=float(u_c), slope=float(slope), u_max=float(u_max))

    @classmethod
    def table(cls, u, psi):
        u = np.asarray(u, dtype=float)
        return cls("table", u_max=float(u[-1]), table_u=tuple(u), table_psi=tuple(psi))

    @classmethod
    def table_from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
        data = np.array([[float(a), float(b)] for a, b in rows])
        return cls.table(data[:, 0], data[:, 1])

    def to_params(self):
        out = {"kind": self.kind}
        if self.kind == "power_law":
            out.update(m=self.m, u_max=self.u_max)
        elif self.kind == "stefan":
            out.update(u_c=self.u_c, slope=self.slope, u_max=self.u_max)
        elif self.kind == "table":
            out.update(u=list(self.table_u), psi=list(self.table_psi))
        return out

    @classmethod
    def from_params(cls, params):
        p = dict(params)
        kind = p.pop("kind")
        if kind == "linear":
            return cls.linear()
        if kind == "power_law":
            return cls.power_law(p["m"], p["u_max"])
        if kind == "stefan":
            return cls.stefan(p["u_c"], p.get("slope", 1.0), p.get("u_max"))
        if kind == "table":
            if "path" in p:
                return cls.table_from_csv(p["path"])
            return cls.table(p["u"], p["psi"])
        raise ValueError(f"unknown nonlinearity kind {kind!r}")

    # metadata -----------------------------------------------------------

    @property
    def lipschitz_L(self):
        if self.kind == "linear":
            return 1.0
        if self.kind == "power_law":
            return self.m * self.u_max ** (self.m - 1.0)
        if self.kind == "stefan":
            return self.slope
        u, p = np.asarray(self.table_u), np.asarray(self.table_psi)
        return float(np.max(np.abs(np.diff(p) / np.diff(u))))

    @property
    def alpha(self):
        return 1.0 / self.lipschitz_L

    @property
    def degeneracy_threshold(self):
        return self.u_c if self.kind == "stefan" else 0.0

    @property
    def is_degenerate(self):
        """True when Phi(0+) = 0."""
        return phi_eval(self, 1e-12) < 1e-6

    # raw evaluation on u >= 0 -------------------------------------------

    def _psi_pos(self, u):
        if self.kind == "linear":
            return u.copy()
        if self.kind == "power_law":
            um, m = self.u_max, self.m
            inside = np.minimum(u, um) ** m
            return np.where(u <= um, inside, um**m + m * um ** (m - 1.0) * (u - um))
        if self.kind == "stefan":
            return self.slope * np.maximum(u - self.u_c, 0.0)
        tu, tp = np.asarray(self.table_u), np.asarray(self.table_psi)
        last = (tp[-1] - tp[-2]) / (tu[-1] - tu[-2])
        return np.where(u <= tu[-1], np.interp(u, tu, tp), tp[-1] + last * (u - tu[-1]))

    def _phi2_pos(self, u):
        """Phi^2(u) = psi(u)/u for u > 0, with the limit value at 0."""
        if self.kind == "linear":
            return np.ones_like(u)
        if self.kind == "power_law":
            um, m = self.u_max, self.m
            inside = np.minimum(u, um) ** (m - 1.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                outside = np.where(u > 0, self._psi_pos(np.maximum(u, um)) / np.maximum(u, um), 0.0)
            out = np.where(u <= um, inside, outside)
            return out if m > 1 else np.ones_like(u)
        if self.kind == "stefan":
            with np.errstate(divide="ignore", invalid="ignore"):
                r = np.where(u > self.u_c, self.slope * (u - self.u_c) / np.where(u > self.u_c, u, 1.0), 0.0)
            return r
        tu, tp = np.asarray(self.table_u), np.asarray(self.table_psi)
        first = (tp[1] - tp[0]) / (tu[1] - tu[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            r = np.where(u > 0, self._psi_pos(u) / np.where(u > 0, u, 1.0), first)
        return r


def psi_eval(spec, u):
    u = np.asarray(u, dtype=float)
    a = np.abs(u)
    return np.sign(u) * spec._psi_pos(a) if u.ndim else float(np.sign(u) * spec._psi_pos(a))


def phi_eval(spec, u):
    u = np.abs(np.asarray(u, dtype=float))
    out = np.sqrt(np.maximum(spec._phi2_pos(u), 0.0))
    return out if u.ndim else float(out)


def phi_kappa_eval(spec, kappa, u):
    """sqrt(Phi(u)^2 + kappa)."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    u = np.abs(np.asarray(u, dtype=float))
    out = np.sqrt(np.maximum(spec._phi2_pos(u), 0.0) + kappa)
    return out if u.ndim else float(out)


def psi_kappa_eval(spec, kappa, u):
    """(Phi(u)^2 + kappa) u, i.e. psi(u) + kappa u."""
    if kappa < 0:
        raise ValueError(f"kappa must be >= 0, got {kappa}")
    return psi_eval(spec, u) + kappa * np.asarray(u, dtype=float)


@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.worst = float(self.worst)

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "worst": self.worst}


@dataclass
class ValidationReport:
    kind: str
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c.name for c in self.checks if not c.passed]

    def as_dict(self):
        return {"kind": self.kind, "passed": self.passed,
                "checks": [c.as_dict() for c in self.checks]}


def validate_spec(spec, n_samples=1000):
    """Sample the monotonicity / growth / small-u conditions on [0, u_max].

    Failures are reported, never raised.
    """
    if n_samples < 100:
        raise ValueError("n_samples must be >= 100")
    L = spec.lipschitz_L
    u = np.linspace(0.0, spec.u_max, n_samples)
    p = psi_eval(spec, u)
    checks = []

    checks.append(CheckResult("psi(0) = 0", psi_eval(spec, 0.0) == 0.0, abs(psi_eval(spec, 0.0))))

    drops = -np.diff(p)
    worst = float(max(drops.max(), 0.0))
    checks.append(CheckResult("monotone on [0, u_max]", worst <= 0.0, worst))

    excess = np.abs(p) - L * np.abs(u)
    worst = float(max(excess.max(), 0.0))
    checks.append(CheckResult("|psi(u)| <= L |u|", worst <= 1e-12 * max(1.0, L * spec.u_max), worst))

    small = np.array([1e-3, 1e-4, 1e-5, 1e-6])
    ratios = psi_eval(spec, small) / small
    spread = float(ratios.max() - ratios.min())
    checks.append(CheckResult("psi(u)/u has a limit at 0+", spread < 1e-3 * L, spread))

    uu = u[1:]
    resid = np.abs(phi_eval(spec, uu) ** 2 * uu - psi_eval(spec, uu))
    worst = float(np.max(resid / (1.0 + np.abs(psi_eval(spec, uu)))))
    checks.append(CheckResult("Phi^2 u = psi", worst <= 1e-12, worst))

    phimax = float(np.max(phi_eval(spec, u)))
    checks.append(CheckResult("Phi <= sqrt(L)", phimax <= np.sqrt(L) * (1 + 1e-12),
                              max(phimax - np.sqrt(L), 0.0)))
    return ValidationReport(spec.kind, checks)
