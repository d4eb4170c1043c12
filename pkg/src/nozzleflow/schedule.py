"""Coupled small-viscosity parameter ladders and their certificates.

A ladder couples the viscosity eps_k to the pressure stiffener
delta = eps^q and to the expanding domain (a, b).  The certificate checks,
for every rung, the sampled sup-norm combinations that must stay below a
single budget M for the a-priori bounds to be uniform in eps.  Duct
geometries use the six general-area combinations; the spherical weight
omega_n x^(n-1) with a = eps -> 0 instead satisfies its own constraint
rho_bar^gamma b^n + (delta/eps) b^n <= M, which the certificate checks in
that mode (the general-area combinations involving (A'/A)' diverge toward
the axis and do not apply there).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import ConfigError
from .geometry import NozzleProfile, ProfileKind, make_profile, sample_interval
from .thermo import GasLaw


@dataclass(frozen=True)
class ViscositySchedule:
    """Decreasing viscosities with the coupled delta / domain / far-state rules.

    delta(eps) = eps^q, and the domain is (-1/eps, 1/eps) for ducts or
    (eps, 1/eps) with far density rho_bar(eps) = eps^(n/gamma) in the
    spherical mode.
    """

    eps_list: tuple[float, ...]
    q: float
    beta_max: float = 4.0
    M_budget: float = 10.0
    L0: float = 2.0
    spherical: bool = False
    n_dim: int = 3
    gamma: float = 2.0
    rho_bar_exponent: float = -1.0   # spherical only; default n_dim / gamma

    def __post_init__(self):
        eps = tuple(float(e) for e in self.eps_list)
        if len(eps) == 0:
            raise ConfigError("eps ladder is empty")
        if any(e <= 0 for e in eps) or any(np.diff(eps) >= 0):
            raise ConfigError("eps ladder must be positive and strictly decreasing")
        object.__setattr__(self, "eps_list", eps)
        if self.q <= 0:
            raise ConfigError("delta exponent q must be positive")
        if not self.beta_max > 2.0:
            raise ConfigError("beta must exceed 2")
        if self.rho_bar_exponent < 0.0:
            object.__setattr__(self, "rho_bar_exponent", self.n_dim / self.gamma)
        if not self.spherical:
            for e in eps:
                if abs(self.a_of(e)) <= self.L0 or self.b_of(e) <= self.L0:
                    raise ConfigError(
                        f"domain for eps={e} does not contain [-L0, L0]")

    # -- rules ---------------------------------------------------------------
    def delta_of(self, eps: float) -> float:
        return eps ** self.q

    def a_of(self, eps: float) -> float:
        return eps if self.spherical else -1.0 / eps

    def b_of(self, eps: float) -> float:
        return 1.0 / eps

    def rho_bar_of(self, eps: float) -> float:
        if not self.spherical:
            raise ConfigError("rho_bar rule applies to spherical ladders only")
        return eps ** self.rho_bar_exponent


@dataclass(frozen=True)
class CertificateRow:
    eps: float
    quantities: dict

    def worst(self) -> float:
        return max(self.quantities.values())


@dataclass(frozen=True)
class CertificateReport:
    rows: tuple[CertificateRow, ...]
    max_per_quantity: dict
    M_budget: float
    skipped: tuple[str, ...]
    spherical: bool

    @property
    def passed(self) -> bool:
        return all(v <= self.M_budget for v in self.max_per_quantity.values())

    def failing(self) -> dict:
        return {k: v for k, v in self.max_per_quantity.items()
                if v > self.M_budget}

    def summary(self) -> str:
        lines = [f"schedule certificate ({'spherical' if self.spherical else 'duct'} "
                 f"mode, budget M = {self.M_budget:g}): "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for key, val in sorted(self.max_per_quantity.items()):
            mark = "ok " if val <= self.M_budget else "HIGH"
            lines.append(f"  [{mark}] sup_k {key} = {val:.6g}")
        for key in self.skipped:
            lines.append(f"  [skip] {key}")
        return "\n".join(lines)


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.abs(values)))


def certify(sched: ViscositySchedule, profile: NozzleProfile, g: GasLaw,
            n_samples: int = 10_000) -> CertificateReport:
    """Evaluate the per-rung constraint quantities by sampling on [a, b].

    Duct mode checks, per rung: eps|b-a|; eps sup|(A'/A)'| sup A |b-a|;
    eps sup|A''|; (delta/eps) sup A |a|^beta sup A^((gamma-3)/(gamma-1));
    (delta/eps) sup A |a|; delta sup A |a|^2 sup A^(-4/(2 gamma - 4)) (the
    last is skipped at gamma = 2 where its exponent is singular); plus the
    combined quantity eps (1 + sup|(A'/A)'|) |b - a|.
    Spherical mode checks eps|b-a|, rho_bar^gamma b^n and (delta/eps) b^n.
    """
    rows = []
    skipped: list[str] = []
    mode_spherical = sched.spherical or profile.kind is ProfileKind.SPHERICAL
    for eps in sched.eps_list:
        a, b = sched.a_of(eps), sched.b_of(eps)
        delta = sched.delta_of(eps)
        quant: dict[str, float] = {"eps_domain": eps * abs(b - a)}
        if mode_spherical:
            n = sched.n_dim
            rb = sched.rho_bar_of(eps) if sched.spherical else eps ** (n / g.gamma)
            quant["rho_bar_pressure_volume"] = rb ** g.gamma * b ** n
            quant["delta_volume"] = delta / eps * b ** n
        else:
            xs = sample_interval(a, b, n_samples)
            A = np.asarray(profile.area(xs), dtype=float)
            supA = _sup(A)
            sup_glp = _sup(profile.dlog_prime(xs))
            sup_A2 = _sup(profile.dd_area(xs))
            quant["eps_dlog_prime_area_domain"] = eps * sup_glp * supA * abs(b - a)
            quant["eps_area_second"] = eps * sup_A2
            exp1 = (g.gamma - 3.0) / (g.gamma - 1.0)
            quant["delta_inv_eps_area_abeta"] = (
                delta / eps * supA * abs(a) ** sched.beta_max * _sup(A ** exp1))
            quant["delta_inv_eps_area_a"] = delta / eps * supA * abs(a)
            if abs(g.gamma - 2.0) > 1e-12:
                exp2 = -4.0 / (2.0 * g.gamma - 4.0)
                quant["delta_area_a2_negexp"] = (
                    delta * supA * abs(a) ** 2 * _sup(A ** exp2))
            quant["eq_3_6_combined"] = eps * (1.0 + sup_glp) * abs(b - a)
        rows.append(CertificateRow(eps=eps, quantities=quant))
    if not mode_spherical and abs(g.gamma - 2.0) <= 1e-12:
        skipped.append("delta_area_a2_negexp (exponent -4/(2 gamma - 4) "
                       "singular at gamma = 2)")
    keys = rows[0].quantities.keys()
    max_per = {k: max(r.quantities[k] for r in rows) for k in keys}
    return CertificateReport(rows=tuple(rows), max_per_quantity=max_per,
                             M_budget=sched.M_budget, skipped=tuple(skipped),
                             spherical=mode_spherical)


def make_default(profile: Union[NozzleProfile, str], gamma: float,
                 n_eps: int = 4, eps0: float = 0.1, beta_max: float = 4.0,
                 M_budget: float = 10.0, L0: float = 2.0,
                 n_dim: Optional[int] = None,
                 g: Optional[GasLaw] = None) -> ViscositySchedule:
    """Geometric ladder eps_k = eps0 / 2^k with q chosen so certify passes.

    Starts from the aggressive default q = 1 + beta_max and raises q until
    the certificate clears the budget; a profile that cannot be certified
    with any q <= 12 is rejected.
    """
    if n_eps < 2:
        raise ConfigError("need at least two rungs to compare")
    if isinstance(profile, str):
        profile = make_profile(profile)
    eps = tuple(eps0 * 0.5 ** k for k in range(n_eps))
    spherical = profile.kind is ProfileKind.SPHERICAL
    if n_dim is None:
        n_dim = getattr(profile, "n_dim", 3)
    gas = g or GasLaw(gamma)
    q = 1.0 + beta_max
    while q <= 12.0:
        sched = ViscositySchedule(eps, q=q, beta_max=beta_max,
                                  M_budget=M_budget, L0=L0,
                                  spherical=spherical, n_dim=n_dim,
                                  gamma=gamma)
        if certify(sched, profile, gas).passed:
            return sched
        q += 1.0
    raise ConfigError(
        f"no delta exponent q <= 12 certifies the {profile.kind.value} "
        f"profile against budget M = {M_budget}")
