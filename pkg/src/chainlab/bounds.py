"""Closed-form security quantities and probability bounds.

Everything here is an exact, pure formula evaluation: the propagation
discount ``g``, the typicality exponent rate ``eta`` and prefactor ``mu``,
the rate-admissibility margin, interval event bounds, the confirmation
depth bound, and the two voting-protocol confirmation formulas
(leader-height and transaction wait times).

Bounds that evaluate to 1 or more are reported with a ``vacuous`` flag
rather than clamped.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

__all__ = [
    "DELTA_TYP_MAX",
    "DerivedParams",
    "Admissibility",
    "EventBounds",
    "InvalidDelta",
    "EpsilonTooLarge",
    "derive",
    "admissible",
    "event_bounds",
    "depth_bound",
    "prism_leader_time",
    "prism_tx_time",
    "reference_notes",
]

# Upper end of the open interval the typicality factor must lie in.
DELTA_TYP_MAX = 40.0 / 81.0


class InvalidDelta(ValueError):
    """Typicality factor outside (0, 40/81)."""


class EpsilonTooLarge(ValueError):
    """Failure budget too large for a confirmation formula's precondition."""


@dataclass(frozen=True)
class DerivedParams:
    """Quantities derived from (alpha, delta_net, delta_typ).

    g            propagation discount exp(-alpha * delta_net)
    eta          exponent rate delta_typ^2 * g^2 * alpha
    mu           typicality prefactor 9 * exp(2*eta/27) / (1 - exp(-eta/27))^2
    growth_coeff chain growth coefficient 1 - 41*delta_typ/40
    """

    g: float
    eta: float
    mu: float
    growth_coeff: float

    def with_mu(self, mu: float) -> "DerivedParams":
        """Copy with a substituted prefactor (for published-figure comparisons)."""
        return replace(self, mu=mu)


@dataclass(frozen=True)
class Admissibility:
    """Result of the rate-admissibility test."""

    ok: bool
    lhs: float


@dataclass(frozen=True)
class EventBounds:
    """Failure-probability upper bounds for the interval events."""

    good: float
    typical: float
    good_vacuous: bool
    typical_vacuous: bool


def _check_delta(delta_typ: float) -> None:
    if not (0.0 < delta_typ < DELTA_TYP_MAX):
        raise InvalidDelta(
            f"typicality factor must lie in (0, 40/81); got {delta_typ!r}"
        )


def derive(alpha: float, delta_net: float, delta_typ: float) -> DerivedParams:
    """Evaluate the four derived quantities exactly.

    ``alpha`` is the honest mining rate per chain, ``delta_net`` the
    propagation delay bound, ``delta_typ`` the typicality factor.
    """
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    if delta_net < 0:
        raise ValueError("delta_net must be non-negative")
    _check_delta(delta_typ)
    g = math.exp(-alpha * delta_net)
    eta = delta_typ * delta_typ * g * g * alpha
    mu = 9.0 * math.exp(2.0 * eta / 27.0) / (1.0 - math.exp(-eta / 27.0)) ** 2
    growth_coeff = 1.0 - 41.0 * delta_typ / 40.0
    return DerivedParams(g=g, eta=eta, mu=mu, growth_coeff=growth_coeff)


def admissible(alpha: float, beta: float, delta_net: float, delta_typ: float) -> Admissibility:
    """Check (1 - 81*delta/40) * g^2 * alpha > beta, strictly.

    Reported, never enforced: attack experiments deliberately run
    inadmissible settings.
    """
    _check_delta(delta_typ)
    g = math.exp(-alpha * delta_net)
    lhs = (1.0 - 81.0 * delta_typ / 40.0) * g * g * alpha
    return Admissibility(ok=lhs > beta, lhs=lhs)


def event_bounds(derived: DerivedParams, s: float, t: float) -> EventBounds:
    """Failure-probability bounds for the good and typical events on (s, t].

    good    = 9 * exp(-eta*(t-s)/24)
    typical = mu * exp(-eta*(t-s)/27)
    """
    if not t > s:
        raise ValueError("need t > s")
    dt = t - s
    good = 9.0 * math.exp(-derived.eta * dt / 24.0)
    typical = derived.mu * math.exp(-derived.eta * dt / 27.0)
    return EventBounds(
        good=good,
        typical=typical,
        good_vacuous=good >= 1.0,
        typical_vacuous=typical >= 1.0,
    )


def depth_bound(derived: DerivedParams, alpha: float, k: int, delta_net: float) -> float:
    """Failure bound for a k-deep confirmation: mu * exp(-(eta/27)*(k/(2*alpha) - 2*delta_net)).

    Meaningful (below mu) only when k/(2*alpha) > 2*delta_net.
    """
    if k <= 0:
        raise ValueError("k must be a positive integer")
    return derived.mu * math.exp(-(derived.eta / 27.0) * (k / (2.0 * alpha) - 2.0 * delta_net))


def prism_leader_time(
    r_h: float,
    eps: float,
    m: int,
    derived: DerivedParams,
    alpha: float,
    delta_net: float,
) -> float:
    """Time after which a leader-sequence prefix up to a given height is permanent
    except with probability eps.

    ``r_h`` is the first publication time of the height in question. Requires
    eps < m * mu * exp(-3*(1+delta_net)*delta*g^2*alpha), strictly. Returns
    infinity when g = 1 (zero delay makes the denominator degenerate).
    """
    _require_eps(eps, m * _eps_ceiling(derived, alpha, delta_net))
    g, eta, mu, coeff = derived.g, derived.eta, derived.mu, derived.growth_coeff
    denom = coeff * (1.0 - g) * g * alpha
    wait = (54.0 * alpha / eta) * math.log(m * mu / eps) + 4.0 * alpha * delta_net + 1.0
    if denom <= 0.0:
        return math.inf
    return r_h + wait / denom + delta_net


def prism_tx_time(
    r: float,
    eps: float,
    m: int,
    derived: DerivedParams,
    alpha: float,
    delta_net: float,
) -> tuple[int, float]:
    """Confirmation depth and time for a transaction published by time ``r``.

    Returns (k, t) with
      k = ceil((54*alpha/eta) * ln((m+1)*mu/eps) + 4*alpha*delta_net)
      t = r + 2*(k+1) / (growth_coeff^2 * (1-g)^2 * g^2 * alpha) + delta_net
    Requires eps < (m+1) * mu * exp(-3*(1+delta_net)*delta*g^2*alpha), strictly.
    """
    _require_eps(eps, (m + 1) * _eps_ceiling(derived, alpha, delta_net))
    g, eta, mu, coeff = derived.g, derived.eta, derived.mu, derived.growth_coeff
    k = math.ceil((54.0 * alpha / eta) * math.log((m + 1) * mu / eps) + 4.0 * alpha * delta_net)
    denom = coeff * coeff * (1.0 - g) ** 2 * g * g * alpha
    t = math.inf if denom <= 0.0 else r + 2.0 * (k + 1) / denom + delta_net
    return k, t


def _eps_ceiling(derived: DerivedParams, alpha: float, delta_net: float) -> float:
    # delta_typ recovered from eta = delta^2 g^2 alpha
    delta_typ = math.sqrt(derived.eta / (derived.g * derived.g * alpha))
    return derived.mu * math.exp(
        -3.0 * (1.0 + delta_net) * delta_typ * derived.g * derived.g * alpha
    )


def _require_eps(eps: float, ceiling: float) -> None:
    if not 0.0 < eps < ceiling:
        raise EpsilonTooLarge(
            f"eps must lie strictly in (0, {ceiling!r}); got {eps!r}"
        )


# Worked-example point used by the published analysis: alpha = 6/hr,
# delta_net = 2 s = 1/1800 hr, delta_typ = 0.3285, beta up to 2/hr.
_EXAMPLE = (6.0, 1.0 / 1800.0, 0.3285)
_EXAMPLE_ETA = 0.65
_EXAMPLE_MU = 201.8
_EXAMPLE_BETA = 2.0


def reference_notes(alpha: float, beta: float, delta_net: float, delta_typ: float) -> list[str]:
    """Comparison notes against the published worked-example figures.

    Returns an empty list unless the inputs match the worked-example point.
    """
    ea, ed, et = _EXAMPLE
    if not (
        math.isclose(alpha, ea, rel_tol=1e-9)
        and math.isclose(delta_net, ed, rel_tol=1e-6)
        and math.isclose(delta_typ, et, rel_tol=1e-9)
    ):
        return []
    d = derive(alpha, delta_net, delta_typ)
    adm = admissible(alpha, _EXAMPLE_BETA, delta_net, delta_typ)
    notes = [
        f"published eta={_EXAMPLE_ETA} vs formula value {d.eta:.6f}"
        " (published figure matches delta^2*alpha = 0.647474 to two figures only)",
        f"published mu={_EXAMPLE_MU} not reproduced: formula evaluates to {d.mu:.6g}",
        f"published claim that delta={et} satisfies the rate condition at beta="
        f"{_EXAMPLE_BETA}: computed lhs {adm.lhs:.6f} is below {_EXAMPLE_BETA}",
    ]
    return notes
