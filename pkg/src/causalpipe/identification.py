"""Turn a (graph, treatment, outcome) query into every applicable estimand."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

from .errors import GraphError, SearchLimitError
from .graph import (
    MAX_SEARCH_POOL,
    CausalGraph,
    ancestors_of,
    backdoor_holds,
    canonical_backdoor_set,
    descendants_of,
    enumerate_backdoor_sets,
    find_frontdoor_set,
    find_instruments,
    find_mediation,
    is_instrument,
    is_valid_backdoor_set,
    is_valid_frontdoor_set,
)

ESTIMAND_KINDS = ("backdoor", "frontdoor", "iv", "mediation")


def _fmt(names) -> str:
    return "{" + ", ".join(sorted(names)) + "}"


@dataclass(frozen=True)
class Estimand:
    kind: str
    treatment: str
    outcome: str
    adjustment: frozenset = frozenset()
    mediators: frozenset = frozenset()
    instruments: frozenset = frozenset()
    expression: str = field(default="", compare=False)

    def __post_init__(self):
        if self.kind not in ESTIMAND_KINDS:
            raise ValueError(f"estimand kind must be one of {ESTIMAND_KINDS}, got {self.kind!r}")
        if self.treatment == self.outcome:
            raise ValueError("treatment and outcome must differ")
        for name in ("adjustment", "mediators", "instruments"):
            object.__setattr__(self, name, frozenset(getattr(self, name)))
        if self.kind == "iv" and not self.instruments:
            raise ValueError("an iv estimand needs at least one instrument")
        if self.kind in ("frontdoor", "mediation") and not self.mediators:
            raise ValueError(f"a {self.kind} estimand needs at least one mediator")
        if not self.expression:
            object.__setattr__(self, "expression", describe_estimand(self))

    def with_adjustment(self, adjustment) -> "Estimand":
        return Estimand(self.kind, self.treatment, self.outcome, frozenset(adjustment),
                        self.mediators, self.instruments)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "treatment": self.treatment,
            "outcome": self.outcome,
            "adjustment": sorted(self.adjustment),
            "mediators": sorted(self.mediators),
            "instruments": sorted(self.instruments),
            "expression": self.expression,
        }


@dataclass(frozen=True)
class IdentificationResult:
    estimands: tuple = ()
    warnings: tuple = field(default=(), compare=False)

    @property
    def identified(self) -> bool:
        return bool(self.estimands)

    def first(self, kind=None):
        for e in self.estimands:
            if kind is None or e.kind == kind:
                return e
        return None

    def to_dict(self) -> dict:
        return {
            "identified": self.identified,
            "estimands": [e.to_dict() for e in self.estimands],
        }


def describe_estimand(e: Estimand) -> str:
    t, y = e.treatment, e.outcome
    if e.kind == "backdoor":
        if not e.adjustment:
            return f"E[{y}|{t}=1] - E[{y}|{t}=0] with W = {{}} (no adjustment needed)"
        return f"E_W[ E[{y}|{t}=1,W] - E[{y}|{t}=0,W] ] with W = {_fmt(e.adjustment)}"
    if e.kind == "iv":
        return (f"Wald ratio (E[{y}|Z=1] - E[{y}|Z=0]) / (E[{t}|Z=1] - E[{t}|Z=0]) "
                f"with Z = {_fmt(e.instruments)}")
    if e.kind == "frontdoor":
        return (f"stage 1: effect of {t} on M = {_fmt(e.mediators)} (unadjusted); "
                f"stage 2: effect of M on {y} adjusting for {t}; effect = stage 1 x stage 2")
    return (f"NDE = E[{y}|do({t}=1),M({t}=0)] - E[{y}|do({t}=0)], "
            f"NIE = E[{y}|do({t}=1)] - E[{y}|do({t}=1),M({t}=0)] "
            f"with M = {_fmt(e.mediators)}, W = {_fmt(e.adjustment)}")


def verify_estimand(g: CausalGraph, e: Estimand) -> bool:
    """Re-check an estimand's graphical conditions against `g`."""
    t, y = e.treatment, e.outcome
    if e.kind == "backdoor":
        return is_valid_backdoor_set(g, t, y, e.adjustment)
    if e.kind == "frontdoor":
        return is_valid_frontdoor_set(g, t, y, e.mediators)
    if e.kind == "iv":
        return all(is_instrument(g, t, y, z) for z in e.instruments)
    return _mediation_adjustment_ok(g, t, y, e.mediators, e.adjustment)


def _mediation_adjustment_ok(g, t, y, mediators, z) -> bool:
    z = frozenset(z)
    if not mediators or z & mediators:
        return False
    return (
        backdoor_holds(g, {t}, {y}, z)
        and backdoor_holds(g, {t}, mediators, z)
        and backdoor_holds(g, mediators, {y}, z | {t})
    )


def _mediation_adjustment(g, t, y, mediators):
    candidates = ancestors_of(g, {t, y} | mediators) - descendants_of(g, {t}) - {t, y}
    pool = sorted(n for n in candidates if n not in g.latent)
    if len(pool) > MAX_SEARCH_POOL:
        canonical = canonical_backdoor_set(g, t, y)
        return canonical if _mediation_adjustment_ok(g, t, y, mediators, canonical) else None
    for k in range(len(pool) + 1):
        for combo in itertools.combinations(pool, k):
            if _mediation_adjustment_ok(g, t, y, mediators, combo):
                return frozenset(combo)
    return None


def identify_effect(g: CausalGraph, t: str, y: str) -> IdentificationResult:
    """All estimands for the effect of t on y, in fixed priority order:
    minimal back-door sets, front-door, instrumental variables, mediation."""
    g.check(t, y)
    if t == y:
        raise GraphError("treatment and outcome must differ")
    for name in (t, y):
        if name in g.latent:
            raise GraphError(f"{name!r} is latent; treatment and outcome must be observed")
    notes = []
    if y in ancestors_of(g, {t}):
        notes.append(f"{y!r} is an ancestor of {t!r}: the causal effect is structurally zero")

    estimands = []
    try:
        sets = enumerate_backdoor_sets(g, t, y)
    except SearchLimitError as exc:
        canonical = canonical_backdoor_set(g, t, y)
        sets = [canonical] if backdoor_holds(g, {t}, {y}, canonical) else []
        notes.append(f"back-door search limited to the canonical set: {exc}")
    estimands.extend(Estimand("backdoor", t, y, adjustment=z) for z in sets)

    try:
        front = find_frontdoor_set(g, t, y)
    except SearchLimitError as exc:
        front = None
        notes.append(str(exc))
    if front is not None:
        estimands.append(Estimand("frontdoor", t, y, mediators=front))

    instruments = find_instruments(g, t, y)
    if instruments:
        estimands.append(Estimand("iv", t, y, instruments=instruments))

    mediators = find_mediation(g, t, y)
    if mediators and sets:
        z = _mediation_adjustment(g, t, y, mediators)
        if z is not None:
            estimands.append(Estimand("mediation", t, y, adjustment=z, mediators=mediators))

    return IdentificationResult(tuple(estimands), tuple(notes))
