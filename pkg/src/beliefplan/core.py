"""Probabilistic predicate beliefs over scene objects.

A perception front end emits, for every candidate relation between objects,
a confidence in [0, 1] that the relation holds.  This module holds the
symbolic side of that picture: ground predicates, belief states mapping
predicates to confidences, the per-predicate and state-level uncertainty
measures, threshold classification into certain/uncertain partitions, and
the fusion rule used when a fresh observation is folded into an existing
belief state.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Iterator, Mapping


class Relation(Enum):
    """Spatial relation vocabulary emitted by perception."""

    ON = "On"
    LEFT_OF = "LeftOf"
    CLOSE_TO = "CloseTo"
    TOUCHING = "Touching"
    CLEAR = "Clear"

    @property
    def arity(self) -> int:
        return 1 if self is Relation.CLEAR else 2

    @property
    def symmetric(self) -> bool:
        # proximity and contact do not distinguish argument order
        return self in (Relation.CLOSE_TO, Relation.TOUCHING)


_RELATION_BY_NAME = {r.value: r for r in Relation}


@dataclass(frozen=True, order=True)
class GroundPredicate:
    """A relation applied to concrete object ids, e.g. On(a, b).

    Symmetric relations are canonicalized so that the lexicographically
    smaller argument comes first; CloseTo(b, a) and CloseTo(a, b) are the
    same predicate.  Arguments must be distinct and match the relation's
    arity.
    """

    relation: Relation
    args: tuple[str, ...]

    def __init__(self, relation: Relation, args: Iterable[str]):
        args = tuple(args)
        if len(args) != relation.arity:
            raise ValueError(
                f"{relation.value} takes {relation.arity} argument(s), got {len(args)}"
            )
        if len(set(args)) != len(args):
            raise ValueError(f"{relation.value} arguments must be distinct: {args}")
        if relation.symmetric and len(args) == 2 and args[1] < args[0]:
            args = (args[1], args[0])
        object.__setattr__(self, "relation", relation)
        object.__setattr__(self, "args", args)

    def mentions(self, obj: str) -> bool:
        return obj in self.args

    def sort_key(self) -> tuple[str, tuple[str, ...]]:
        return (self.relation.value, self.args)

    def __str__(self) -> str:
        return f"{self.relation.value}({','.join(self.args)})"


_PRED_RE = re.compile(r"^\s*([A-Za-z]+)\s*\(\s*([^()]*?)\s*\)\s*$")


def parse_predicate(text: str) -> GroundPredicate:
    """Parse compact text like ``On(a,b)`` or ``Clear(a)``."""
    m = _PRED_RE.match(text)
    if not m:
        raise ValueError(f"unparseable predicate: {text!r}")
    name, argtext = m.group(1), m.group(2)
    rel = _RELATION_BY_NAME.get(name)
    if rel is None:
        raise ValueError(f"unknown relation {name!r} in {text!r}")
    args = tuple(a.strip() for a in argtext.split(",")) if argtext.strip() else ()
    return GroundPredicate(rel, args)


def _check_confidence(p: float) -> float:
    p = float(p)
    if not (0.0 <= p <= 1.0) or math.isnan(p):
        raise ValueError(f"confidence must lie in [0, 1], got {p}")
    return p


class ProbabilisticState:
    """Immutable map from ground predicates to confidences.

    ``known`` marks predicates whose confidence has already been refined by
    fusion with a repeated observation; classification ignores the flag, it
    exists so downstream consumers can tell first sightings apart.
    """

    __slots__ = ("_conf", "_known")

    def __init__(
        self,
        confidences: Mapping[GroundPredicate, float],
        known: Iterable[GroundPredicate] = (),
    ):
        conf = {p: _check_confidence(v) for p, v in confidences.items()}
        known = frozenset(known)
        extra = known - conf.keys()
        if extra:
            raise ValueError(f"known predicates missing from state: {sorted(map(str, extra))}")
        self._conf = conf
        self._known = known

    @property
    def known(self) -> frozenset[GroundPredicate]:
        return self._known

    def confidence(self, pred: GroundPredicate) -> float:
        return self._conf[pred]

    def get(self, pred: GroundPredicate, default: float | None = None) -> float | None:
        return self._conf.get(pred, default)

    def predicates(self) -> list[GroundPredicate]:
        return sorted(self._conf, key=GroundPredicate.sort_key)

    def items(self) -> list[tuple[GroundPredicate, float]]:
        return [(p, self._conf[p]) for p in self.predicates()]

    def __contains__(self, pred: GroundPredicate) -> bool:
        return pred in self._conf

    def __len__(self) -> int:
        return len(self._conf)

    def __iter__(self) -> Iterator[GroundPredicate]:
        return iter(self.predicates())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ProbabilisticState):
            return NotImplemented
        return self._conf == other._conf and self._known == other._known

    def __repr__(self) -> str:
        body = ", ".join(f"{p}={v:.3g}" for p, v in self.items())
        return f"ProbabilisticState({body})"


@dataclass(frozen=True)
class CertaintyPartition:
    """Disjoint split of a state's predicates at a planning threshold."""

    certain_true: frozenset[GroundPredicate]
    certain_false: frozenset[GroundPredicate]
    uncertain: frozenset[GroundPredicate]

    def all_predicates(self) -> frozenset[GroundPredicate]:
        return self.certain_true | self.certain_false | self.uncertain


def predicate_uncertainty(p: float) -> float:
    """Uncertainty of a single confidence value.

    u(p) = 1 - max(p, 1 - p).  Zero at p in {0, 1}, maximal 0.5 at p = 0.5,
    symmetric under p -> 1 - p.
    """
    p = _check_confidence(p)
    return 1.0 - max(p, 1.0 - p)


def state_uncertainty_independent(state: ProbabilisticState) -> float:
    """Aggregate uncertainty of a belief state, treating predicates as independent.

    U = 1 - prod_i (1 - u_i) where u_i is each predicate's uncertainty.
    Empty state has U = 0; any predicate at u = 0.5 does not by itself push
    U to 1, but U approaches 1 as uncertain predicates accumulate.  Adding a
    predicate never decreases U.
    """
    prod = 1.0
    for _, p in state.items():
        prod *= 1.0 - predicate_uncertainty(p)
    return 1.0 - prod


def classify(state: ProbabilisticState, tau_plan: float) -> CertaintyPartition:
    """Split predicates into certain-true / certain-false / uncertain.

    p > tau_plan counts as certainly true, p < 1 - tau_plan as certainly
    false, everything else (boundaries included) stays uncertain.  The
    certain-true test is applied first so the result is a partition for any
    tau_plan in (0, 1).
    """
    tau_plan = float(tau_plan)
    if not (0.0 < tau_plan < 1.0):
        raise ValueError(f"tau_plan must lie in (0, 1), got {tau_plan}")
    t, f, u = [], [], []
    for pred, p in state.items():
        if p > tau_plan:
            t.append(pred)
        elif p + tau_plan < 1.0:
            # algebraically p < 1 - tau_plan; summing avoids the rounded
            # complement misclassifying exact boundary confidences
            f.append(pred)
        else:
            u.append(pred)
    return CertaintyPartition(frozenset(t), frozenset(f), frozenset(u))


def reduction_law(u0: float, alpha: float, k: int) -> float:
    """Uncertainty after k information-gathering steps at gain alpha.

    U_k = U_0 * (1 - alpha)^k.  Composes as a semigroup: applying k then m
    steps equals applying k + m.
    """
    u0 = float(u0)
    alpha = float(alpha)
    if not (0.0 <= u0 <= 1.0):
        raise ValueError(f"u0 must lie in [0, 1], got {u0}")
    if not (0.0 <= alpha < 1.0):
        raise ValueError(f"alpha must lie in [0, 1), got {alpha}")
    if k < 0 or int(k) != k:
        raise ValueError(f"k must be a non-negative integer, got {k}")
    return u0 * (1.0 - alpha) ** int(k)


def fuse_observation(
    prior: ProbabilisticState, obs: ProbabilisticState
) -> ProbabilisticState:
    """Fold a fresh observation into an existing belief state.

    For each predicate present in the observation, the fused confidence is
    whichever of (prior, observation) is more extreme, i.e. has the smaller
    predicate uncertainty; on a tie the observation wins.  Predicates seen
    only in the prior are carried through unchanged.  Every predicate that
    appears in the observation is marked known in the result.
    """
    conf: dict[GroundPredicate, float] = dict(prior.items())
    known = set(prior.known)
    for pred, p_obs in obs.items():
        p_prior = conf.get(pred)
        if p_prior is None:
            conf[pred] = p_obs
        else:
            u_prior = predicate_uncertainty(p_prior)
            u_obs = predicate_uncertainty(p_obs)
            conf[pred] = p_prior if u_prior < u_obs else p_obs
        known.add(pred)
    return ProbabilisticState(conf, known)


def state_to_json(state: ProbabilisticState) -> str:
    """Serialize a state to a structured-text document.

    One record per predicate: relation name, argument list, confidence,
    known flag.  Confidences round-trip exactly (repr-precision floats).
    """
    records = [
        {
            "relation": pred.relation.value,
            "args": list(pred.args),
            "confidence": conf,
            "known": pred in state.known,
        }
        for pred, conf in state.items()
    ]
    return json.dumps(records, indent=2)


def state_from_json(text: str) -> ProbabilisticState:
    """Inverse of :func:`state_to_json`."""
    try:
        records = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"malformed state document: {e}") from e
    if not isinstance(records, list):
        raise ValueError("state document must be a list of records")
    conf: dict[GroundPredicate, float] = {}
    known: list[GroundPredicate] = []
    for rec in records:
        try:
            rel = _RELATION_BY_NAME[rec["relation"]]
            pred = GroundPredicate(rel, rec["args"])
            p = float(rec["confidence"])
        except (KeyError, TypeError) as e:
            raise ValueError(f"malformed state record: {rec!r}") from e
        if pred in conf:
            raise ValueError(f"duplicate predicate in document: {pred}")
        conf[pred] = p
        if rec.get("known"):
            known.append(pred)
    return ProbabilisticState(conf, known)
