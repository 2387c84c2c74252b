"""Legality classification and safety-mode resolution.

Every planned transformation lands in one of four verdicts:

* always_valid   — cannot change semantics (structurally order-preserving,
                   or every dependence survives the new schedule)
* valid_with_rtc — only declared may-alias pairs could break it; a runtime
                   disjointness check can guard the transformed version
* invalid        — some dependence on definitely-shared storage is violated
* impossible     — structurally not applicable (while-loops, imperfect
                   nests, unknown trip counts where one is required, ...)

The verdict crosses with the safety mode (default / fallback / force) to an
action; `required` upgrades every keep-original warning to a hard error:

                     default        fallback       force
    always_valid     transform      transform      transform
    valid_with_rtc   transform      rtc-guarded    keep + warn
    invalid          transform      keep + warn    keep + warn
    impossible       keep + warn    keep + warn    keep + warn

Note the default column: by design the transformation is applied even when
it changes semantics, and no runtime check is inserted.
"""

from __future__ import annotations

from dataclasses import dataclass

from .deps import Dependence, DependenceSet
from .lang import Call, Expr, BinOp, IfStmt, Stmt, VarRef

ALWAYS_VALID = "always_valid"
VALID_WITH_RTC = "valid_with_rtc"
INVALID = "invalid"
IMPOSSIBLE = "impossible"

TRANSFORM = "transform"
TRANSFORM_WITH_RTC = "transform_with_rtc"
KEEP_ORIGINAL = "keep_original"
HARD_ERROR = "hard_error"


@dataclass
class Verdict:
    kind: str
    detail: str = ""
    rtc_pairs: tuple[tuple[str, str], ...] = ()
    witness: Dependence | None = None

    def describe(self) -> str:
        if self.kind == VALID_WITH_RTC:
            conds = " && ".join(f"disjoint({a},{b})" for a, b in self.rtc_pairs)
            return f"valid with rtc [{conds}]"
        out = self.kind.replace("_", " ")
        if self.witness is not None:
            out += f": dependence {self.witness.pretty()} would be violated"
        elif self.detail:
            out += f": {self.detail}"
        return out


@dataclass
class Action:
    kind: str
    rtc_pairs: tuple[tuple[str, str], ...] = ()
    warning: str = ""


_MATRIX = {
    (ALWAYS_VALID, "default"): TRANSFORM,
    (ALWAYS_VALID, "fallback"): TRANSFORM,
    (ALWAYS_VALID, "force"): TRANSFORM,
    (VALID_WITH_RTC, "default"): TRANSFORM,
    (VALID_WITH_RTC, "fallback"): TRANSFORM_WITH_RTC,
    (VALID_WITH_RTC, "force"): KEEP_ORIGINAL,
    (INVALID, "default"): TRANSFORM,
    (INVALID, "fallback"): KEEP_ORIGINAL,
    (INVALID, "force"): KEEP_ORIGINAL,
    (IMPOSSIBLE, "default"): KEEP_ORIGINAL,
    (IMPOSSIBLE, "fallback"): KEEP_ORIGINAL,
    (IMPOSSIBLE, "force"): KEEP_ORIGINAL,
}


def resolve(verdict: Verdict, mode: str, required: bool) -> Action:
    """Map verdict x safety mode (x required) to the action to take."""
    kind = _MATRIX[(verdict.kind, mode)]
    if kind == KEEP_ORIGINAL and required:
        return Action(HARD_ERROR, (), verdict.describe())
    if kind == KEEP_ORIGINAL:
        return Action(KEEP_ORIGINAL, (), verdict.describe())
    if kind == TRANSFORM_WITH_RTC:
        return Action(TRANSFORM_WITH_RTC, verdict.rtc_pairs)
    return Action(TRANSFORM)


def warning_text(directive, loop_name: str, verdict_text: str, hard: bool = False) -> str:
    sev = "error" if hard else "warning"
    return (f"{sev}: {directive.kind} on loop '{loop_name}' "
            f"(line {directive.line}): {verdict_text}")


# ---------------------------------------------------------------------------
# Schedule checks


def judge_exact(depset: DependenceSet, cand_positions: dict) -> Verdict:
    """Check every conflicting instance pair against the candidate's
    execution order; only may-alias violations are rtc-recoverable."""
    instances = depset.instances
    witness = None
    for (i, j, kind) in depset.pairs:
        a, b = instances[i], instances[j]
        pa = cand_positions.get(a.key())
        pb = cand_positions.get(b.key())
        if pa is None or pb is None:
            return Verdict(INVALID, f"instance of {a.stmt if pa is None else b.stmt} "
                                    "disappears from the schedule")
        if pa > pb:
            witness = _pair_to_dep(instances, i, j, kind)
            break
    if witness is not None:
        return Verdict(INVALID, witness=witness)
    rtc: dict[tuple[str, str], None] = {}
    for (i, j, kind, pair) in depset.alias_pairs:
        a, b = instances[i], instances[j]
        pa = cand_positions.get(a.key())
        pb = cand_positions.get(b.key())
        if pa is None or pb is None or pa > pb:
            rtc[pair] = None
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


def judge_parallel_exact(depset: DependenceSet, loop_name: str) -> Verdict:
    """A marked loop may run its iterations in any order: no conflicting pair
    may differ in that loop's trip count."""
    instances = depset.instances

    def carried(i, j):
        a, b = instances[i], instances[j]
        if loop_name not in a.loops or loop_name not in b.loops:
            return False
        ka = a.loops.index(loop_name)
        kb = b.loops.index(loop_name)
        if a.loops[:ka + 1] != b.loops[:kb + 1]:
            return False
        return a.logical[ka] != b.logical[kb]

    for (i, j, kind) in depset.pairs:
        if carried(i, j):
            return Verdict(INVALID, witness=_pair_to_dep(instances, i, j, kind))
    rtc = {}
    for (i, j, kind, pair) in depset.alias_pairs:
        if carried(i, j):
            rtc[pair] = None
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


def _pair_to_dep(instances, i, j, kind) -> Dependence:
    a, b = instances[i], instances[j]
    common = []
    for (na, nb) in zip(a.loops, b.loops):
        if na != nb:
            break
        common.append(na)
    k = len(common)
    return Dependence(a.stmt, b.stmt, kind, tuple(common),
                      tuple(b.logical[x] - a.logical[x] for x in range(k)))


# conservative checks operate on summarized distance vectors ----------------


def _prefix_definitely_carried_outside(dep: Dependence, names: set[str]) -> bool:
    """True when the dependence is certainly carried by a loop above the
    region of interest (first non-zero component is a fixed positive entry
    on a loop not in `names`)."""
    for loop, d in zip(dep.loops, dep.distance):
        if loop in names:
            return False
        if d is None:
            return False
        if d > 0:
            return True
        if d < 0:
            return False
    return False


def _violates_at_level(dep: Dependence, loop_name: str) -> bool:
    """Could this dependence be carried by `loop_name`?"""
    for loop, d in zip(dep.loops, dep.distance):
        if loop == loop_name:
            return d is None or d != 0
        if d is None:
            return True  # unknown outer carrier: play safe
        if d > 0:
            return False  # carried further out; this level's order is free
        if d < 0:
            return True
    return False  # loop not among the common loops: instances coincide there


def judge_level_conservative(depset: DependenceSet, loop_name: str) -> Verdict:
    """Conservative verdict for order-changing single-level transforms
    (reverse, stripe-mine, parallel): no dependence may be carried here."""
    witness = None
    rtc = {}
    for dep in depset.deps:
        if _violates_at_level(dep, loop_name):
            if dep.alias is not None:
                rtc[dep.alias] = None
            else:
                witness = dep
                break
    if witness is not None:
        return Verdict(INVALID, witness=witness)
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


def judge_permutation_conservative(depset: DependenceSet, new_order: list[str]) -> Verdict:
    """Interchange: permuted distance vectors must stay lexicographically
    non-negative; unknown entries are assumed hostile."""
    witness = None
    rtc = {}
    band = set(new_order)
    for dep in depset.deps:
        if _prefix_definitely_carried_outside(dep, band):
            continue
        comp = dict(zip(dep.loops, dep.distance))
        if not band <= set(dep.loops):
            # statements not nested under the whole band keep their order
            continue
        permuted = [comp[l] for l in _permute_loops(dep.loops, new_order)]
        violated = False
        for d in permuted:
            if d is None or d < 0:
                violated = True
                break
            if d > 0:
                break
        if violated:
            if dep.alias is not None:
                rtc[dep.alias] = None
            else:
                witness = dep
                break
    if witness is not None:
        return Verdict(INVALID, witness=witness)
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


def _permute_loops(loops: tuple[str, ...], new_order: list[str]) -> list[str]:
    band_positions = [k for k, l in enumerate(loops) if l in set(new_order)]
    out = list(loops)
    for pos, name in zip(band_positions, new_order):
        out[pos] = name
    return out


def judge_band_nonneg_conservative(depset: DependenceSet, band: list[str]) -> Verdict:
    """Tiling a band is safe when every dependence not carried outside has
    fixed non-negative components across the whole band."""
    witness = None
    rtc = {}
    bandset = set(band)
    for dep in depset.deps:
        if _prefix_definitely_carried_outside(dep, bandset):
            continue
        comp = dict(zip(dep.loops, dep.distance))
        bad = any(comp.get(l, 0) is None or comp.get(l, 0) < 0 for l in band)
        if bad:
            if dep.alias is not None:
                rtc[dep.alias] = None
            else:
                witness = dep
                break
    if witness is not None:
        return Verdict(INVALID, witness=witness)
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


def judge_parts_conservative(depset: DependenceSet, part_of: dict[str, int]) -> Verdict:
    """Distribution: no dependence may point from a later part to an earlier
    one (the earlier part's loop will have run to completion first)."""
    witness = None
    rtc = {}
    for dep in depset.deps:
        ps = part_of.get(dep.src)
        pk = part_of.get(dep.snk)
        if ps is None or pk is None:
            continue
        if ps > pk:
            if dep.alias is not None:
                rtc[dep.alias] = None
            else:
                witness = dep
                break
    if witness is not None:
        return Verdict(INVALID, witness=witness)
    if rtc:
        return Verdict(VALID_WITH_RTC, rtc_pairs=tuple(sorted(rtc)))
    return Verdict(ALWAYS_VALID)


# ---------------------------------------------------------------------------
# Runtime-check synthesis


def rtc_condition(pairs: tuple[tuple[str, str], ...]) -> Expr:
    conds: list[Expr] = [Call("disjoint", (VarRef(a), VarRef(b))) for a, b in pairs]
    cond = conds[0]
    for c in conds[1:]:
        cond = BinOp("&&", cond, c)
    return cond


def synthesize_rtc(pairs: tuple[tuple[str, str], ...],
                   transformed: list[Stmt], original: list[Stmt]) -> list[Stmt]:
    """Version a region: the transformed code runs only when the involved
    arrays are disjoint, otherwise the original code runs.  With no pairs the
    transformed region is returned unguarded."""
    if not pairs:
        return transformed
    return [IfStmt(rtc_condition(pairs), transformed, original)]
