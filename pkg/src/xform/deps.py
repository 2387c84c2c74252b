"""Dependence analysis over affine array accesses.

Two routes, matching how much the program lets us see:

* exact: when every bound, guard, and subscript in the analyzed region is a
  pure function of loop variables and non-opaque params, and the region's
  instance count fits the enumeration cap, walk the whole iteration space
  abstractly (no memory needed) and collect the precise set of conflicting
  instance pairs.

* conservative: otherwise fall back to ZIV and strong-SIV subscript tests per
  dimension; anything those cannot analyze is assumed dependent with unknown
  (`*`) distance entries.  Accesses to declared may-alias pairs are kept in a
  separate rtc-eligible bucket rather than folded into the static set.

Distance vectors are in logical iterations (trip counts), source before sink,
so they are lexicographically non-negative for the original program.

`brute_force_dependences` is the independent oracle: it runs the real
interpreter and compares touched addresses pairwise over the trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import interp
from .lang import (
    ArrayRead, Assign, BinOp, Block, Call, Expr, ForLoop, IfStmt, IntLit,
    Program, Stmt, VarRef, WhileLoop, simplify, subst,
)


class DepsError(Exception):
    """Analysis cannot proceed at all (e.g. a while-loop in the region)."""


class _Unanalyzable(Exception):
    pass


class _CapExceeded(Exception):
    pass


# ---------------------------------------------------------------------------
# Result types


@dataclass(frozen=True)
class Dependence:
    src: str                         # statement id
    snk: str
    kind: str                        # flow | anti | output
    loops: tuple[str, ...]           # common enclosing loops, outermost first
    distance: tuple[object, ...]     # int per loop, or None for '*'
    alias: tuple[str, str] | None = None

    def pretty(self) -> str:
        vec = ",".join("*" if d is None else str(d) for d in self.distance)
        tag = f" alias({self.alias[0]},{self.alias[1]})" if self.alias else ""
        return f"{self.kind} {self.src}->{self.snk} ({vec}){tag}"


@dataclass
class Instance:
    pos: int
    stmt: str
    orig: tuple[tuple[str, int], ...]
    loops: tuple[str, ...]
    logical: tuple[int, ...]
    reads: frozenset
    writes: frozenset
    arrays_read: frozenset
    arrays_written: frozenset

    def key(self):
        return (self.stmt, self.orig)


@dataclass
class DependenceSet:
    deps: list[Dependence]
    exact: bool
    loops: tuple[str, ...]
    instances: list[Instance] | None = None
    pairs: list[tuple[int, int, str]] = field(default_factory=list)
    alias_pairs: list[tuple[int, int, str, tuple[str, str]]] = field(default_factory=list)
    reason: str = ""

    def pretty(self) -> str:
        mode = "exact" if self.exact else "conservative"
        if not self.deps:
            return f"(no dependences) {mode}"
        return "\n".join(f"{d.pretty()} {mode}" for d in self.deps)


def covers(general: Dependence, specific: Dependence) -> bool:
    """Does a (possibly wildcarded) dependence subsume an exact one?"""
    if (general.src, general.snk, general.kind) != (specific.src, specific.snk, specific.kind):
        return False
    if general.loops != specific.loops:
        return False
    return all(g is None or g == s for g, s in zip(general.distance, specific.distance))


def is_superset(general: "DependenceSet", specific: "DependenceSet") -> bool:
    return all(any(covers(g, s) for g in general.deps) for s in specific.deps)


def lex_nonneg(distance: tuple[object, ...]) -> bool:
    for d in distance:
        if d is None:
            return True  # could be positive
        if d > 0:
            return True
        if d < 0:
            return False
    return True


# ---------------------------------------------------------------------------
# Abstract enumeration (memory-free)


def _eval_static(e: Expr, env: dict[str, int], opaque: set[str]) -> int:
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, VarRef):
        if e.name in opaque:
            raise _Unanalyzable(f"opaque param {e.name!r}")
        try:
            return env[e.name]
        except KeyError:
            raise _Unanalyzable(f"unbound {e.name!r}") from None
    if isinstance(e, ArrayRead):
        raise _Unanalyzable("memory-dependent expression")
    if isinstance(e, Call):
        if e.func == "disjoint":
            raise _Unanalyzable("alias-binding-dependent expression")
        a = _eval_static(e.args[0], env, opaque)
        b = _eval_static(e.args[1], env, opaque)
        return min(a, b) if e.func == "min" else max(a, b)
    if isinstance(e, BinOp):
        from .lang import _FOLD, idiv, imod
        a = _eval_static(e.lhs, env, opaque)
        b = _eval_static(e.rhs, env, opaque)
        if e.op in ("/", "%"):
            if b == 0:
                raise _Unanalyzable("division by zero in analyzed expression")
            return idiv(a, b) if e.op == "/" else imod(a, b)
        return _FOLD[e.op](a, b)
    raise TypeError(f"not an expression: {e!r}")


def _flat_index(program: Program, array: str, idx: tuple[int, ...]) -> int:
    dims = program.array(array).dims
    flat = 0
    for d, i in zip(dims, idx):
        if not 0 <= i < d:
            raise _Unanalyzable(f"index {i} out of bounds for {array}")
        flat = flat * d + i
    return flat


def enumerate_instances(program: Program, scope: list[Stmt],
                        max_instances: int = 4096) -> list[Instance]:
    """Walk the region's full iteration space without touching memory.

    Raises DepsError on while-loops, _Unanalyzable when anything depends on
    memory or opaque params, _CapExceeded past the instance cap.
    """
    opaque = program.opaque_params()
    env = program.param_values(include_opaque=False)
    out: list[Instance] = []
    stack: list[tuple[str, int, int]] = []
    steps = [0]
    step_budget = 100 * max_instances + 10000

    def addr_of(array, index):
        vals = tuple(_eval_static(i, env, opaque) for i in index)
        return (array, _flat_index(program, array, vals))

    def reads_of(e: Expr, acc: list):
        if isinstance(e, ArrayRead):
            acc.append(addr_of(e.array, e.index))
            return
        if isinstance(e, BinOp):
            reads_of(e.lhs, acc)
            reads_of(e.rhs, acc)
        elif isinstance(e, Call) and e.func != "disjoint":
            for a in e.args:
                reads_of(a, acc)

    def walk(stmts: list[Stmt]):
        for s in stmts:
            if isinstance(s, Assign):
                acc: list = []
                for i in s.index:
                    reads_of(i, acc)
                reads_of(s.value, acc)
                waddr = addr_of(s.array, s.index)
                if s.op == "+=":
                    acc.append(waddr)
                if len(out) >= max_instances:
                    raise _CapExceeded()
                reads = frozenset(acc)
                writes = frozenset((waddr,))
                out.append(Instance(
                    len(out), s.stmt_id,
                    tuple((n, _eval_static(e, env, opaque)) for n, e in s.orig_coords),
                    tuple(n for n, _, _ in stack),
                    tuple(t for _, _, t in stack),
                    reads, writes,
                    frozenset(a for a, _ in reads),
                    frozenset(a for a, _ in writes)))
            elif isinstance(s, ForLoop):
                lb = _eval_static(s.lower, env, opaque)
                ub = _eval_static(s.upper, env, opaque)
                saved = env.get(s.var)
                trip = 0
                for v in range(lb, ub, s.step) if ub > lb else []:
                    steps[0] += 1
                    if steps[0] > step_budget:
                        raise _CapExceeded()
                    env[s.var] = v
                    stack.append((s.name, v, trip))
                    walk(s.body)
                    stack.pop()
                    trip += 1
                if saved is None:
                    env.pop(s.var, None)
                else:
                    env[s.var] = saved
            elif isinstance(s, WhileLoop):
                raise DepsError("while-loop in analyzed region")
            elif isinstance(s, IfStmt):
                if _eval_static(s.cond, env, opaque) != 0:
                    walk(s.then_body)
                elif s.else_body is not None:
                    walk(s.else_body)
            elif isinstance(s, Block):
                walk(s.body)

    walk(scope)
    return out


def positions_by_key(instances: list[Instance]) -> dict:
    return {inst.key(): inst.pos for inst in instances}


def _scope_loops(scope: list[Stmt]) -> tuple[str, ...]:
    from .lang import iter_loops
    return tuple(l.name for l in iter_loops(scope) if isinstance(l, ForLoop))


def _pair_kind(first_is_write: bool, second_is_write: bool) -> str:
    if first_is_write and second_is_write:
        return "output"
    return "flow" if first_is_write else "anti"


def _summarize(instances: list[Instance], pairs, alias_pairs) -> list[Dependence]:
    seen = {}
    for entry in pairs:
        i, j, kind = entry
        a, b = instances[i], instances[j]
        common = []
        for (na, nb) in zip(a.loops, b.loops):
            if na != nb:
                break
            common.append(na)
        k = len(common)
        dist = tuple(b.logical[x] - a.logical[x] for x in range(k))
        if a.stmt == b.stmt and all(d == 0 for d in dist):
            continue  # degenerate same-instance pairing
        seen.setdefault((a.stmt, b.stmt, kind, tuple(common), dist, None), None)
    for (i, j, kind, pair) in alias_pairs:
        a, b = instances[i], instances[j]
        common = []
        for (na, nb) in zip(a.loops, b.loops):
            if na != nb:
                break
            common.append(na)
        dist = tuple(None for _ in common)
        seen.setdefault((a.stmt, b.stmt, kind, tuple(common), dist, pair), None)
    return [Dependence(s, k, kd, lp, dp, al)
            for (s, k, kd, lp, dp, al) in seen]


def _exact_pairs(program: Program, instances: list[Instance]):
    """Conflicting instance pairs: static (same storage) and may-alias ones."""
    buckets: dict = {}
    for inst in instances:
        for addr in inst.writes:
            buckets.setdefault(addr, []).append((inst.pos, True))
        for addr in inst.reads - inst.writes:
            buckets.setdefault(addr, []).append((inst.pos, False))
        for addr in inst.reads & inst.writes:
            buckets.setdefault(addr, []).append((inst.pos, False))
    pairs = set()
    for addr, accesses in buckets.items():
        accesses.sort()
        writes = [(p, w) for p, w in accesses if w]
        if not writes:
            continue
        for (p1, w1) in accesses:
            for (p2, w2) in accesses:
                if p1 < p2 and (w1 or w2):
                    pairs.add((p1, p2, _pair_kind(w1, w2)))
    alias_pairs = set()
    for al in program.aliases:
        a, b = al.first, al.second
        touch_a = [(i.pos, a in i.arrays_written) for i in instances
                   if a in i.arrays_read or a in i.arrays_written]
        touch_b = [(i.pos, b in i.arrays_written) for i in instances
                   if b in i.arrays_read or b in i.arrays_written]
        if len(touch_a) * len(touch_b) > 4_000_000:
            raise _CapExceeded()
        for (pa, wa) in touch_a:
            for (pb, wb) in touch_b:
                if pa == pb:
                    continue
                if not (wa or wb):
                    continue
                i, j = (pa, pb) if pa < pb else (pb, pa)
                wi, wj = (wa, wb) if pa < pb else (wb, wa)
                alias_pairs.add((i, j, _pair_kind(wi, wj), (a, b)))
    return sorted(pairs), sorted(alias_pairs)


# ---------------------------------------------------------------------------
# Conservative subscript tests


@dataclass
class _Ref:
    stmt: str
    pos: int                       # textual preorder position
    array: str
    index: tuple[Expr, ...]
    write: bool
    loops: tuple[str, ...]         # enclosing for-loop names
    loop_vars: tuple[str, ...]
    steps: tuple[int, ...]
    trips: tuple[object, ...]      # int or None


def _collect_refs(program: Program, scope: list[Stmt]) -> list[_Ref]:
    refs: list[_Ref] = []
    params = program.param_values(include_opaque=False)
    opaque = program.opaque_params()
    counter = [0]

    def resolve(e: Expr) -> Expr:
        return simplify(subst(e, {k: IntLit(v) for k, v in params.items()}))

    def trips_of(loop: ForLoop) -> object:
        try:
            lb = _eval_static(loop.lower, dict(params), opaque)
            ub = _eval_static(loop.upper, dict(params), opaque)
        except _Unanalyzable:
            return None
        return max(0, -(-(ub - lb) // loop.step))

    def walk(stmts, loops: tuple):
        for s in stmts:
            if isinstance(s, Assign):
                pos = counter[0]
                counter[0] += 1
                names = tuple(l.name for l in loops)
                lvars = tuple(l.var for l in loops)
                steps = tuple(l.step for l in loops)
                trips = tuple(trips_of(l) for l in loops)
                for i in s.index:
                    for r in _expr_reads(i):
                        refs.append(_Ref(s.stmt_id, pos, r.array,
                                         tuple(resolve(x) for x in r.index),
                                         False, names, lvars, steps, trips))
                for r in _expr_reads(s.value):
                    refs.append(_Ref(s.stmt_id, pos, r.array,
                                     tuple(resolve(x) for x in r.index),
                                     False, names, lvars, steps, trips))
                if s.op == "+=":
                    refs.append(_Ref(s.stmt_id, pos, s.array,
                                     tuple(resolve(x) for x in s.index),
                                     False, names, lvars, steps, trips))
                refs.append(_Ref(s.stmt_id, pos, s.array,
                                 tuple(resolve(x) for x in s.index),
                                 True, names, lvars, steps, trips))
            elif isinstance(s, ForLoop):
                counter[0] += 1
                walk(s.body, loops + (s,))
            elif isinstance(s, WhileLoop):
                raise DepsError("while-loop in analyzed region")
            elif isinstance(s, IfStmt):
                counter[0] += 1
                walk(s.then_body, loops)
                if s.else_body is not None:
                    walk(s.else_body, loops)
            elif isinstance(s, Block):
                counter[0] += 1
                walk(s.body, loops)

    walk(scope, ())
    return refs


def _expr_reads(e: Expr):
    if isinstance(e, ArrayRead):
        yield e
        for i in e.index:
            yield from _expr_reads(i)
    elif isinstance(e, BinOp):
        yield from _expr_reads(e.lhs)
        yield from _expr_reads(e.rhs)
    elif isinstance(e, Call) and e.func != "disjoint":
        for a in e.args:
            yield from _expr_reads(a)


def _linearize(e: Expr, loop_vars: set[str]):
    """expr -> (coeffs over loop vars, symbolic rest) or None if non-affine."""
    if isinstance(e, IntLit):
        return {}, e
    if isinstance(e, VarRef):
        if e.name in loop_vars:
            return {e.name: 1}, IntLit(0)
        return {}, e
    if isinstance(e, BinOp):
        if e.op in ("+", "-"):
            l = _linearize(e.lhs, loop_vars)
            r = _linearize(e.rhs, loop_vars)
            if l is None or r is None:
                return None
            lc, lrest = l
            rc, rrest = r
            sign = 1 if e.op == "+" else -1
            coeffs = dict(lc)
            for v, c in rc.items():
                coeffs[v] = coeffs.get(v, 0) + sign * c
            return coeffs, simplify(BinOp(e.op, lrest, rrest))
        if e.op == "*":
            for a, b in ((e.lhs, e.rhs), (e.rhs, e.lhs)):
                sa = simplify(a)
                if isinstance(sa, IntLit):
                    lb = _linearize(b, loop_vars)
                    if lb is None:
                        return None
                    bc, brest = lb
                    return ({v: c * sa.value for v, c in bc.items()},
                            simplify(BinOp("*", IntLit(sa.value), brest)))
            return None
        return None
    return None


def _conservative_pair(r1: _Ref, r2: _Ref):
    """Analyze one reference pair; returns None if proven independent, else a
    distance constraint {var: int} with an `unknown_vars` set."""
    common: list[tuple[str, str, str, int, object]] = []  # (name, var1, var2, step, trips)
    for k, (n1, n2) in enumerate(zip(r1.loops, r2.loops)):
        if n1 != n2:
            break
        common.append((n1, r1.loop_vars[k], r2.loop_vars[k], r1.steps[k], r1.trips[k]))
    common_names = [c[0] for c in common]
    var_pos = {}
    for k, c in enumerate(common):
        var_pos[c[1]] = k
    constraints: dict[int, int] = {}
    unknown = False
    for f1, f2 in zip(r1.index, r2.index):
        lv = set(v for _, v, _, _, _ in common) | set(v2 for _, _, v2, _, _ in common)
        l1 = _linearize(f1, lv)
        l2 = _linearize(f2, lv)
        if l1 is None or l2 is None:
            unknown = True
            continue
        c1, rest1 = l1
        c2, rest2 = l2
        diff_rest = simplify(BinOp("-", rest1, rest2))
        # collect net coefficients per common-loop position (vars may differ
        # textually between the two refs but denote the same loop level)
        net: dict[int, tuple[int, int]] = {}
        ok = True
        for v, c in c1.items():
            if v not in var_pos:
                ok = False
                break
            a, b = net.get(var_pos[v], (0, 0))
            net[var_pos[v]] = (a + c, b)
        if ok:
            for v, c in c2.items():
                k = None
                for kk, cm in enumerate(common):
                    if cm[2] == v:
                        k = kk
                        break
                if k is None:
                    ok = False
                    break
                a, b = net.get(k, (0, 0))
                net[k] = (a, b + c)
        if not ok:
            unknown = True
            continue
        involved = [k for k, (a, b) in net.items() if a != 0 or b != 0]
        if not involved:
            # ZIV: constant difference
            if isinstance(diff_rest, IntLit):
                if diff_rest.value != 0:
                    return None  # proven independent
            else:
                unknown = True
            continue
        if len(involved) == 1:
            k = involved[0]
            a1, a2 = net[k]
            if a1 != a2 or a1 == 0:
                unknown = True  # weak SIV; assume dependent
                continue
            if not isinstance(diff_rest, IntLit):
                unknown = True
                continue
            # a*v1 + rest1 = a*v2 + rest2  =>  v2 - v1 = (rest1-rest2)/a
            delta_num = diff_rest.value
            if delta_num % a1 != 0:
                return None
            phys = delta_num // a1
            step = common[k][3]
            if phys % step != 0:
                return None
            logical = phys // step
            trips = common[k][4]
            if trips is not None and abs(logical) >= trips > 0:
                return None
            if trips == 0:
                return None
            if k in constraints and constraints[k] != logical:
                return None
            constraints[k] = logical
            continue
        unknown = True  # coupled subscripts (MIV): assume dependent
    distance = tuple(constraints.get(k) for k in range(len(common)))
    return common_names, distance, unknown


def _possibly_lex_nonneg(distance) -> bool:
    for d in distance:
        if d is None or d > 0:
            return True
        if d < 0:
            return False
    return True


def _neg(distance):
    return tuple(None if d is None else -d for d in distance)


def conservative_dependences(program: Program, scope: list[Stmt], reason: str) -> DependenceSet:
    refs = _collect_refs(program, scope)
    alias_decl = {(a.first, a.second) for a in program.aliases}
    alias_decl |= {(b, a) for a, b in alias_decl}
    seen = {}

    def emit(src: _Ref, snk: _Ref, names, dist, alias):
        if src.stmt == snk.stmt and all(d == 0 for d in dist):
            return
        kind = _pair_kind(src.write, snk.write)
        seen.setdefault((src.stmt, snk.stmt, kind, tuple(names), dist, alias), None)

    declared = {(a.first, a.second) for a in program.aliases}
    for i1, r1 in enumerate(refs):
        for r2 in refs[i1:]:
            same = r1.array == r2.array
            aliased = (r1.array, r2.array) in alias_decl
            if not same and not aliased:
                continue
            if not (r1.write or r2.write):
                continue
            if same:
                res = _conservative_pair(r1, r2)
                if res is None:
                    continue
                names, dist, unknown = res
                if unknown:
                    dist = tuple(None for _ in dist)
                # orient source-before-sink
                if _possibly_lex_nonneg(dist):
                    if all(d == 0 for d in dist):
                        src, snk = (r1, r2) if r1.pos <= r2.pos else (r2, r1)
                        emit(src, snk, names, dist, None)
                    else:
                        emit(r1, r2, names, dist, None)
                if any(d is None or d != 0 for d in dist) and _possibly_lex_nonneg(_neg(dist)):
                    emit(r2, r1, names, _neg(dist), None)
            else:
                names = []
                for (n1, n2) in zip(r1.loops, r2.loops):
                    if n1 != n2:
                        break
                    names.append(n1)
                dist = tuple(None for _ in names)
                pair = (r1.array, r2.array) if (r1.array, r2.array) in declared else (r2.array, r1.array)
                emit(r1, r2, names, dist, pair)
                emit(r2, r1, names, dist, pair)

    deps = [Dependence(s, k, kd, lp, dp, al) for (s, k, kd, lp, dp, al) in seen]
    return DependenceSet(deps, exact=False, loops=_scope_loops(scope), reason=reason)


# ---------------------------------------------------------------------------
# Public entry points


def compute_dependences(program: Program, scope, max_enum: int = 4096) -> DependenceSet:
    """Dependences of a region: exact by enumeration when possible, else a
    conservative superset.  `scope` is a loop node or a statement list."""
    stmts = scope if isinstance(scope, list) else [scope]
    try:
        instances = enumerate_instances(program, stmts, max_enum)
        pairs, alias_pairs = _exact_pairs(program, instances)
        deps = _summarize(instances, pairs, alias_pairs)
        return DependenceSet(deps, exact=True, loops=_scope_loops(stmts),
                             instances=instances, pairs=pairs, alias_pairs=alias_pairs)
    except _CapExceeded:
        return conservative_dependences(program, stmts, "enumeration cap exceeded")
    except _Unanalyzable as e:
        return conservative_dependences(program, stmts, str(e))


def brute_force_dependences(program: Program, scope, cap: int = 10**5) -> DependenceSet:
    """Oracle: run the interpreter over the region and compare every pair of
    trace records.  Exact by construction; capped at `cap` instances."""
    stmts = scope if isinstance(scope, list) else [scope]
    for s in stmts:
        for inner in _all_stmts(s):
            if isinstance(inner, WhileLoop):
                raise DepsError("while-loop in analyzed region")
    sub = Program(program.arrays, program.aliases, program.params, stmts)
    _, trace = interp.run(sub, seed=0, record_trace=True, step_budget=10 * cap + 1000)
    if len(trace) > cap:
        raise DepsError(f"region exceeds the oracle cap of {cap} instances")
    instances = []
    for k, r in enumerate(trace):
        reads = frozenset(r.reads)
        writes = frozenset(r.writes)
        instances.append(Instance(
            k, r.stmt, r.ivec, r.cur_loops, r.cur_logical, reads, writes,
            frozenset(a for a, _ in reads), frozenset(a for a, _ in writes)))
    pairs, alias_pairs = _exact_pairs(program, instances)
    deps = _summarize(instances, pairs, alias_pairs)
    return DependenceSet(deps, exact=True, loops=_scope_loops(stmts),
                         instances=instances, pairs=pairs, alias_pairs=alias_pairs)


def _all_stmts(s: Stmt):
    from .lang import iter_stmts
    yield from iter_stmts([s])


def dep_signature(ds: DependenceSet) -> frozenset:
    return frozenset((d.src, d.snk, d.kind, d.loops, d.distance, d.alias) for d in ds.deps)
