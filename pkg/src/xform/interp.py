"""Reference interpreter: deterministic execution, trace recording, and the
semantic-equivalence / order / parallel-consistency oracles.

All arithmetic is int64 with faults on overflow and division by zero, so
program equivalence is exact — no tolerance questions.  Random array
initialization draws from [-100, 100] with a recorded seed.

Arrays declared `maybe_alias` can be run under different bindings: fully
separate storage, or overlapping storage at a given element offset.  The
`disjoint(A, B)` builtin reports the binding, which is what runtime-checked
transformation guards test.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .lang import (
    INT64_MAX, INT64_MIN, ArrayRead, Assign, BinOp, Block, Call, Expr, ForLoop,
    IfStmt, IntLit, Program, Stmt, VarRef, WhileLoop, idiv, imod,
)


class RunFault(Exception):
    """Raised for arithmetic faults, out-of-bounds accesses, budget blowups."""


@dataclass
class TraceRecord:
    stmt: str
    ivec: tuple[tuple[str, int], ...]   # original-loop coordinates (name, value)
    reads: tuple[tuple[str, int], ...]
    writes: tuple[tuple[str, int], ...]
    cur_loops: tuple[str, ...] = ()     # enclosing for-loops in the executed tree
    cur_ivec: tuple[int, ...] = ()      # their variable values
    cur_logical: tuple[int, ...] = ()   # their trip counters

    def key(self):
        return (self.stmt, self.ivec)


Trace = list  # list[TraceRecord]


class Memory:
    """Array storage with optional overlapping bindings for may-alias pairs.

    binding maps an (a, b) alias pair to None (distinct) or an integer
    element offset: b's element 0 is a's element `offset`.
    """

    def __init__(self, program: Program, binding: dict | None = None, seed: int = 0):
        self.program = program
        self.binding = dict(binding or {})
        self.seed = seed
        norm = {}
        for (a, b), off in self.binding.items():
            norm[(a, b)] = off
            norm[(b, a)] = None if off is None else -off
        base: dict[str, int] = {}
        seg_of: dict[str, int] = {}
        next_seg = 0
        for arr in program.arrays:
            if arr.name in seg_of:
                continue
            seg_of[arr.name] = next_seg
            base[arr.name] = 0
            work = [arr.name]
            while work:
                cur = work.pop()
                for other in [d.name for d in program.arrays]:
                    if other in seg_of:
                        continue
                    off = norm.get((cur, other))
                    if off is not None:
                        seg_of[other] = next_seg
                        base[other] = base[cur] + off
                        work.append(other)
            next_seg += 1
        # shift bases so each segment starts at 0
        shift: dict[int, int] = {}
        for arr in program.arrays:
            s = seg_of[arr.name]
            shift[s] = min(shift.get(s, 0), base[arr.name])
        sizes: dict[int, int] = {}
        self.views: dict[str, tuple[int, int, tuple[int, ...], int]] = {}
        for arr in program.arrays:
            s = seg_of[arr.name]
            b = base[arr.name] - shift[s]
            self.views[arr.name] = (s, b, arr.dims, arr.total)
            sizes[s] = max(sizes.get(s, 0), b + arr.total)
        self.segments: dict[int, list[int]] = {s: [0] * n for s, n in sizes.items()}
        rng = random.Random(seed)
        for arr in program.arrays:
            s, b, _, total = self.views[arr.name]
            if arr.init == "random":
                for i in range(total):
                    self.segments[s][b + i] = rng.randint(-100, 100)
            else:
                for i in range(total):
                    self.segments[s][b + i] = 0

    def flatten(self, array: str, idx: tuple[int, ...], line: int = 0) -> int:
        _, _, dims, _ = self.views[array]
        flat = 0
        for d, i in zip(dims, idx):
            if not 0 <= i < d:
                raise RunFault(f"index {i} out of bounds for {array}[{d}] (line {line})")
            flat = flat * d + i
        return flat

    def read(self, array: str, flat: int) -> int:
        s, b, _, _ = self.views[array]
        return self.segments[s][b + flat]

    def write(self, array: str, flat: int, value: int):
        s, b, _, _ = self.views[array]
        self.segments[s][b + flat] = value

    def disjoint(self, a: str, b: str) -> bool:
        sa, ba, _, ta = self.views[a]
        sb, bb, _, tb = self.views[b]
        if sa != sb:
            return True
        return ba + ta <= bb or bb + tb <= ba

    def array_values(self, name: str) -> tuple[int, ...]:
        s, b, _, total = self.views[name]
        return tuple(self.segments[s][b:b + total])

    def snapshot(self) -> dict[str, tuple[int, ...]]:
        return {a.name: self.array_values(a.name) for a in self.program.arrays}


def _chk(v: int, line: int = 0) -> int:
    if not INT64_MIN <= v <= INT64_MAX:
        raise RunFault(f"int64 overflow (line {line})")
    return v


@dataclass
class _Run:
    program: Program
    mem: Memory
    env: dict[str, int]
    trace: Trace | None
    budget: int
    perturb: dict[str, object] = field(default_factory=dict)
    loop_stack: list[tuple[str, int, int]] = field(default_factory=list)  # (name, value, trip)

    def tick(self, line: int = 0):
        self.budget -= 1
        if self.budget < 0:
            raise RunFault(f"step budget exceeded (line {line})")

    def eval(self, e: Expr, reads: list | None = None, line: int = 0) -> int:
        if isinstance(e, IntLit):
            return e.value
        if isinstance(e, VarRef):
            try:
                return self.env[e.name]
            except KeyError:
                raise RunFault(f"unbound variable {e.name!r} (line {line})") from None
        if isinstance(e, ArrayRead):
            idx = tuple(self.eval(i, reads, line) for i in e.index)
            flat = self.mem.flatten(e.array, idx, line)
            if reads is not None:
                reads.append((e.array, flat))
            return self.mem.read(e.array, flat)
        if isinstance(e, Call):
            if e.func == "disjoint":
                return int(self.mem.disjoint(e.args[0].name, e.args[1].name))
            a = self.eval(e.args[0], reads, line)
            b = self.eval(e.args[1], reads, line)
            return min(a, b) if e.func == "min" else max(a, b)
        if isinstance(e, BinOp):
            a = self.eval(e.lhs, reads, line)
            b = self.eval(e.rhs, reads, line)
            op = e.op
            if op == "+":
                return _chk(a + b, line)
            if op == "-":
                return _chk(a - b, line)
            if op == "*":
                return _chk(a * b, line)
            if op in ("/", "%"):
                if b == 0:
                    raise RunFault(f"division by zero (line {line})")
                return idiv(a, b) if op == "/" else imod(a, b)
            if op == "&&":
                return int(a != 0 and b != 0)
            if op == "<":
                return int(a < b)
            if op == "<=":
                return int(a <= b)
            if op == ">":
                return int(a > b)
            if op == ">=":
                return int(a >= b)
            if op == "==":
                return int(a == b)
            if op == "!=":
                return int(a != b)
        raise TypeError(f"not an expression: {e!r}")

    def exec_body(self, stmts: list[Stmt]):
        for s in stmts:
            self.exec_stmt(s)

    def exec_stmt(self, s: Stmt):
        self.tick(getattr(s, "line", 0))
        if isinstance(s, Assign):
            reads: list = []
            idx = tuple(self.eval(i, reads, s.line) for i in s.index)
            flat = self.mem.flatten(s.array, idx, s.line)
            val = self.eval(s.value, reads, s.line)
            if s.op == "+=":
                reads.append((s.array, flat))
                val = _chk(self.mem.read(s.array, flat) + val, s.line)
            if self.trace is not None:
                ivec = tuple((n, self.eval(e, None, s.line)) for n, e in s.orig_coords)
                self.trace.append(TraceRecord(
                    s.stmt_id, ivec,
                    tuple(sorted(set(reads))), ((s.array, flat),),
                    tuple(n for n, _, _ in self.loop_stack),
                    tuple(v for _, v, _ in self.loop_stack),
                    tuple(t for _, _, t in self.loop_stack)))
            self.mem.write(s.array, flat, val)
        elif isinstance(s, ForLoop):
            lb = self.eval(s.lower, None, s.line)
            ub = self.eval(s.upper, None, s.line)
            values = list(range(lb, ub, s.step)) if ub > lb else []
            order = list(enumerate(values))
            mode = self.perturb.get(s.name)
            if mode == "reverse":
                order = order[::-1]
            elif isinstance(mode, random.Random):
                mode.shuffle(order)
            saved = self.env.get(s.var)
            for trip, v in order:
                self.tick(s.line)
                self.env[s.var] = v
                self.loop_stack.append((s.name, v, trip))
                self.exec_body(s.body)
                self.loop_stack.pop()
            if saved is None:
                self.env.pop(s.var, None)
            else:
                self.env[s.var] = saved
        elif isinstance(s, WhileLoop):
            while self.eval(s.cond, None, s.line) != 0:
                self.tick(s.line)
                self.exec_body(s.body)
        elif isinstance(s, IfStmt):
            if self.eval(s.cond, None, s.line) != 0:
                self.exec_body(s.then_body)
            elif s.else_body is not None:
                self.exec_body(s.else_body)
        elif isinstance(s, Block):
            self.exec_body(s.body)
        else:
            raise TypeError(f"not a statement: {s!r}")


def run(program: Program, seed: int = 0, alias_binding: dict | None = None,
        record_trace: bool = True, step_budget: int = 10**7,
        perturb: dict | None = None) -> tuple[Memory, Trace]:
    """Execute a program deterministically; returns final memory and trace."""
    mem = Memory(program, alias_binding, seed)
    env = program.param_values()
    r = _Run(program, mem, env, [] if record_trace else None, step_budget,
             perturb or {})
    r.exec_body(program.body)
    return mem, (r.trace if r.trace is not None else [])


def alias_bindings(program: Program, offsets=(0,)) -> list[dict]:
    """Every combination of distinct/overlapping for the declared alias pairs."""
    pairs = [(a.first, a.second) for a in program.aliases]
    bindings = [{}]
    for pair in pairs:
        new = []
        for b in bindings:
            for choice in (None,) + tuple(offsets):
                nb = dict(b)
                nb[pair] = choice
                new.append(nb)
        bindings = new
    return bindings


@dataclass
class EquivalenceReport:
    equivalent: bool
    trials: int
    detail: str = ""

    def __bool__(self):
        return self.equivalent


def equivalent(p1: Program, p2: Program, trials: int = 100, seed: int = 0) -> EquivalenceReport:
    """Compare final memories over seeded random inputs and all alias bindings."""
    decls1 = [(a.name, a.dims, a.init) for a in p1.arrays]
    decls2 = [(a.name, a.dims, a.init) for a in p2.arrays]
    if decls1 != decls2:
        return EquivalenceReport(False, 0, "declaration mismatch")
    master = random.Random(seed)
    trial_seeds = [master.randrange(2**31) for _ in range(max(trials, 1))]
    bindings = alias_bindings(p1)
    for t, s in enumerate(trial_seeds):
        for binding in bindings:
            m1, _ = run(p1, seed=s, alias_binding=binding, record_trace=False)
            m2, _ = run(p2, seed=s, alias_binding=binding, record_trace=False)
            for arr in p1.arrays:
                v1 = m1.array_values(arr.name)
                v2 = m2.array_values(arr.name)
                if v1 != v2:
                    i = next(k for k in range(len(v1)) if v1[k] != v2[k])
                    bind = ", ".join(f"{a}~{b}@{o}" for (a, b), o in binding.items()
                                     if o is not None) or "distinct"
                    return EquivalenceReport(
                        False, t + 1,
                        f"trial {t} (seed {s}, binding {bind}): "
                        f"{arr.name}[{i}] = {v1[i]} vs {v2[i]}")
    return EquivalenceReport(True, len(trial_seeds))


def order_preserved(t1: Trace, t2: Trace) -> bool:
    """True iff both traces execute the same instances in the same order."""
    return [r.key() for r in t1] == [r.key() for r in t2]


def instance_multiset(t: Trace):
    out: dict = {}
    for r in t:
        out[r.key()] = out.get(r.key(), 0) + 1
    return out


@dataclass
class ConsistencyReport:
    consistent: bool
    orders_tried: int
    detail: str = ""

    def __bool__(self):
        return self.consistent


def parallel_consistent(program: Program, loop_name: str, trials: int = 8,
                        seed: int = 0) -> ConsistencyReport:
    """Run a marked loop's iterations in original, reversed, and random orders;
    consistent iff every final memory agrees."""
    base, _ = run(program, seed=seed, record_trace=False)
    reference = base.snapshot()
    orders: list[dict] = [{loop_name: "reverse"}]
    for k in range(trials):
        orders.append({loop_name: random.Random(seed * 7919 + k)})
    for i, perturb in enumerate(orders):
        mem, _ = run(program, seed=seed, record_trace=False, perturb=perturb)
        if mem.snapshot() != reference:
            kind = "reversed" if i == 0 else f"shuffle #{i - 1}"
            return ConsistencyReport(False, i + 1,
                                     f"{kind} execution of loop '{loop_name}' diverged")
    return ConsistencyReport(True, len(orders) + 1)


def trace_csv(trace: Trace) -> str:
    """CSV rendering: stmt,iter_vec,reads,writes."""
    lines = ["stmt,iter_vec,reads,writes"]
    for r in trace:
        ivec = ";".join(f"{n}={v}" for n, v in r.ivec)
        reads = " ".join(f"{a}[{i}]" for a, i in r.reads)
        writes = " ".join(f"{a}[{i}]" for a, i in r.writes)
        lines.append(f"{r.stmt},{ivec},{reads},{writes}")
    return "\n".join(lines) + "\n"
