"""Branching matrices, consistent partitions and matrix reduction.

A branching matrix ``M`` bounds the child-type multiset of every vertex type:
a type-``i`` vertex has at most ``M[i, j]`` children of type ``j``. The
largest tree generated from a root type is what every certificate talks about.

Reductions merge types whose rows agree block-wise under a partition; such a
merge leaves the generated (unlabelled) tree unchanged, which
:func:`tree_signatures` checks at finite depth.
"""
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
import json

import numpy as np

from .errors import InconsistentPartitionError, InvalidParameterError


def _transient_types(rows, root):
    """Types that lie on no cycle of the type graph and are not reachable from one."""
    t = len(rows)
    succ = [np.flatnonzero(rows[i]).tolist() for i in range(t)]
    # Tarjan-free approach: a type is recurrent iff it is reachable from a
    # type that can reach itself.
    on_cycle = []
    for i in range(t):
        seen = set()
        stack = list(succ[i])
        hit = False
        while stack:
            j = stack.pop()
            if j == i:
                hit = True
                break
            if j in seen:
                continue
            seen.add(j)
            stack.extend(succ[j])
        on_cycle.append(hit)
    recurrent = set()
    stack = [i for i in range(t) if on_cycle[i]]
    while stack:
        j = stack.pop()
        if j in recurrent:
            continue
        recurrent.add(j)
        stack.extend(succ[j])
    return frozenset(i for i in range(t) if i not in recurrent)


@dataclass(frozen=True, eq=False)
class BranchingMatrix:
    """Square non-negative integer matrix with type labels.

    ``transient`` lists types excluded from recurrence analysis (the walk
    origin and similar start-up states). When omitted it is derived from the
    type graph: a type is transient when it sits on no cycle and no cycle
    reaches it.
    """

    rows: np.ndarray
    labels: tuple = None
    transient: frozenset = None
    root: int = 0
    name: str = ""

    def __post_init__(self):
        rows = np.array(self.rows, dtype=np.int64)
        if rows.ndim != 2 or rows.shape[0] != rows.shape[1]:
            raise InvalidParameterError(f"branching matrix must be square, got shape {rows.shape}")
        if (rows < 0).any():
            raise InvalidParameterError("branching matrix entries must be non-negative")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)
        t = rows.shape[0]
        labels = self.labels
        if labels is None:
            labels = tuple(str(i + 1) for i in range(t))
        labels = tuple(str(s) for s in labels)
        if len(labels) != t:
            raise InvalidParameterError("one label per type required")
        object.__setattr__(self, "labels", labels)
        if not 0 <= self.root < max(t, 1):
            raise InvalidParameterError(f"root {self.root} out of range")
        transient = self.transient
        if transient is None:
            transient = _transient_types(rows, self.root) if t else frozenset()
        transient = frozenset(int(i) for i in transient)
        if any(not 0 <= i < t for i in transient):
            raise InvalidParameterError("transient type index out of range")
        object.__setattr__(self, "transient", transient)

    @property
    def t(self):
        return self.rows.shape[0]

    def degree(self, i):
        return int(self.rows[i].sum())

    def children(self, i):
        """Sparse row ``i`` as a list of ``(type, count)`` pairs."""
        r = self.rows[i]
        return [(int(j), int(r[j])) for j in np.flatnonzero(r)]

    def slots(self, i):
        """Child types of row ``i`` as a sorted multiset (one entry per child)."""
        return [j for j, c in self.children(i) for _ in range(c)]

    @cached_property
    def core_types(self):
        """Indices of the non-transient types, in matrix order."""
        return tuple(i for i in range(self.t) if i not in self.transient)

    @cached_property
    def core(self):
        """The matrix restricted to non-transient types.

        Children of non-transient types are always non-transient, so the
        restriction loses no rows.
        """
        idx = list(self.core_types)
        if len(idx) == self.t:
            return self
        if not idx:
            raise InvalidParameterError("matrix has no recurrent types")
        sub = self.rows[np.ix_(idx, idx)]
        if not np.array_equal(sub.sum(axis=1), self.rows[idx].sum(axis=1)):
            raise InvalidParameterError("recurrent types have transient children")
        return BranchingMatrix(sub, tuple(self.labels[i] for i in idx), frozenset(), 0,
                               self.name)

    def index(self, label):
        return self.labels.index(label)

    def __eq__(self, other):
        if not isinstance(other, BranchingMatrix):
            return NotImplemented
        return (np.array_equal(self.rows, other.rows) and self.labels == other.labels
                and self.transient == other.transient and self.root == other.root)

    def __hash__(self):
        return hash((self.rows.tobytes(), self.labels))

    def __repr__(self):
        return f"BranchingMatrix(t={self.t}, name={self.name!r})"

    def to_dict(self):
        return {
            "scale": "counts",
            "t": self.t,
            "labels": list(self.labels),
            "rows": self.rows.tolist(),
            "transient": sorted(self.transient),
            "root": self.root,
            "name": self.name,
        }

    @classmethod
    def from_dict(cls, data):
        if data.get("scale", "counts") != "counts":
            raise InvalidParameterError(f"unsupported matrix scale {data.get('scale')!r}")
        rows = data["rows"]
        if "t" in data and len(rows) != data["t"]:
            raise InvalidParameterError("row count does not match t")
        return cls(np.array(rows, dtype=np.int64).reshape(len(rows), len(rows)),
                   tuple(data.get("labels") or ()) or None,
                   frozenset(data.get("transient", ())), int(data.get("root", 0)),
                   data.get("name", ""))

    def to_json(self):
        return json.dumps(self.to_dict())


@dataclass(frozen=True)
class Partition:
    """Disjoint non-empty blocks covering ``range(t)``."""

    blocks: tuple
    t: int

    def __post_init__(self):
        blocks = tuple(tuple(sorted(int(x) for x in b)) for b in self.blocks)
        seen = set()
        for b in blocks:
            if not b:
                raise InvalidParameterError("partition blocks must be non-empty")
            for x in b:
                if x in seen:
                    raise InvalidParameterError(f"type {x} appears in two blocks")
                if not 0 <= x < self.t:
                    raise InvalidParameterError(f"type {x} out of range for t={self.t}")
                seen.add(x)
        if len(seen) != self.t:
            missing = sorted(set(range(self.t)) - seen)
            raise InvalidParameterError(f"partition does not cover types {missing[:10]}")
        object.__setattr__(self, "blocks", blocks)

    @classmethod
    def from_labels(cls, block_of):
        """Build from a per-type block id sequence; blocks ordered by first appearance."""
        order = {}
        groups = []
        for i, b in enumerate(block_of):
            if b not in order:
                order[b] = len(groups)
                groups.append([])
            groups[order[b]].append(i)
        return cls(tuple(groups), len(block_of))

    @classmethod
    def discrete(cls, t):
        return cls(tuple((i,) for i in range(t)), t)

    def __len__(self):
        return len(self.blocks)

    @cached_property
    def type_map(self):
        out = [0] * self.t
        for k, b in enumerate(self.blocks):
            for x in b:
                out[x] = k
        return tuple(out)

    def to_json(self):
        return json.dumps([list(b) for b in self.blocks])

    @classmethod
    def from_json(cls, text, t=None):
        blocks = json.loads(text)
        if t is None:
            t = sum(len(b) for b in blocks)
        return cls(tuple(tuple(b) for b in blocks), t)


@dataclass(frozen=True)
class ConsistencyViolation:
    block: int
    type_pair: tuple
    target_block: int
    sums: tuple


@dataclass(frozen=True)
class ConsistencyResult:
    consistent: bool
    violation: ConsistencyViolation = None

    def __bool__(self):
        return self.consistent


@dataclass(frozen=True)
class ReductionResult:
    reduced: BranchingMatrix
    partition: Partition
    type_map: tuple

    def to_dict(self, original=None):
        out = {
            "reduced": self.reduced.to_dict(),
            "partition": [list(b) for b in self.partition.blocks],
            "type_map": list(self.type_map),
        }
        if original is not None:
            out["original"] = original.to_dict()
        return out


def _resolve_partition(M, C):
    """Accept partitions of all types, or of the non-transient types only.

    Returns the matrix the partition applies to.
    """
    if C.t == M.t:
        return M
    if C.t == len(M.core_types):
        return M.core
    raise InvalidParameterError(
        f"partition covers {C.t} types; matrix has {M.t} ({len(M.core_types)} non-transient)")


def _block_sums(M, C):
    """Matrix of shape (t, k): sum of row s over each block."""
    k = len(C)
    sums = np.zeros((M.t, k), dtype=np.int64)
    for b, block in enumerate(C.blocks):
        sums[:, b] = M.rows[:, list(block)].sum(axis=1)
    return sums


def check_consistent(M, C):
    """Check that types in each block have equal block-wise row sums.

    Returns a :class:`ConsistencyResult`, falsy on failure, carrying the first
    violating block, type pair and target block.
    """
    M = _resolve_partition(M, C)
    sums = _block_sums(M, C)
    for b, block in enumerate(C.blocks):
        s0 = block[0]
        for s in block[1:]:
            diff = np.flatnonzero(sums[s] != sums[s0])
            if diff.size:
                tb = int(diff[0])
                return ConsistencyResult(False, ConsistencyViolation(
                    b, (s0, s), tb, (int(sums[s0, tb]), int(sums[s, tb]))))
    return ConsistencyResult(True)


def reduce(M, C):
    """Collapse the types of ``M`` along a consistent partition ``C``.

    Blocks keep the order of ``C``; the reduced type labels join the block
    members' labels with ``|``.
    """
    target = _resolve_partition(M, C)
    res = check_consistent(target, C)
    if not res:
        v = res.violation
        raise InconsistentPartitionError(
            f"partition inconsistent: block {v.block} types {v.type_pair} send "
            f"{v.sums[0]} vs {v.sums[1]} children into block {v.target_block}", v)
    sums = _block_sums(target, C)
    reduced_rows = np.array([sums[b[0]] for b in C.blocks], dtype=np.int64)
    labels = tuple("|".join(target.labels[x] for x in b) for b in C.blocks)
    tmap = C.type_map
    root = tmap[target.root]
    transient = frozenset(tmap[x] for x in target.transient
                          if all(y in target.transient for y in C.blocks[tmap[x]]))
    reduced = BranchingMatrix(reduced_rows, labels, transient, root, target.name)
    return ReductionResult(reduced, C, tmap)


def refine_to_consistent(M, C=None):
    """Coarsest consistent partition that refines ``C`` (default: one block).

    Standard partition refinement: split blocks by the signature of block-wise
    row sums until stable. Blocks are renumbered in breadth-first order from
    the root so reduced matrices come out in a canonical order.
    """
    if C is None:
        block = [0] * M.t
    else:
        M = _resolve_partition(M, C)
        block = list(C.type_map)
    rows = M.rows
    nz = [np.flatnonzero(rows[i]) for i in range(M.t)]
    nblocks = len(set(block))
    while True:
        sig = {}
        new = []
        for i in range(M.t):
            counts = {}
            for j in nz[i]:
                counts[block[j]] = counts.get(block[j], 0) + int(rows[i, j])
            key = (block[i], tuple(sorted(counts.items())))
            new.append(sig.setdefault(key, len(sig)))
        block = new
        if len(sig) == nblocks:
            break
        nblocks = len(sig)
    return _bfs_order(M, block)


def _bfs_order(M, block):
    """Renumber blocks by first discovery in a BFS from the root."""
    order = {}
    seen = {M.root}
    queue = deque([M.root])
    while queue:
        i = queue.popleft()
        order.setdefault(block[i], len(order))
        for j in np.flatnonzero(M.rows[i]):
            j = int(j)
            if j not in seen:
                seen.add(j)
                queue.append(j)
    for i in range(M.t):
        order.setdefault(block[i], len(order))
    groups = [[] for _ in order]
    for i in range(M.t):
        groups[order[block[i]]].append(i)
    return Partition(tuple(groups), M.t)


def fixed_point_values(M, lam, iterations=1000):
    """Iterate the tree recurrence over all types from the all-ones vector (float64)."""
    lam = float(lam)
    rows = M.rows.astype(float)
    x = np.ones(M.t)
    for _ in range(iterations):
        x = 1.0 / (1.0 + lam * np.exp(rows @ np.log(x)))
    return x


def propose_partition(M, lam=2.0, iterations=1000, cluster_tol=1e-9):
    """Cluster types by approximate fixed-point value of the tree recurrence.

    This is a heuristic: the returned partition must still pass
    :func:`check_consistent`. Values are compared after sorting; neighbours
    closer than ``cluster_tol`` share a block.
    """
    if float(lam) <= 0:
        raise InvalidParameterError("lambda must be positive")
    if iterations < 1:
        raise InvalidParameterError("iterations must be >= 1")
    x = fixed_point_values(M, lam, iterations)
    order = np.argsort(x, kind="stable")
    block = [0] * M.t
    cur = 0
    for n, i in enumerate(order):
        if n and x[i] - x[order[n - 1]] > cluster_tol:
            cur += 1
        block[i] = cur
    # Keep transient types apart from recurrent ones: their rows differ in
    # kind even when values coincide.
    labels = [(block[i], i in M.transient) for i in range(M.t)]
    return _bfs_order(M, labels)


def auto_reduce(M, lam=2.0, iterations=1000, cluster_tol=1e-9):
    """Propose a partition, refine it until consistent, and reduce."""
    proposal = propose_partition(M, lam, iterations, cluster_tol)
    C = proposal if check_consistent(M, proposal) else refine_to_consistent(M, proposal)
    return reduce(M, C)


def compose(C1, C2):
    """Partition of the original types obtained by reducing with C1, then C2."""
    if C2.t != len(C1):
        raise InvalidParameterError("second partition must act on the reduced types")
    m1 = C1.type_map
    m2 = C2.type_map
    return Partition.from_labels([m2[m1[i]] for i in range(C1.t)])


@dataclass
class _Interner:
    table: dict = field(default_factory=dict)

    def __call__(self, key):
        return self.table.setdefault(key, len(self.table))


def tree_signatures(M, depth, interner=None):
    """Canonical ids of the depth-``depth`` unlabelled trees rooted at each type.

    Two types (possibly in different matrices sharing ``interner``) generate
    isomorphic truncated trees iff their ids agree.
    """
    intern = interner if interner is not None else _Interner()
    kids = [M.children(i) for i in range(M.t)]
    sig = [intern(()) for _ in range(M.t)]
    for _ in range(depth):
        sig = [intern(tuple(sorted(s for j, c in kids[i] for s in [sig[j]] * c)))
               for i in range(M.t)]
    return sig


def same_generated_trees(M, reduction, depth=6):
    """Finite-depth check that every type and its reduced image generate the same tree."""
    intern = _Interner()
    original = M if reduction.partition.t == M.t else M.core
    a = tree_signatures(original, depth, intern)
    b = tree_signatures(reduction.reduced, depth, intern)
    return all(a[s] == b[reduction.type_map[s]] for s in range(original.t))
