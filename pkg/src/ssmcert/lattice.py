"""Self-avoiding walk machines on the square lattice.

Walk states are windows of recent absolute steps, long enough to detect any
cycle of length at most ``ell``. Trimming applies the SAW-tree boundary rule
for a homogeneous neighbour ordering: a walk whose next step would close a
cycle at an occupied leaf is itself removed.
"""
from collections import deque
from dataclasses import dataclass
from enum import Enum
import random

import numpy as np

from .branching import BranchingMatrix, refine_to_consistent, reduce
from .errors import InvalidParameterError, ResourceLimitError

DEFAULT_CAP = 10**7


class Direction(Enum):
    N = (0, 1)
    E = (1, 0)
    S = (0, -1)
    W = (-1, 0)

    @property
    def opposite(self):
        return _OPPOSITE[self]

    @property
    def step(self):
        return self.value

    @classmethod
    def parse(cls, ch):
        try:
            return cls[ch]
        except KeyError:
            raise InvalidParameterError(f"unknown direction {ch!r}") from None


_OPPOSITE = {Direction.N: Direction.S, Direction.S: Direction.N,
             Direction.E: Direction.W, Direction.W: Direction.E}
_ALL = (Direction.N, Direction.E, Direction.S, Direction.W)


def _check_perm(perm):
    perm = tuple(Direction.parse(d) if isinstance(d, str) else d for d in perm)
    if sorted(d.name for d in perm) != ["E", "N", "S", "W"]:
        raise InvalidParameterError("an ordering must list each direction exactly once")
    return perm


class Ordering:
    """Neighbour ordering at every lattice vertex, smallest first.

    ``Ordering("NEWS")`` is homogeneous. ``Ordering.random(seed)`` draws an
    independent permutation per vertex, reproducibly from the seed.
    ``Ordering.per_vertex(mapping, default)`` pins chosen vertices.
    """

    def __init__(self, perm="NEWS"):
        self._perm = _check_perm(perm)
        self._rank = {d: k for k, d in enumerate(self._perm)}
        self._seed = None
        self._overrides = {}

    @classmethod
    def random(cls, seed):
        out = cls()
        out._seed = seed
        return out

    @classmethod
    def per_vertex(cls, mapping, default="NEWS"):
        out = cls(default)
        out._overrides = {tuple(v): {d: k for k, d in enumerate(_check_perm(p))}
                          for v, p in mapping.items()}
        return out

    @property
    def homogeneous(self):
        return self._seed is None and not self._overrides

    @property
    def permutation(self):
        if not self.homogeneous:
            raise InvalidParameterError("ordering is not homogeneous")
        return "".join(d.name for d in self._perm)

    def rank_at(self, vertex):
        if vertex in self._overrides:
            return self._overrides[vertex]
        if self._seed is None:
            return self._rank
        rng = random.Random(f"{self._seed}:{vertex[0]}:{vertex[1]}")
        perm = list(_ALL)
        rng.shuffle(perm)
        return {d: k for k, d in enumerate(perm)}

    def __repr__(self):
        if self._seed is not None:
            return f"Ordering.random({self._seed!r})"
        return f"Ordering({self.permutation!r})" if self.homogeneous else "Ordering(per-vertex)"


def _move(p, d):
    return (p[0] + d.value[0], p[1] + d.value[1])


def _closing_leaf_occupied(rank, out_step, back_step):
    """Boundary value of a leaf that returns to ``w``.

    ``out_step`` leads from ``w`` to the first vertex after it on the cycle,
    ``back_step`` from ``w`` to the last one. The leaf is occupied when the
    first comes earlier in ``w``'s ordering.
    """
    return rank[out_step] < rank[back_step]


@dataclass(frozen=True)
class WalkState:
    """A window of the most recent absolute steps of a walk ('' is the origin)."""

    history: str

    @property
    def label(self):
        return self.history or "O"

    def positions(self):
        p = (0, 0)
        out = [p]
        for ch in self.history:
            p = _move(p, Direction[ch])
            out.append(p)
        return out


def _expand(state, window, rank):
    """Children windows of ``state`` and whether trimming removes the state."""
    pos = state.positions()
    here = pos[-1]
    visited = {p: k for k, p in enumerate(pos[:-1])}
    last = Direction[state.history[-1]] if state.history else None
    kids = []
    dead = False
    for d in _ALL:
        if last is not None and d is last.opposite:
            continue
        nxt = _move(here, d)
        if nxt in visited:
            if rank is not None:
                out_step = Direction[state.history[visited[nxt]]]
                if _closing_leaf_occupied(rank, out_step, d.opposite):
                    dead = True
            continue
        kids.append((state.history + d.name)[-window:])
    return kids, dead


def build_cycle_free_matrix(ell, trim_boundary=False, ordering=None, minimize=None,
                            max_states=DEFAULT_CAP):
    """Branching matrix of walks truncated on closing a cycle of length <= ``ell``.

    Types are windows of the last ``ell - 1`` steps, reached breadth-first
    from the origin. With ``trim_boundary`` the homogeneous ``ordering``
    (default N, E, W, S) fixes cycle-closing leaves and walks that would close
    at an occupied leaf are dropped.

    ``minimize`` merges types generating identical trees (coarsest consistent
    partition). By default this is done for the untrimmed matrix only, whose
    minimal form is the small classic matrix; trimmed matrices keep their
    window types so the labels still encode walks.
    """
    if not isinstance(ell, (int, np.integer)) or isinstance(ell, bool):
        raise InvalidParameterError("ell must be an integer")
    if ell < 4 or ell % 2:
        raise InvalidParameterError(f"ell must be an even integer >= 4, got {ell}")
    if ell > 10:
        raise InvalidParameterError(f"ell > 10 is not supported, got {ell}")
    ordering = ordering or Ordering()
    if trim_boundary and not ordering.homogeneous:
        raise InvalidParameterError("trimming requires a homogeneous ordering")
    rank = ordering.rank_at((0, 0)) if trim_boundary else None
    window = ell - 1

    info = {}
    queue = deque([""])
    while queue:
        h = queue.popleft()
        if h in info:
            continue
        if len(info) >= max_states:
            raise ResourceLimitError(f"state count exceeded cap of {max_states}", max_states)
        kids, dead = _expand(WalkState(h), window, rank)
        info[h] = (kids, dead)
        queue.extend(k for k in kids if k not in info)

    order = []
    seen = {""}
    queue = deque([""])
    while queue:
        h = queue.popleft()
        order.append(h)
        for k in info[h][0]:
            if not info[k][1] and k not in seen:
                seen.add(k)
                queue.append(k)
    index = {h: i for i, h in enumerate(order)}
    rows = np.zeros((len(order), len(order)), dtype=np.int64)
    for h in order:
        for k in info[h][0]:
            if k in index:
                rows[index[h], index[k]] += 1
    labels = tuple(WalkState(h).label for h in order)
    name = f"M_{ell}" if trim_boundary else f"M'_{ell}"
    M = BranchingMatrix(rows, labels, None, 0, name)
    if minimize is None:
        minimize = not trim_boundary
    if minimize:
        red = reduce(M, refine_to_consistent(M)).reduced
        labels = tuple(lab.split("|", 1)[0] for lab in red.labels)
        M = BranchingMatrix(red.rows, labels, red.transient, red.root, name)
    return M


_MACHINES = {
    "D_H": [
        ("O", "N E W"),
        ("N", "N E W"),
        ("E", "N E"),
        ("W", "N W"),
    ],
    "D_G": [
        ("O", "N E W"),
        ("N", "NN NE NW"),
        ("W", "WN WW"),
        ("E", "EN EE"),
        ("NN", "NN NE NW"),
        ("NW", "WN WW"),
        ("NE", "EN EE"),
        ("WW", "WN WW"),
        ("EE", "EN EE"),
        ("WN", "NW NN"),
        ("EN", "NE NN"),
    ],
    "D_prime": [
        ("O", "N E W"),
        ("N", "E W NN"),
        ("E", "N E"),
        ("W", "N W"),
        ("NN", "NN NNE NNW"),
        ("NNE", "N NEE"),
        ("NEE", "N E EES"),
        ("EES", "ESE"),
        ("ESE", "SEE"),
        ("SEE", "EEN"),
        ("EEN", "N E"),
        ("NNW", "N NWW"),
        ("NWW", "N W WWS"),
        ("WWS", "WSW"),
        ("WSW", "SWW"),
        ("SWW", "WWN"),
        ("WWN", "N W"),
    ],
}

# The origin and first-step states never recur in D_G. In D_prime the
# states N, E, W are re-entered (e.g. EEN -> N), so only O is transient there.
_TRANSIENT = {"D_H": ("O",), "D_G": ("O", "N", "E", "W"), "D_prime": ("O",)}

# Partitions under which the named machines collapse to their small forms.
NAMED_PARTITIONS = {
    "D_H": [["N"], ["E", "W"]],
    "D_G": [["NN"], ["NW", "NE", "WW", "EE"], ["WN", "EN"]],
    "D_prime": [["N"], ["E", "W", "EEN", "WWN"], ["NN"], ["NNE", "NNW"], ["NEE", "NWW"],
                ["EES", "WWS"], ["ESE", "WSW"], ["SEE", "SWW"]],
}


def machine_names():
    return tuple(_MACHINES)


def build_named_machine(name):
    """Transcription of a named walk machine, including its transient states."""
    aliases = {"DH": "D_H", "DG": "D_G", "D'": "D_prime", "DPRIME": "D_prime", "D_PRIME": "D_prime"}
    key = aliases.get(name.upper().replace("-", "_") if isinstance(name, str) else name, name)
    if key not in _MACHINES:
        raise InvalidParameterError(f"unknown machine {name!r}; choose from {', '.join(_MACHINES)}")
    rules = _MACHINES[key]
    labels = [lab for lab, _ in rules]
    idx = {lab: i for i, lab in enumerate(labels)}
    rows = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for lab, targets in rules:
        for tgt in targets.split():
            rows[idx[lab], idx[tgt]] += 1
    transient = frozenset(idx[s] for s in _TRANSIENT[key])
    return BranchingMatrix(rows, tuple(labels), transient, 0, key)


def named_partition(M, name=None):
    """The known consistent partition of a named machine's recurrent types."""
    from .branching import Partition
    core = M.core
    blocks = NAMED_PARTITIONS[name or M.name]
    return Partition(tuple(tuple(core.index(lab) for lab in b) for b in blocks), core.t)


def reduced_named_machine(name):
    M = build_named_machine(name)
    return reduce(M, named_partition(M, name)).reduced


def walks_of_machine(M, depth):
    """Step strings of all root-to-node paths of depth <= ``depth`` in the generated tree.

    A type's label must end in the step that enters it (true for walk
    machines built here and for the named machines).
    """
    steps = []
    for i, lab in enumerate(M.labels):
        if i == M.root:
            steps.append("")
            continue
        if lab[-1] not in "NESW":
            raise InvalidParameterError(f"label {lab!r} does not encode a step")
        steps.append(lab[-1])
    out = {""}
    frontier = [("", M.root)]
    for _ in range(depth):
        nxt = []
        for path, i in frontier:
            for j, c in M.children(i):
                p = path + steps[j]
                if c > 1:
                    raise InvalidParameterError("walk machines cannot repeat a step")
                out.add(p)
                nxt.append((p, j))
        frontier = nxt
    return out


@dataclass(frozen=True)
class SawTree:
    """Truncated SAW tree with boundary leaves resolved; nodes are step strings."""

    depth: int
    nodes: frozenset

    def children(self, path):
        return [path + d for d in "NESW" if path + d in self.nodes]

    def __len__(self):
        return len(self.nodes)

    def contains_paths(self, paths):
        return set(paths) <= self.nodes


def enumerate_saw_tree(box_radius, depth, ordering=None, max_nodes=DEFAULT_CAP):
    """SAW tree from the origin truncated at ``depth`` with the boundary rule applied.

    Unoccupied cycle-closing leaves are dropped and a vertex with an occupied
    leaf child is dropped together with its subtree. Vertices at the depth
    limit are resolved by looking one step further. ``box_radius`` only
    bounds the requested depth (``depth <= 2 * box_radius``); walks are not
    clipped to the box.
    """
    if depth < 0 or box_radius < 0:
        raise InvalidParameterError("depth and box_radius must be non-negative")
    if depth > 2 * box_radius:
        raise InvalidParameterError(f"depth {depth} exceeds 2*box_radius = {2 * box_radius}")
    ordering = ordering or Ordering()
    nodes = set()
    origin = (0, 0)
    # Iterative DFS over (path, positions list, visited index map).
    stack = [("", [origin], {origin: 0})]
    while stack:
        path, pos, visited = stack.pop()
        here = pos[-1]
        last = Direction[path[-1]] if path else None
        extensions = []
        dead = False
        for d in _ALL:
            if last is not None and d is last.opposite:
                continue
            nxt = _move(here, d)
            if nxt in visited:
                k = visited[nxt]
                out_step = Direction[path[k]]
                if _closing_leaf_occupied(ordering.rank_at(nxt), out_step, d.opposite):
                    dead = True
                    break
                continue
            extensions.append((d, nxt))
        if dead:
            continue
        nodes.add(path)
        if len(nodes) > max_nodes:
            raise ResourceLimitError(f"SAW tree exceeded node cap of {max_nodes}", max_nodes)
        if len(path) == depth:
            continue
        for d, nxt in extensions:
            vis = dict(visited)
            vis[nxt] = len(pos)
            stack.append((path + d.name, pos + [nxt], vis))
    return SawTree(depth, frozenset(nodes))
