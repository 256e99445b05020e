"""Moment combinatorics for the shifted Gram matrix H_n(z).

A pair of index sequences ``i = (i_1..i_k)``, ``j = (j_1..j_k)`` describes the
closed walk ``i_1 -> j_1 -> i_2 -> ... -> j_k -> i_1`` that indexes one term of
``tr H_n^k``.  Edge ``2u`` is the "down" edge ``i_u -> j_u`` (entry
``w[i_u, j_u]``) and edge ``2u + 1`` is the "up" edge ``j_u -> i_{u+1}``
(entry ``conj(w[i_{u+1}, j_u])``).  An edge is perpendicular when its two
labels coincide and skew otherwise.

Two pairs are isomorphic when they agree up to separate relabelling of the
upper and lower alphabets that preserves which edges are perpendicular.  The
canonical form of a class is therefore the restricted growth string of ``i``,
the restricted growth string of ``j`` and the tuple of perpendicularity flags.

The limit ``mu_k(|z|^2) = lim (1/n) E tr H_n^k`` is the number of
contributing classes counted with weight ``|z|^(2 |UP|)``, where ``UP`` is the
set of perpendicular up edges.  :func:`moment_polynomial` finds those classes
by a pruned walk enumeration; :func:`brute_force_moment_polynomial` scans
every pair in ``{1..2k}^(2k)`` and weighs each class by its leading-order
Gaussian moment instead, which shares no filtering logic with the former.
"""
from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .ensembles import EnsembleSpec, sample_matrix

__all__ = [
    "MAX_ENUM_K",
    "MAX_BRUTE_K",
    "BudgetError",
    "DeltaGraphClass",
    "MomentPolynomial",
    "GammaTree",
    "restricted_growth",
    "canonical_class",
    "enumerate_delta_classes",
    "moment_polynomial",
    "brute_force_moment_polynomial",
    "catalan",
    "class_table",
    "gamma_tree_from_class",
    "empirical_trace_moment",
    "empirical_trace_moments",
    "xi_tree_sum",
    "xi_n_estimate",
]

MAX_ENUM_K = 10
MAX_BRUTE_K = 4


class BudgetError(RuntimeError):
    """Requested size exceeds the enumeration or sampling budget."""


def catalan(k: int) -> int:
    return math.comb(2 * k, k) // (k + 1)


def restricted_growth(seq) -> tuple:
    """Relabel ``seq`` by order of first appearance, starting at 0."""
    seen: dict = {}
    return tuple(seen.setdefault(x, len(seen)) for x in seq)


def _edge_pairs(upper, lower):
    """(upper label, lower label, is_up) for the 2k edges in walk order."""
    k = len(upper)
    out = []
    for u in range(k):
        out.append((upper[u], lower[u], False))
        out.append((upper[(u + 1) % k], lower[u], True))
    return out


@dataclass(frozen=True)
class DeltaGraphClass:
    """Isomorphism class of Delta-graphs, stored in canonical form."""

    upper: tuple
    lower: tuple
    perp: tuple

    @property
    def k(self) -> int:
        return len(self.upper)

    def edges(self):
        return _edge_pairs(self.upper, self.lower)

    @property
    def n_skew(self) -> int:
        return sum(1 for f in self.perp if not f)

    @property
    def n_up(self) -> int:
        return sum(1 for (_, _, up), f in zip(self.edges(), self.perp) if f and up)

    @property
    def n_down(self) -> int:
        return sum(1 for (_, _, up), f in zip(self.edges(), self.perp) if f and not up)

    def canonical(self) -> "DeltaGraphClass":
        return canonical_class(self.upper, self.lower, self.perp)

    def skew_multiplicities(self) -> Counter:
        """Multiplicity of each skew entry ``(upper block, lower block)``."""
        return Counter((a, b) for (a, b, _), f in zip(self.edges(), self.perp) if not f)

    def merged_vertices(self) -> dict:
        """Map each upper block ``('u', a)`` and lower block ``('l', b)`` to its
        vertex after contracting perpendicular edges."""
        parent = {}

        def find(x):
            parent.setdefault(x, x)
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for (a, b, _), f in zip(self.edges(), self.perp):
            ra, rb = find(("u", a)), find(("l", b))
            if f and ra != rb:
                parent[ra] = rb
        return {v: find(v) for v in list(parent)}

    def contracted_graph(self):
        """Vertices and undirected simple edge set of the perpendicular-contracted,
        parallel-merged graph."""
        vmap = self.merged_vertices()
        vertices = set(vmap.values())
        edges = set()
        for (a, b, _), f in zip(self.edges(), self.perp):
            if not f:
                x, y = vmap[("u", a)], vmap[("l", b)]
                edges.add(frozenset((x, y)))
        return vertices, edges


def canonical_class(i, j, perp=None) -> DeltaGraphClass:
    """Canonical class of the pair ``(i, j)``.

    When ``perp`` is omitted the flags are read off the integer labels; pass
    it explicitly to re-canonicalise a class whose labels live in separate
    upper and lower alphabets.
    """
    i, j = tuple(i), tuple(j)
    if len(i) != len(j) or not i:
        raise ValueError("i and j must be nonempty and of equal length")
    if perp is None:
        perp = tuple(a == b for a, b, _ in _edge_pairs(i, j))
    return DeltaGraphClass(restricted_growth(i), restricted_growth(j), tuple(bool(f) for f in perp))


def _is_tree(vertices, edges) -> bool:
    if len(edges) != len(vertices) - 1:
        return False
    parent = {v: v for v in vertices}

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for e in edges:
        if len(e) != 2:
            return False
        x, y = tuple(e)
        rx, ry = find(x), find(y)
        if rx == ry:
            return False
        parent[rx] = ry
    return True


def _contributes(cls: DeltaGraphClass) -> bool:
    mult = cls.skew_multiplicities()
    if any(m != 2 for m in mult.values()):
        return False
    vertices, edges = cls.contracted_graph()
    if len(vertices) != cls.n_skew // 2 + 1 or not _is_tree(vertices, edges):
        return False
    # perpendicular edges at each merged vertex split evenly between up and down
    balance: dict = defaultdict(int)
    for (a, b, up), f in zip(cls.edges(), cls.perp):
        if f:
            balance[(a, b)] += 1 if up else -1
    return all(v == 0 for v in balance.values())


@lru_cache(maxsize=None)
def _enumerate(k: int) -> tuple:
    """Depth-first walk over alternating label sequences with pruning.

    Position ``t`` of the walk is upper vertex ``i_{t//2}`` for even ``t`` and
    lower vertex ``j_{t//2}`` for odd ``t``.  Labels follow restricted growth
    in each alphabet.  A new (upper, lower) pair is either skew or, when both
    blocks are still unmatched, perpendicular.  Branches are cut when a skew
    entry appears a third time, when a new skew entry or merge would close a
    cycle in the contracted graph (cycles survive any later merge), or when
    more entries lack their second visit than edges remain.
    """
    results = []
    upper = [0]
    lower: list = []
    flag: dict = {}          # (a, b) -> perpendicular?
    matched_u: set = set()
    matched_l: set = set()
    mult: Counter = Counter()
    perp_seq: list = []

    def find(node, parent):
        while node in parent:
            node = parent[node]
        return node

    def add_edge(a, b, parent, n_open, t, cont):
        remaining = 2 * k - t
        key = (a, b)
        if key in flag:
            if flag[key]:
                perp_seq.append(True)
                cont(parent, n_open)
                perp_seq.pop()
            elif mult[key] == 1 and n_open - 1 <= remaining:
                mult[key] += 1
                perp_seq.append(False)
                cont(parent, n_open - 1)
                perp_seq.pop()
                mult[key] -= 1
            return
        va, vb = find(("u", a), parent), find(("l", b), parent)
        if va == vb:
            # any new entry between already-joined blocks closes a cycle
            return
        joined = dict(parent)
        joined[va] = vb
        if a not in matched_u and b not in matched_l:
            flag[key] = True
            matched_u.add(a)
            matched_l.add(b)
            perp_seq.append(True)
            cont(joined, n_open)
            perp_seq.pop()
            matched_u.discard(a)
            matched_l.discard(b)
        if n_open + 1 <= remaining:
            flag[key] = False
            mult[key] = 1
            perp_seq.append(False)
            cont(joined, n_open + 1)
            perp_seq.pop()
            del mult[key]
        flag.pop(key, None)

    def close(parent, n_open):
        if n_open == 0:
            cls = DeltaGraphClass(tuple(upper), tuple(lower), tuple(perp_seq))
            if _contributes(cls):
                results.append(cls)

    def walk(t, n_upper, n_lower, parent, n_open):
        if t == 2 * k:
            add_edge(upper[0], lower[-1], parent, n_open, t, close)
            return
        is_lower = t % 2 == 1
        for lab in range((n_lower if is_lower else n_upper) + 1):
            if is_lower:
                lower.append(lab)
                a, b = upper[-1], lab
                nu, nl = n_upper, n_lower + (lab == n_lower)
            else:
                upper.append(lab)
                a, b = lab, lower[-1]
                nu, nl = n_upper + (lab == n_upper), n_lower
            add_edge(a, b, parent, n_open, t,
                     lambda p, o, nu=nu, nl=nl: walk(t + 1, nu, nl, p, o))
            (lower if is_lower else upper).pop()

    walk(1, 1, 0, {}, 0)
    return tuple(sorted(results, key=lambda c: (c.upper, c.lower, c.perp)))


def enumerate_delta_classes(k: int) -> list:
    """Contributing Delta-graph classes for ``tr H^k``.

    A class contributes when every skew entry occurs exactly twice, the
    perpendicular-contracted graph with parallel edges merged is a tree on
    ``|S|/2 + 1`` vertices, and perpendicular up and down edges balance at
    every merged vertex.
    """
    if not 1 <= k <= MAX_ENUM_K:
        raise BudgetError(f"k={k} outside the enumeration budget 1..{MAX_ENUM_K}")
    return list(_enumerate(k))


@dataclass(frozen=True)
class MomentPolynomial:
    """Coefficients of ``mu_k(t) = sum_j c_j t^j`` with ``t = |z|^2``."""

    k: int
    coefficients: tuple

    def __call__(self, z_abs2):
        """Evaluate at ``t = |z|^2``; arrays are evaluated elementwise."""
        val = np.polynomial.polynomial.polyval(z_abs2, np.asarray(self.coefficients, dtype=float))
        return float(val) if np.ndim(val) == 0 else val

    def at_z(self, z: complex) -> float:
        return self(abs(z) ** 2)

    def to_json(self) -> dict:
        return {"k": self.k, "coefficients": list(self.coefficients)}


def moment_polynomial(k: int) -> MomentPolynomial:
    counts = Counter(c.n_up for c in enumerate_delta_classes(k))
    return MomentPolynomial(k, tuple(counts.get(j, 0) for j in range(k + 1)))


def class_table(k: int) -> list:
    """Rows ``(k, |S|, |UP|, count)`` over contributing classes."""
    counts = Counter((c.n_skew, c.n_up) for c in enumerate_delta_classes(k))
    return [(k, s, up, counts[(s, up)]) for s, up in sorted(counts)]


# -- brute-force oracle -----------------------------------------------------

def _double_factorial_odd(m: int) -> int:
    # (m - 1)!! for even m: the m-th moment of a standard Gaussian
    return math.prod(range(m - 1, 0, -2)) if m > 0 else 1


def _leading_gaussian_weight(cls: DeltaGraphClass):
    """Leading-order contribution of one class for iid real N(0,1) entries.

    Returns ``(weight, n_down_perp, n_up_perp)`` with the class counted as
    ``weight * (-z)^down * (-conj z)^up``, or ``None`` if its contribution
    vanishes as n -> infinity.  The number of index assignments grows like
    ``n^V`` with V the number of contracted vertices, and the normalisation
    is ``n^(1 + |S|/2)``.
    """
    mult = cls.skew_multiplicities()
    if any(m % 2 for m in mult.values()):
        return None
    n_vertices = len(set(cls.merged_vertices().values()))
    if n_vertices != 1 + cls.n_skew // 2:
        return None
    weight = math.prod(_double_factorial_odd(m) for m in mult.values())
    return weight, cls.n_down, cls.n_up


def _all_tuples_rgs(k: int, m: int):
    tuples = np.array(list(itertools.product(range(m), repeat=k)), dtype=np.int64)
    rgs_ids: dict = {}
    ids = np.empty(len(tuples), dtype=np.int64)
    for r, t in enumerate(map(tuple, tuples)):
        ids[r] = rgs_ids.setdefault(restricted_growth(t), len(rgs_ids))
    inv = [None] * len(rgs_ids)
    for key, v in rgs_ids.items():
        inv[v] = key
    return tuples, ids, inv


def brute_force_classes(k: int) -> list:
    """Every Delta-graph class realised by some pair in ``{0..2k-1}^(2k)``."""
    if not 1 <= k <= MAX_BRUTE_K:
        raise BudgetError(f"brute force needs 1 <= k <= {MAX_BRUTE_K}, got {k}")
    m = 2 * k
    tuples, ids, inv = _all_tuples_rgs(k, m)
    codes = np.zeros((len(tuples), len(tuples)), dtype=np.int64)
    bit = 0
    for u in range(k):
        down = tuples[:, u][:, None] == tuples[:, u][None, :]
        up = tuples[:, (u + 1) % k][:, None] == tuples[:, u][None, :]
        codes |= down.astype(np.int64) << bit
        codes |= up.astype(np.int64) << (bit + 1)
        bit += 2
    n_rgs = len(inv)
    keys = (ids[:, None] * n_rgs + ids[None, :]) << (2 * k) | codes
    out = []
    for key in np.unique(keys):
        key = int(key)
        flags = key & ((1 << 2 * k) - 1)
        pair = key >> (2 * k)
        iu, jl = divmod(pair, n_rgs)
        perp = tuple(bool(flags >> e & 1) for e in range(2 * k))
        out.append(DeltaGraphClass(inv[iu], inv[jl], perp))
    return out


def brute_force_moment_polynomial(k: int) -> MomentPolynomial:
    """Oracle for :func:`moment_polynomial` by exhaustive scan (k <= 4).

    Each class found in the scan is weighed by its leading Gaussian moment
    times ``(-z)^down (-conj z)^up``.  The result must be a polynomial in
    ``|z|^2`` alone, which is checked.
    """
    poly: dict = defaultdict(int)
    for cls in brute_force_classes(k):
        w = _leading_gaussian_weight(cls)
        if w is None:
            continue
        weight, down, up = w
        poly[(down, up)] += weight * (-1) ** (down + up)
    coeffs = [0] * (k + 1)
    for (down, up), c in poly.items():
        if c == 0:
            continue
        if down != up:
            raise AssertionError(f"non-radial term z^{down} conj(z)^{up} with coefficient {c}")
        coeffs[up] += c
    return MomentPolynomial(k, tuple(coeffs))


# -- Gamma-trees and xi_n ---------------------------------------------------

@dataclass(frozen=True)
class GammaTree:
    """Rooted tree with special vertices and oriented edges.

    ``edges`` are ``(tail, head)`` pairs over vertices ``0 .. n_vertices-1``.
    For an ordinary-ordinary edge the tail must be in ``U`` and the head in
    ``D``; edges at special vertices carry the orientation given.  The
    orientation rules are checked on construction.
    """

    n_vertices: int
    edges: tuple
    root: int = 0
    special: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple((int(a), int(b)) for a, b in self.edges))
        object.__setattr__(self, "special", frozenset(self.special))
        self._validate()

    # adjacency and paths
    def _adj(self):
        adj = defaultdict(list)
        for a, b in self.edges:
            adj[a].append(b)
            adj[b].append(a)
        return adj

    def _oriented(self, a, b) -> bool:
        return (a, b) in set(self.edges)

    def path(self, u: int, w: int) -> list:
        adj = self._adj()
        prev = {u: None}
        stack = [u]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in prev:
                    prev[y] = x
                    stack.append(y)
        out = [w]
        while out[-1] != u:
            out.append(prev[out[-1]])
        return out[::-1]

    def partition(self):
        """``(U, D)`` partition of the ordinary vertices."""
        S = self.special
        U, D = set(), set()
        r = self.root
        for v in range(self.n_vertices):
            if v in S:
                continue
            p = self.path(r, v)
            m = len(p) - 1
            specials = [idx for idx, x in enumerate(p) if x in S]
            if not specials:
                (D if m % 2 == 1 else U).add(v)
                continue
            l = specials[-1]
            vl, vl1 = p[l], p[l + 1]
            if ((m - l) % 2 == 1 and self._oriented(vl, vl1)) or ((m - l) % 2 == 0 and self._oriented(vl1, vl)):
                D.add(v)
            else:
                U.add(v)
        return U, D

    def _validate(self):
        n = self.n_vertices
        if n < 1 or not 0 <= self.root < n:
            raise ValueError("invalid vertex count or root")
        if len(self.edges) != n - 1:
            raise ValueError("a tree on n vertices has n - 1 edges")
        seen = {self.root}
        adj = self._adj()
        stack = [self.root]
        while stack:
            x = stack.pop()
            for y in adj[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        if len(seen) != n:
            raise ValueError("edges do not form a connected tree")
        S = self.special
        # special-to-special paths through ordinary vertices
        for u, w in itertools.combinations(sorted(S), 2):
            p = self.path(u, w)
            if any(x in S for x in p[1:-1]):
                continue
            m = len(p) - 1
            first_out = self._oriented(u, p[1])
            last_in = self._oriented(p[-2], w)
            # odd m: first and last edges point the same way along the path
            if (m % 2 == 1) != (first_out == last_in):
                raise ValueError(f"orientation parity violated on special path {p}")
        if self.root not in S:
            for u in S:
                p = self.path(self.root, u)
                if any(x in S for x in p[:-1]):
                    continue
                m = len(p) - 1
                if self._oriented(p[-2], u) != (m % 2 == 1):
                    raise ValueError(f"orientation parity violated on root path {p}")
        U, D = self.partition()
        for a, b in self.edges:
            if a in S or b in S:
                continue
            if not (a in U and b in D):
                raise ValueError(f"ordinary edge {(a, b)} must run from U to D")


def gamma_tree_from_class(cls: DeltaGraphClass) -> GammaTree:
    """Gamma-tree attached to a contributing class.

    Merged upper/lower pairs become special vertices, pure upper blocks are
    ordinary ``U`` vertices, pure lower blocks ordinary ``D`` vertices, and
    each skew entry ``(upper, lower)`` becomes an edge oriented upper to
    lower.  The root is the vertex of ``i_1``.
    """
    vmap = cls.merged_vertices()
    reps = sorted(set(vmap.values()), key=repr)
    index = {v: t for t, v in enumerate(reps)}
    members = defaultdict(set)
    for node, rep in vmap.items():
        members[rep].add(node[0])
    special = frozenset(index[r] for r, kinds in members.items() if kinds == {"u", "l"})
    edges = set()
    for (a, b, _), f in zip(cls.edges(), cls.perp):
        if not f:
            edges.add((index[vmap[("u", a)]], index[vmap[("l", b)]]))
    return GammaTree(len(reps), tuple(sorted(edges)), root=index[vmap[("u", cls.upper[0])]], special=special)


def xi_tree_sum(tree: GammaTree, A) -> float:
    """``n^(-|E|-1) sum_i prod_{(u->v)} A[i_u, i_v]^2`` without distinctness constraints.

    Computed by message passing from the leaves to the root, ``O(|E| n^2)``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    X2 = A * A
    adj = defaultdict(list)
    for a, b in tree.edges:
        adj[a].append((b, True))   # a -> b
        adj[b].append((a, False))  # b -> a seen from b
    order, parent = [], {tree.root: None}
    stack = [tree.root]
    while stack:
        x = stack.pop()
        order.append(x)
        for y, _ in adj[x]:
            if y not in parent:
                parent[y] = x
                stack.append(y)
    msg = {}
    for v in reversed(order):
        m = np.ones(n)
        for c, out in adj[v]:
            if parent.get(c) != v:
                continue
            # out: edge v -> c, entry A[i_v, i_c]
            m = m * (X2 @ msg[c] if out else X2.T @ msg[c])
            m = m / n
        msg[v] = m
    return float(msg[tree.root].sum() / n)


def xi_n_estimate(tree: GammaTree, spec: EnsembleSpec, n: int, trials: int) -> dict:
    """Monte Carlo mean and standard error of the unconstrained tree sum.

    Dropping the distinctness constraints on the index map adds an
    ``O(1/n)`` relative bias.
    """
    if len(tree.edges) > 6 or n > 1024:
        raise BudgetError("xi_n estimation limited to |E| <= 6 and n <= 1024")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    vals = np.array([xi_tree_sum(tree, sample_matrix(spec, n, n, trial=t).entries) for t in range(trials)])
    se = float(vals.std(ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return {"mean": float(vals.mean()), "se": se, "n": n, "trials": trials, "values": vals,
            "bias_note": "distinctness constraints dropped: O(1/n) relative bias"}


# -- empirical trace moments ------------------------------------------------

def empirical_trace_moments(spec: EnsembleSpec, n: int, ks, z: complex, trials: int) -> dict:
    """Mean and SE of ``(1/n) tr H_n(z)^k`` for each ``k`` in ``ks``.

    Eigenvalues of ``H_n(z)`` are the squared singular values of
    ``A/sqrt(n) - z I``.
    """
    ks = list(ks)
    vals = np.empty((trials, len(ks)))
    for t in range(trials):
        A = sample_matrix(spec, n, n, trial=t).entries
        W = A / math.sqrt(n) - z * np.eye(n)
        lam = np.linalg.svd(W, compute_uv=False) ** 2
        vals[t] = [np.mean(lam**k) for k in ks]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.full(len(ks), math.nan)
    return {k: (float(m), float(s)) for k, m, s in zip(ks, mean, se)}


def empirical_trace_moment(spec: EnsembleSpec, n: int, k: int, z: complex, trials: int):
    """``(mean, se)`` of ``(1/n) tr H_n(z)^k`` over ``trials`` matrices."""
    return empirical_trace_moments(spec, n, [k], z, trials)[k]
