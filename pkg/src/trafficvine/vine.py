"""R-vine structures: sequential selection, joint density, sampling, serialization.

Variable indices are 1-based throughout (matching the usual tree-diagram
labeling); tree ``t`` edges carry a conditioned pair and a conditioning set of
size ``t - 1``.  Conditional pair copulas are held constant in the
conditioning values (the simplifying assumption), so each edge stores a single
parametric pair copula.
"""

from __future__ import annotations

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bicop import EPS, DomainError, Family, PairCopula, hfunc, hinv, pdf
from .dependence import (
    DataMatrix,
    EmpiricalMarginal,
    Scale,
    kendall_tau,
    pseudo_obs,
)
from .fitting import CRITERIA, PairFitReport, fit_pair

log = logging.getLogger(__name__)


class StructureError(ValueError):
    """The tree sequence violates the vine conditions."""


class ModelFormatError(ValueError):
    """A serialized model file is malformed; message carries the field path."""


class NonFiniteDensityError(FloatingPointError):
    """A pair density underflowed to zero after capping."""


@dataclass(frozen=True, order=True)
class VineEdge:
    """Edge (a, b | cond) in tree ``level``; a < b, cond sorted."""

    a: int
    b: int
    cond: tuple[int, ...] = ()
    level: int = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise StructureError(f"conditioned pair must satisfy a < b, got ({self.a}, {self.b})")
        if tuple(sorted(self.cond)) != self.cond:
            raise StructureError(f"conditioning set must be sorted, got {self.cond}")
        if self.a in self.cond or self.b in self.cond:
            raise StructureError(f"conditioned pair overlaps conditioning set in {self}")
        if len(self.cond) != self.level - 1:
            raise StructureError(
                f"tree {self.level} edge needs |cond| = {self.level - 1}, got {self.cond}"
            )

    @property
    def variables(self) -> frozenset[int]:
        return frozenset((self.a, self.b)) | frozenset(self.cond)

    def partner(self, var: int) -> int:
        if var == self.a:
            return self.b
        if var == self.b:
            return self.a
        raise KeyError(f"{var} is not in the conditioned pair of {self}")

    def label(self) -> str:
        if self.cond:
            return f"{self.a},{self.b}|{','.join(map(str, self.cond))}"
        return f"{self.a},{self.b}"


@dataclass
class VineStructure:
    """Nested tree sequence T_1 .. T_{d-1} over d variables."""

    dim: int
    trees: list[list[VineEdge]]

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """Independent walk over the trees checking sizes, nesting, proximity.

        Tracks, for every node of tree t (an edge of tree t-1), the pair of
        tree-(t-1) node ids it joins; proximity demands that two nodes joined
        in tree t share one of those ids.
        """
        d = self.dim
        if d < 2:
            raise StructureError("vine needs at least 2 variables")
        if len(self.trees) != d - 1:
            raise StructureError(f"expected {d - 1} trees, got {len(self.trees)}")
        # per tree-(t-1) node: its variable set and the ids of the two
        # tree-(t-2) nodes it joined (variables join themselves)
        prev_vars: list[frozenset[int]] = [frozenset((k,)) for k in range(1, d + 1)]
        prev_ends: list[tuple[int, int]] = [(k, k) for k in range(d)]
        for t, tree in enumerate(self.trees, start=1):
            if len(tree) != d - t:
                raise StructureError(f"tree {t} must have {d - t} edges, got {len(tree)}")
            seen_pairs = set()
            adjacency = {i: set() for i in range(len(prev_vars))}
            new_vars: list[frozenset[int]] = []
            new_ends: list[tuple[int, int]] = []
            for e in tree:
                if e.level != t:
                    raise StructureError(f"edge {e.label()} carries level {e.level}, expected {t}")
                if not e.variables <= frozenset(range(1, d + 1)):
                    raise StructureError(f"edge {e.label()} uses variables outside 1..{d}")
                mates = [
                    (i, j)
                    for i in range(len(prev_vars))
                    for j in range(i + 1, len(prev_vars))
                    if prev_vars[i] | prev_vars[j] == e.variables
                    and len(prev_vars[i]) == t
                    and len(prev_vars[j]) == t
                    and (t == 1 or set(prev_ends[i]) & set(prev_ends[j]))
                ]
                if not mates:
                    raise StructureError(
                        f"edge {e.label()} violates the proximity condition in tree {t}"
                    )
                i, j = mates[0]
                if (i, j) in seen_pairs:
                    raise StructureError(f"duplicate edge {e.label()} in tree {t}")
                seen_pairs.add((i, j))
                adjacency[i].add(j)
                adjacency[j].add(i)
                new_vars.append(e.variables)
                new_ends.append((i, j))
            if not _is_spanning_tree(adjacency, len(prev_vars)):
                raise StructureError(f"tree {t} is not a spanning tree")
            prev_vars = new_vars
            prev_ends = new_ends

    def edges(self):
        for tree in self.trees:
            yield from tree

    def to_dict(self) -> dict:
        return {
            "d": self.dim,
            "trees": [
                [{"a": e.a, "b": e.b, "cond": list(e.cond)} for e in tree]
                for tree in self.trees
            ],
        }


def _is_spanning_tree(adjacency: dict[int, set[int]], n_nodes: int) -> bool:
    n_edges = sum(len(v) for v in adjacency.values()) // 2
    if n_edges != n_nodes - 1:
        return False
    seen = set()
    stack = [0]
    while stack:
        node = stack.pop()
        if node in seen:
            continue
        seen.add(node)
        stack.extend(adjacency[node] - seen)
    return len(seen) == n_nodes


@dataclass
class FittedVine:
    """A vine structure with one pair copula per edge and optional marginals."""

    structure: VineStructure
    copulas: dict[VineEdge, PairCopula]
    marginals: list[EmpiricalMarginal] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for e in self.structure.edges():
            if e not in self.copulas:
                raise StructureError(f"missing pair copula for edge {e.label()}")
        if self.marginals is not None and len(self.marginals) != self.structure.dim:
            raise StructureError("need one marginal per variable")

    @property
    def dim(self) -> int:
        return self.structure.dim

    @property
    def column_names(self) -> list[str]:
        if self.marginals:
            return [m.name or f"x{k}" for k, m in enumerate(self.marginals, start=1)]
        return [f"x{k}" for k in range(1, self.dim + 1)]


# ---------------------------------------------------------------------------
# sequential tree-by-tree structure selection

@dataclass
class _Node:
    """A tree-t node: the variables it spans, its conditional pseudo-data, and
    the endpoints (previous-tree node ids) of the edge it came from."""

    uset: frozenset[int]
    data: dict[int, np.ndarray]
    ends: tuple[int, int]


def _mst(n_nodes: int, candidates: list[tuple[float, tuple, int, int]]) -> list[int]:
    """Maximum spanning tree, Kruskal with ties broken by lexicographic key.

    ``candidates`` holds (weight, sort_key, node_i, node_j); returns indices
    into the candidate list.
    """
    order = sorted(range(len(candidates)), key=lambda k: (-candidates[k][0], candidates[k][1]))
    parent = list(range(n_nodes))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    chosen = []
    for k in order:
        _, _, i, j = candidates[k]
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj
            chosen.append(k)
            if len(chosen) == n_nodes - 1:
                break
    if len(chosen) != n_nodes - 1:
        raise StructureError("admissible edges do not connect the tree (proximity too tight)")
    return chosen


def _pair_arrays(n1: _Node, n2: _Node):
    """Conditioned pair (a < b), conditioning set, and the pseudo-data arrays
    aligned so the first array belongs to variable a."""
    left = n1.uset - n2.uset
    right = n2.uset - n1.uset
    if len(left) != 1 or len(right) != 1:
        raise StructureError("nodes do not differ in exactly one variable")
    x, y = next(iter(left)), next(iter(right))
    cond = tuple(sorted(n1.uset & n2.uset))
    if x < y:
        return x, y, cond, n1.data.get(x), n2.data.get(y)
    return y, x, cond, n2.data.get(y), n1.data.get(x)


def _admissible(n1: _Node, n2: _Node, level: int) -> bool:
    if level == 1:
        return True
    return len({*n1.ends} & {*n2.ends}) >= 1


def select_structure(
    u,
    candidates=None,
    criterion: str = "aic",
    weights: str = "abs_tau",
    threads: int = 1,
    trunc_level: int | None = None,
) -> FittedVine:
    """Sequential tree-by-tree structure selection with pair-copula fitting.

    Tree 1 is the maximum spanning tree over the complete graph weighted by
    |empirical Kendall tau| (or signed tau with ``weights="tau"``); deeper
    trees repeat the construction on h-transformed conditional
    pseudo-observations over the proximity-admissible edges.  Edges whose fit
    diverges fall back to independence with a logged warning.
    """
    if isinstance(u, DataMatrix):
        if u.scale is not Scale.COPULA:
            raise ValueError("select_structure expects copula-scale data")
        mat = u.values
    else:
        mat = np.asarray(u, dtype=float)
    if mat.ndim != 2:
        raise ValueError("u must be an (n, d) matrix")
    n, d = mat.shape
    if n < 30:
        raise ValueError(f"need at least 30 observations, got {n}")
    if d < 2:
        raise ValueError("need at least 2 variables")
    if np.any(mat <= 0.0) or np.any(mat >= 1.0):
        raise ValueError("copula-scale data must lie strictly inside (0, 1)")
    if weights not in ("abs_tau", "tau"):
        raise ValueError(f"weights must be 'abs_tau' or 'tau', got {weights!r}")
    if criterion not in CRITERIA:
        raise ValueError(f"criterion must be one of {CRITERIA}")

    nodes = [
        _Node(frozenset((k,)), {k: mat[:, k - 1]}, (k - 1, k - 1)) for k in range(1, d + 1)
    ]
    trees: list[list[VineEdge]] = []
    copulas: dict[VineEdge, PairCopula] = {}
    reports: dict[VineEdge, PairFitReport] = {}
    total_ll = 0.0

    for level in range(1, d):
        cand = []
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if not _admissible(nodes[i], nodes[j], level):
                    continue
                a, b, cond, ua, ub = _pair_arrays(nodes[i], nodes[j])
                tau = kendall_tau(ua, ub)
                w = abs(tau) if weights == "abs_tau" else tau
                cand.append((w, (a, b, cond), i, j))
        chosen = _mst(len(nodes), cand)
        chosen.sort(key=lambda k: cand[k][1])

        def fit_edge(k):
            _, (a, b, cond), i, j = cand[k]
            _, _, _, ua, ub = _pair_arrays(nodes[i], nodes[j])
            pair = np.column_stack([ua, ub])
            edge = VineEdge(a, b, cond, level)
            if trunc_level is not None and level > trunc_level:
                return edge, PairCopula(Family.INDEPENDENCE), None
            try:
                cop, report = fit_pair(pair, candidates=candidates, criterion=criterion)
                if report.fallback_independence:
                    log.warning("edge %s: all candidates failed, using independence", edge.label())
                return edge, cop, report
            except (DomainError, FloatingPointError) as exc:
                log.warning("edge %s: fit failed (%s), using independence", edge.label(), exc)
                return edge, PairCopula(Family.INDEPENDENCE), None

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(fit_edge, chosen))
        else:
            results = [fit_edge(k) for k in chosen]

        tree = []
        new_nodes = []
        for (edge, cop, report), k in zip(results, chosen):
            _, _, i, j = cand[k]
            a, b, _, ua, ub = _pair_arrays(nodes[i], nodes[j])
            copulas[edge] = cop
            if report is not None:
                reports[edge] = report
                total_ll += report.selected_fit.loglik
            tree.append(edge)
            h_a = np.clip(hfunc(cop, ua, ub, which=1), EPS, 1.0 - EPS)
            h_b = np.clip(hfunc(cop, ub, ua, which=2), EPS, 1.0 - EPS)
            new_nodes.append(_Node(edge.variables, {a: h_a, b: h_b}, (i, j)))
        trees.append(tree)
        nodes = new_nodes

    structure = VineStructure(d, trees)
    meta = {
        "criterion": criterion,
        "n": n,
        "log_likelihood": total_ll,
        "weights": weights,
    }
    fitted = FittedVine(structure, copulas, marginals=None, meta=meta)
    fitted.fit_reports = reports
    return fitted


def structure_from_weights(d: int, tree1_weights: dict[tuple[int, int], float]) -> VineStructure:
    """Build a structure from explicit tree-1 pair weights (no data).

    Deeper trees use zero weights, so they are resolved by the proximity
    condition plus lexicographic tie-breaking; for d = 4 the deeper trees are
    forced outright.
    """
    nodes = [_Node(frozenset((k,)), {}, (k - 1, k - 1)) for k in range(1, d + 1)]
    trees: list[list[VineEdge]] = []
    for level in range(1, d):
        cand = []
        for i in range(len(nodes)):
            for j in range(i + 1, len(nodes)):
                if not _admissible(nodes[i], nodes[j], level):
                    continue
                a, b, cond, _, _ = _pair_arrays(nodes[i], nodes[j])
                w = tree1_weights[(a, b)] if level == 1 else 0.0
                cand.append((w, (a, b, cond), i, j))
        chosen = _mst(len(nodes), cand)
        chosen.sort(key=lambda k: cand[k][1])
        tree = []
        new_nodes = []
        for k in chosen:
            _, (a, b, cond), i, j = cand[k]
            edge = VineEdge(a, b, cond, level)
            tree.append(edge)
            new_nodes.append(_Node(edge.variables, {}, (i, j)))
        trees.append(tree)
        nodes = new_nodes
    return VineStructure(d, trees)


def fit_vine(
    data: DataMatrix,
    candidates=None,
    criterion: str = "aic",
    weights: str = "abs_tau",
    threads: int = 1,
    trunc_level: int | None = None,
    jitter_discrete: bool = False,
    seed: int = 0,
) -> FittedVine:
    """Pseudo-observations + structure selection + empirical marginals."""
    if data.scale is Scale.COPULA:
        u = data
        marginals = None
    else:
        u = pseudo_obs(data, jitter_discrete=jitter_discrete, seed=seed)
        marginals = [
            EmpiricalMarginal(data.values[:, k], name)
            for k, name in enumerate(data.columns)
        ]
    fitted = select_structure(
        u,
        candidates=candidates,
        criterion=criterion,
        weights=weights,
        threads=threads,
        trunc_level=trunc_level,
    )
    fitted.marginals = marginals
    return fitted


# ---------------------------------------------------------------------------
# conditional recursion shared by density, sampling, and Rosenblatt

def _label_index(v: FittedVine) -> dict[tuple[int, frozenset[int]], VineEdge]:
    index = {}
    for e in v.structure.edges():
        index[(e.a, frozenset(e.cond) | {e.b})] = e
        index[(e.b, frozenset(e.cond) | {e.a})] = e
    return index


class _CondCache:
    """Memoized conditional CDF values F(var | given-set) per input batch."""

    def __init__(self, vine: FittedVine, u_cols: dict[int, np.ndarray]):
        self.vine = vine
        self.labels = _label_index(vine)
        self.vals: dict[tuple[int, frozenset[int]], np.ndarray] = {
            (k, frozenset()): col for k, col in u_cols.items()
        }

    def get(self, var: int, given: frozenset[int]) -> np.ndarray:
        key = (var, given)
        if key in self.vals:
            return self.vals[key]
        edge = self.labels[key]
        other = edge.partner(var)
        cond = frozenset(edge.cond)
        u_var = self.get(var, cond)
        u_other = self.get(other, cond)
        which = 1 if var == edge.a else 2
        out = np.clip(hfunc(self.vine.copulas[edge], u_var, u_other, which), EPS, 1.0 - EPS)
        self.vals[key] = out
        return out


def _as_matrix(v: FittedVine, x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    scalar = arr.ndim == 1
    if scalar:
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != v.dim:
        raise ValueError(f"expected points of dimension {v.dim}")
    return arr, scalar


def log_density_u(v: FittedVine, u) -> float | np.ndarray:
    """Copula-scale log density: sum of pair log densities over all edges."""
    mat, scalar = _as_matrix(v, u)
    if np.any(mat < 0.0) or np.any(mat > 1.0):
        raise DomainError("copula-scale points must lie in [0, 1]")
    mat = np.clip(mat, EPS, 1.0 - EPS)
    cache = _CondCache(v, {k: mat[:, k - 1] for k in range(1, v.dim + 1)})
    total = np.zeros(mat.shape[0])
    for e in v.structure.edges():
        cond = frozenset(e.cond)
        ua = cache.get(e.a, cond)
        ub = cache.get(e.b, cond)
        dens = pdf(v.copulas[e], ua, ub)
        dens = np.asarray(dens, dtype=float).reshape(-1)
        if np.any(dens <= 0.0):
            raise NonFiniteDensityError(
                f"pair density underflowed on edge {e.label()}"
            )
        total += np.log(dens)
    return float(total[0]) if scalar else total


def log_density(v: FittedVine, x) -> float | np.ndarray:
    """Data-scale log density: copula term at the marginal CDFs plus marginal
    log densities; points outside a marginal hull are clamped with a warning."""
    if v.marginals is None:
        raise ValueError("model has no marginals; use log_density_u")
    mat, scalar = _as_matrix(v, x)
    clamped = mat.copy()
    for k, m in enumerate(v.marginals):
        lo, hi = m.support
        clamped[:, k] = np.clip(mat[:, k], lo, hi)
    if np.any(clamped != mat):
        log.warning("log_density: %d coordinate(s) clamped to the marginal hull",
                    int(np.sum(clamped != mat)))
    u = np.column_stack([m.cdf(clamped[:, k]) for k, m in enumerate(v.marginals)])
    total = np.asarray(log_density_u(v, u), dtype=float).reshape(-1)
    for k, m in enumerate(v.marginals):
        f = np.asarray(m.pdf(clamped[:, k]), dtype=float).reshape(-1)
        if np.any(f <= 0.0):
            raise NonFiniteDensityError(f"marginal density underflowed for {m.name or k + 1}")
        total += np.log(f)
    return float(total[0]) if scalar else total


# ---------------------------------------------------------------------------
# sampling order and (inverse) Rosenblatt transform

def sampling_order(structure: VineStructure) -> tuple[list[int], dict[int, list[VineEdge]]]:
    """Peeling order sigma_1..sigma_d plus, per variable, its edge chain.

    The chain of sigma_k holds the k-1 edges (levels 1..k-1 ascending) whose
    conditioned pair contains sigma_k and whose variables are within
    {sigma_1..sigma_k}; the top of the chain realizes F(sigma_k | earlier).
    """
    d = structure.dim
    remaining = [list(tree) for tree in structure.trees]
    order_rev: list[int] = []
    for level in range(d - 1, 0, -1):
        tops = remaining[level - 1]
        if len(tops) != 1:
            raise StructureError(f"peeling found {len(tops)} top edges at level {level}")
        var = tops[0].b
        order_rev.append(var)
        remaining = [
            [e for e in tree if var not in e.variables] for tree in remaining[: level]
        ]
    last = remaining[0]
    if last:
        raise StructureError("peeling left unused edges")
    all_vars = set(range(1, d + 1))
    first = all_vars - set(order_rev)
    if len(first) != 1:
        raise StructureError("peeling did not isolate a first variable")
    order = [first.pop()] + order_rev[::-1]

    chains: dict[int, list[VineEdge]] = {}
    known: set[int] = {order[0]}
    for k, var in enumerate(order[1:], start=2):
        known.add(var)
        chain = sorted(
            (
                e
                for e in structure.edges()
                if var in (e.a, e.b) and e.variables <= known
            ),
            key=lambda e: e.level,
        )
        if len(chain) != k - 1 or [e.level for e in chain] != list(range(1, k)):
            raise StructureError(f"broken sampling chain for variable {var}")
        for lower, upper in zip(chain, chain[1:]):
            if frozenset(lower.cond) | {lower.partner(var)} != frozenset(upper.cond):
                raise StructureError(f"inconsistent chain nesting at {upper.label()}")
        chains[var] = chain
    return order, chains


def inverse_rosenblatt(v: FittedVine, w) -> np.ndarray:
    """Map independent uniforms to copula-scale samples of the vine."""
    mat, scalar = _as_matrix(v, w)
    if np.any(mat <= 0.0) or np.any(mat >= 1.0):
        mat = np.clip(mat, EPS, 1.0 - EPS)
    order, chains = sampling_order(v.structure)
    u_cols: dict[int, np.ndarray] = {order[0]: mat[:, order[0] - 1]}
    cache = _CondCache(v, u_cols)
    for var in order[1:]:
        val = mat[:, var - 1]
        for e in reversed(chains[var]):
            other = e.partner(var)
            given = cache.get(other, frozenset(e.cond))
            which = 1 if var == e.a else 2
            val = hinv(v.copulas[e], val, given, which)
            val = np.clip(val, EPS, 1.0 - EPS)
        u_cols[var] = val
        cache.vals[(var, frozenset())] = val
    out = np.column_stack([u_cols[k] for k in range(1, v.dim + 1)])
    return out[0] if scalar else out


def rosenblatt(v: FittedVine, u) -> np.ndarray:
    """Forward Rosenblatt transform of copula-scale points.

    Output column sigma_i - 1 holds F(sigma_i | sigma_1..sigma_{i-1}) along
    the model's sampling order, so columns stay aligned with the variables
    (the independence vine maps u to itself).  On model samples every column
    is standard uniform and ``inverse_rosenblatt`` is the exact inverse.
    """
    mat, scalar = _as_matrix(v, u)
    if np.any(mat <= 0.0) or np.any(mat >= 1.0):
        raise DomainError("rosenblatt input must lie strictly inside (0, 1)")
    order, chains = sampling_order(v.structure)
    cache = _CondCache(v, {k: np.clip(mat[:, k - 1], EPS, 1.0 - EPS) for k in range(1, v.dim + 1)})
    cols: dict[int, np.ndarray] = {order[0]: cache.get(order[0], frozenset())}
    for var in order[1:]:
        top = chains[var][-1]
        given = frozenset(top.cond) | {top.partner(var)}
        cols[var] = cache.get(var, given)
    out = np.column_stack([cols[k] for k in range(1, v.dim + 1)])
    return out[0] if scalar else out


def sample_u(v: FittedVine, n: int, seed: int) -> np.ndarray:
    """Draw n copula-scale samples; deterministic for a fixed seed.

    Uniforms come from a single counter-based Philox generator keyed by the
    seed, so results do not depend on thread count or evaluation schedule.
    """
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.Generator(np.random.Philox(key=int(seed)))
    w = rng.random((int(n), v.dim))
    return inverse_rosenblatt(v, w)


def sample(v: FittedVine, n: int, seed: int) -> DataMatrix:
    """Draw n data-scale samples through the marginal quantile functions."""
    if v.marginals is None:
        raise ValueError("model has no marginals; use sample_u")
    u = sample_u(v, n, seed)
    x = np.column_stack(
        [m.quantile(u[:, k]) for k, m in enumerate(v.marginals)]
    )
    return DataMatrix(x, Scale.DATA, v.column_names)


# ---------------------------------------------------------------------------
# JSON serialization

def _model_dict(v: FittedVine) -> dict:
    trees = []
    for tree in v.structure.trees:
        trees.append(
            [
                {
                    "a": e.a,
                    "b": e.b,
                    "cond": list(e.cond),
                    "copula": v.copulas[e].to_dict(),
                }
                for e in tree
            ]
        )
    marginals = []
    if v.marginals is not None:
        marginals = [
            {"name": m.name, "sorted": [float(x) for x in m.sorted_values]}
            for m in v.marginals
        ]
    return {"d": v.dim, "trees": trees, "marginals": marginals, "meta": v.meta}


def save_model(v: FittedVine, path) -> None:
    """Write the canonical JSON form (sorted keys, 2-space indent)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_model_dict(v), fh, indent=2, sort_keys=True)
        fh.write("\n")


def dumps_model(v: FittedVine) -> str:
    return json.dumps(_model_dict(v), indent=2, sort_keys=True) + "\n"


def _require(obj, key, kind, path):
    if key not in obj:
        raise ModelFormatError(f"{path}: missing field {key!r}")
    val = obj[key]
    if kind is float:
        if not isinstance(val, (int, float)) or isinstance(val, bool):
            raise ModelFormatError(f"{path}.{key}: expected a number")
        return float(val)
    if not isinstance(val, kind):
        raise ModelFormatError(f"{path}.{key}: expected {kind.__name__}")
    return val


def load_model(path) -> FittedVine:
    """Load and validate a model file; errors carry the offending field path."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ModelFormatError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{path}: top level must be an object")
    d = _require(obj, "d", int, "$")
    trees_obj = _require(obj, "trees", list, "$")
    if len(trees_obj) != d - 1:
        raise ModelFormatError(f"$.trees: expected {d - 1} trees for d={d}")
    trees: list[list[VineEdge]] = []
    copulas: dict[VineEdge, PairCopula] = {}
    for t, tree_obj in enumerate(trees_obj, start=1):
        if not isinstance(tree_obj, list):
            raise ModelFormatError(f"$.trees[{t - 1}]: expected a list")
        tree = []
        for k, edge_obj in enumerate(tree_obj):
            path_ = f"$.trees[{t - 1}][{k}]"
            if not isinstance(edge_obj, dict):
                raise ModelFormatError(f"{path_}: expected an object")
            a = _require(edge_obj, "a", int, path_)
            b = _require(edge_obj, "b", int, path_)
            cond = _require(edge_obj, "cond", list, path_)
            cop_obj = _require(edge_obj, "copula", dict, path_)
            try:
                cop = PairCopula.from_dict(cop_obj)
            except DomainError as exc:
                raise ModelFormatError(f"{path_}.copula: {exc}") from None
            try:
                edge = VineEdge(a, b, tuple(int(c) for c in cond), t)
            except StructureError as exc:
                raise ModelFormatError(f"{path_}: {exc}") from None
            tree.append(edge)
            copulas[edge] = cop
        trees.append(tree)
    try:
        structure = VineStructure(d, trees)
    except StructureError as exc:
        raise ModelFormatError(f"$.trees: {exc}") from None
    marg_obj = obj.get("marginals", [])
    if not isinstance(marg_obj, list):
        raise ModelFormatError("$.marginals: expected a list")
    marginals = None
    if marg_obj:
        if len(marg_obj) != d:
            raise ModelFormatError(f"$.marginals: expected {d} entries for d={d}")
        marginals = []
        for k, m in enumerate(marg_obj):
            path_ = f"$.marginals[{k}]"
            if not isinstance(m, dict):
                raise ModelFormatError(f"{path_}: expected an object")
            name = _require(m, "name", str, path_)
            vals = _require(m, "sorted", list, path_)
            if len(vals) < 2:
                raise ModelFormatError(f"{path_}.sorted: need at least 2 values")
            arr = np.asarray(vals, dtype=float)
            if np.any(np.diff(arr) < 0):
                raise ModelFormatError(f"{path_}.sorted: values must be ascending")
            marginals.append(EmpiricalMarginal(arr, name))
    meta = obj.get("meta", {})
    if not isinstance(meta, dict):
        raise ModelFormatError("$.meta: expected an object")
    return FittedVine(structure, copulas, marginals, meta)
