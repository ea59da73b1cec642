"""Edmonds' blossom algorithm for minimum-weight perfect matching.

Primal-dual method in the Galil formulation, run on integer weights as a
maximum-weight perfect matching of the transformed weights 2 * (C - w).
Integer arithmetic keeps every dual exact, so the result is certified
afterwards by checking dual feasibility and complementary slackness edge
by edge.

Vertex duals are stored doubled (dualvar[v] = 2 * u(v)). A greedy pass
lowers each single vertex to its least feasible dual and matches the
tight edges that appear, which leaves only a few percent of the vertices
single. Each remaining single vertex then grows one alternating tree until
it reaches another single vertex. Duals inside the tree move lazily
against the running total of dual steps, and the next step is read off
three heaps, so a stage costs time in proportion to its tree rather than
to the whole graph.
"""

import heapq
import itertools
from typing import Collection, Iterator

import numpy as np

from instance import WeightedInstance
from matching.models import Matching, make_matching, verify_perfect
from matching.prepare import prepare
from utils.errors import NoPerfectMatching, OptimalityViolation
from utils.logging import get_logger

logger = get_logger(__name__)

NO_NODE = -1


class _Blossom:
    """A non-trivial (sub-)blossom.

    `childs` lists the sub-blossoms starting at the base and going round;
    `edges[i] = (v, w)` connects childs[i] to childs[i + 1] (wrapping).
    """

    __slots__ = ("childs", "edges")

    def __init__(self) -> None:
        self.childs: list = []
        self.edges: list[tuple[int, int]] = []

    def leaves(self) -> Iterator[int]:
        stack = [*self.childs]
        while stack:
            t = stack.pop()
            if isinstance(t, _Blossom):
                stack.extend(t.childs)
            else:
                yield t


def greedy_start(adj: list[dict[int, int]]) -> tuple[list[int], list[int]]:
    """Even, feasible duals and a matching made of tight edges.

    Steps:
    1. Start every dual at the largest incident weight
    2. Lower each single vertex to its least feasible dual and match it
       along a tight edge to a single neighbour
    3. Rematch along tight paths of length three (v-w=x-y with v, y single)

    Args:
        adj: Per vertex, neighbour -> positive even weight, symmetric.

    Returns:
        (mate, dualvar) with NO_NODE for single vertices.
    """
    n = len(adj)
    mate = [NO_NODE] * n
    dualvar = [max(nbrs.values(), default=0) for nbrs in adj]

    for v in range(n):
        if mate[v] != NO_NODE or not adj[v]:
            continue
        dualvar[v] = max(2 * wt - dualvar[w] for w, wt in adj[v].items())
        for w, wt in adj[v].items():
            if mate[w] == NO_NODE and dualvar[v] + dualvar[w] == 2 * wt:
                mate[v], mate[w] = w, v
                break

    for v in range(n):
        if mate[v] != NO_NODE:
            continue
        for w, wt in adj[v].items():
            if dualvar[v] + dualvar[w] != 2 * wt:
                continue
            x = mate[w]
            if x == NO_NODE:
                mate[v], mate[w] = w, v
                break
            y = next(
                (y for y, wt2 in adj[x].items() if mate[y] == NO_NODE and y != v and dualvar[x] + dualvar[y] == 2 * wt2),
                NO_NODE,
            )
            if y != NO_NODE:
                mate[v], mate[w], mate[x], mate[y] = w, v, y, x
                break
    return mate, dualvar


def _max_weight_perfect(n: int, adj: list[dict[int, int]]) -> list[int]:
    """Maximum-weight perfect matching, or the partial matching reached when none exists.

    Args:
        n: Vertex count; vertices are 0..n-1.
        adj: Per vertex, neighbour -> positive even integer weight, symmetric.

    Returns:
        mate[v], or NO_NODE for single vertices.
    """
    mate, dualvar = greedy_start(adj)
    logger.debug(f"Greedy start leaves {mate.count(NO_NODE)} of {n} vertices single")

    # label[b]: None free, 1 S-blossom, 2 T-blossom, 5 breadcrumb (scan only).
    label: dict = {}
    labeledge: dict = {}
    inblossom: list = list(range(n))
    blossomparent: dict = dict.fromkeys(range(n))
    blossombase: dict = {v: v for v in range(n)}
    blossomdual: dict = {}
    allowedge: set[tuple[int, int]] = set()
    queue: list[int] = []

    # Dual of x is stored + rate * (D - stamp); D sums the dual steps taken.
    D = 0
    stamp = [0] * n
    rate = [0] * n
    bstamp: dict = {}
    brate: dict = {}
    moving: dict = {}
    # Candidate steps keyed by the value of D at which they become due.
    heap_free: list[tuple[int, int, int]] = []
    heap_ss: list[tuple[int, int, int]] = []
    heap_t: list = []
    tiebreak = itertools.count()

    def vdual(v: int) -> int:
        r = rate[v]
        return dualvar[v] + r * (D - stamp[v]) if r else dualvar[v]

    def zdual(b: _Blossom) -> int:
        r = brate.get(b, 0)
        return blossomdual[b] + r * (D - bstamp[b]) if r else blossomdual[b]

    def set_vrate(v: int, r: int) -> None:
        if rate[v]:
            dualvar[v] += rate[v] * (D - stamp[v])
        stamp[v] = D
        rate[v] = r
        if r:
            moving[v] = None

    def set_brate(b: _Blossom, r: int) -> None:
        old = brate.get(b, 0)
        if old:
            blossomdual[b] += old * (D - bstamp[b])
        bstamp[b] = D
        brate[b] = r
        if r:
            moving[b] = None

    def slack(v: int, w: int) -> int:
        return vdual(v) + vdual(w) - 2 * adj[v][w]

    def start_moving(b, t: int) -> None:
        r = -1 if t == 1 else 1
        if isinstance(b, _Blossom):
            for x in b.leaves():
                set_vrate(x, r)
            set_brate(b, -r)
            if t == 2:
                heapq.heappush(heap_t, (D + blossomdual[b], next(tiebreak), b))
        else:
            set_vrate(b, r)

    def assign_label(w: int, t: int, v: int | None) -> None:
        b = inblossom[w]
        label[w] = label[b] = t
        labeledge[w] = labeledge[b] = None if v is None else (v, w)
        start_moving(b, t)
        if t == 1:
            if isinstance(b, _Blossom):
                queue.extend(b.leaves())
            else:
                queue.append(b)
        elif t == 2:
            # Only the base of a T-blossom has an external mate
            base = blossombase[b]
            assign_label(mate[base], 1, base)

    def scan_blossom(v: int, w: int) -> int:
        """Trace back from v and w; return a new blossom's base or NO_NODE for an augmenting path."""
        path = []
        base = NO_NODE
        while v != NO_NODE:
            b = inblossom[v]
            if label[b] & 4:
                base = blossombase[b]
                break
            path.append(b)
            label[b] = 5
            if labeledge[b] is None:
                v = NO_NODE
            else:
                v = labeledge[b][0]
                b = inblossom[v]
                v = labeledge[b][0]
            if w != NO_NODE:
                v, w = w, v
        for b in path:
            label[b] = 1
        return base

    def add_blossom(base: int, v: int, w: int) -> None:
        bb = inblossom[base]
        bv = inblossom[v]
        bw = inblossom[w]
        b = _Blossom()
        blossombase[b] = base
        blossomparent[b] = None
        blossomparent[bb] = b
        b.childs = path = []
        b.edges = edgs = [(v, w)]
        while bv != bb:
            blossomparent[bv] = b
            path.append(bv)
            edgs.append(labeledge[bv])
            v = labeledge[bv][0]
            bv = inblossom[v]
        path.append(bb)
        path.reverse()
        edgs.reverse()
        while bw != bb:
            blossomparent[bw] = b
            path.append(bw)
            edgs.append((labeledge[bw][1], labeledge[bw][0]))
            w = labeledge[bw][0]
            bw = inblossom[w]
        label[b] = 1
        labeledge[b] = labeledge[bb]
        blossomdual[b] = 0
        for bv in path:
            if isinstance(bv, _Blossom):
                set_brate(bv, 0)
        set_brate(b, 1)
        for v in b.leaves():
            if label[inblossom[v]] == 2:
                # Former T-vertex becomes S inside the new blossom
                queue.append(v)
            inblossom[v] = b
            set_vrate(v, -1)

    def expand_blossom(b: _Blossom, endstage: bool) -> None:
        def _recurse(b: _Blossom, endstage: bool):
            for s in b.childs:
                blossomparent[s] = None
                if isinstance(s, _Blossom):
                    if endstage and blossomdual[s] == 0:
                        yield s
                    else:
                        for v in s.leaves():
                            inblossom[v] = s
                            set_vrate(v, 0)
                else:
                    inblossom[s] = s
                    set_vrate(s, 0)

            # A T-blossom expanded mid-stage needs its sub-blossoms relabeled
            if (not endstage) and label.get(b) == 2:
                entrychild = inblossom[labeledge[b][1]]
                j = b.childs.index(entrychild)
                if j & 1:
                    j -= len(b.childs)
                    jstep = 1
                else:
                    jstep = -1
                v, w = labeledge[b]
                while j != 0:
                    if jstep == 1:
                        p, q = b.edges[j]
                    else:
                        q, p = b.edges[j - 1]
                    label[w] = None
                    label[q] = None
                    assign_label(w, 2, v)
                    allowedge.add((p, q))
                    allowedge.add((q, p))
                    j += jstep
                    if jstep == 1:
                        v, w = b.edges[j]
                    else:
                        w, v = b.edges[j - 1]
                    allowedge.add((v, w))
                    allowedge.add((w, v))
                    j += jstep
                bw = b.childs[j]
                label[w] = label[bw] = 2
                labeledge[w] = labeledge[bw] = (v, w)
                start_moving(bw, 2)
                j += jstep
                while b.childs[j] != entrychild:
                    bv = b.childs[j]
                    if label.get(bv) == 1:
                        j += jstep
                        continue
                    if isinstance(bv, _Blossom):
                        for v in bv.leaves():
                            if label.get(v):
                                break
                    else:
                        v = bv
                    if label.get(v):
                        label[v] = None
                        label[mate[blossombase[bv]]] = None
                        assign_label(v, 2, labeledge[v][0])
                    j += jstep

            label.pop(b, None)
            labeledge.pop(b, None)
            brate.pop(b, None)
            bstamp.pop(b, None)
            del blossomparent[b]
            del blossombase[b]
            del blossomdual[b]

        leaves = [] if endstage else list(b.leaves())
        # Trampoline keeps the Python call stack flat for deep nesting
        stack = [_recurse(b, endstage)]
        while stack:
            top = stack[-1]
            for s in top:
                stack.append(_recurse(s, endstage))
                break
            else:
                stack.pop()

        # Vertices left unlabeled can now be reached from the S side
        for x in leaves:
            bx = inblossom[x]
            if label.get(bx) is not None:
                continue
            for y in adj[x]:
                by = inblossom[y]
                if by != bx and label.get(by) == 1:
                    heapq.heappush(heap_free, (D + slack(y, x), y, x))

    def augment_blossom(b: _Blossom, v: int) -> None:
        def _recurse(b: _Blossom, v: int):
            t = v
            while blossomparent[t] != b:
                t = blossomparent[t]
            if isinstance(t, _Blossom):
                yield (t, v)
            i = j = b.childs.index(t)
            if i & 1:
                j -= len(b.childs)
                jstep = 1
            else:
                jstep = -1
            while j != 0:
                j += jstep
                t = b.childs[j]
                if jstep == 1:
                    w, x = b.edges[j]
                else:
                    x, w = b.edges[j - 1]
                if isinstance(t, _Blossom):
                    yield (t, w)
                j += jstep
                t = b.childs[j]
                if isinstance(t, _Blossom):
                    yield (t, x)
                mate[w] = x
                mate[x] = w
            b.childs = b.childs[i:] + b.childs[:i]
            b.edges = b.edges[i:] + b.edges[:i]
            blossombase[b] = blossombase[b.childs[0]]

        stack = [_recurse(b, v)]
        while stack:
            top = stack[-1]
            for args in top:
                stack.append(_recurse(*args))
                break
            else:
                stack.pop()

    def augment_matching(v: int, w: int) -> None:
        for s, j in ((v, w), (w, v)):
            while True:
                bs = inblossom[s]
                if isinstance(bs, _Blossom):
                    augment_blossom(bs, s)
                mate[s] = j
                if labeledge.get(bs) is None:
                    break
                t = labeledge[bs][0]
                bt = inblossom[t]
                s, j = labeledge[bt]
                if isinstance(bt, _Blossom):
                    augment_blossom(bt, j)
                mate[j] = s

    def verify_optimum() -> None:
        if blossomdual and min(blossomdual.values()) < 0:
            raise OptimalityViolation("Negative blossom dual")
        for v in range(n):
            for w, wt in adj[v].items():
                if w < v:
                    continue
                s = dualvar[v] + dualvar[w] - 2 * wt
                vchain = [v]
                wchain = [w]
                while blossomparent[vchain[-1]] is not None:
                    vchain.append(blossomparent[vchain[-1]])
                while blossomparent[wchain[-1]] is not None:
                    wchain.append(blossomparent[wchain[-1]])
                for bi, bj in zip(reversed(vchain), reversed(wchain)):
                    if bi != bj:
                        break
                    s += 2 * blossomdual[bi]
                if s < 0:
                    raise OptimalityViolation(f"Edge ({v}, {w}) has negative slack {s}")
                if mate[v] == w and s != 0:
                    raise OptimalityViolation(f"Matched edge ({v}, {w}) is not tight (slack {s})")
        for b, z in blossomdual.items():
            if z > 0:
                if len(b.edges) % 2 != 1:
                    raise OptimalityViolation("Blossom with positive dual has an even number of children")
                for i, j in b.edges[1::2]:
                    if mate[i] != j or mate[j] != i:
                        raise OptimalityViolation("Blossom with positive dual is not full")


    def next_delta():
        """Smallest due dual step as (delta, type, edge or blossom), or None when the tree is stuck."""
        best = None
        while heap_free:
            key, v, w = heap_free[0]
            bv, bw = inblossom[v], inblossom[w]
            if bv == bw or label.get(bv) != 1 or label.get(bw) is not None:
                heapq.heappop(heap_free)
                continue
            s = slack(v, w)
            if key != D + s:
                heapq.heapreplace(heap_free, (D + s, v, w))
                continue
            best = (s, 2, (v, w))
            break
        while heap_ss:
            key, v, w = heap_ss[0]
            bv, bw = inblossom[v], inblossom[w]
            if bv == bw or label.get(bv) != 1 or label.get(bw) != 1:
                heapq.heappop(heap_ss)
                continue
            s = slack(v, w)
            if s % 2:
                raise OptimalityViolation(f"Odd slack {s} between S-blossoms")
            if key != D + s // 2:
                heapq.heapreplace(heap_ss, (D + s // 2, v, w))
                continue
            if best is None or s // 2 < best[0]:
                best = (s // 2, 3, (v, w))
            break
        while heap_t:
            key, _, b = heap_t[0]
            if b not in blossomdual or blossomparent[b] is not None or label.get(b) != 2:
                heapq.heappop(heap_t)
                continue
            z = zdual(b)
            if key != D + z:
                heapq.heapreplace(heap_t, (D + z, next(tiebreak), b))
                continue
            if best is None or z < best[0]:
                best = (z, 4, b)
            break
        if best is not None and best[0] < 0:
            raise OptimalityViolation(f"Negative dual step {best[0]}")
        return best

    def end_stage(augmented: bool) -> None:
        for x in moving:
            if isinstance(x, _Blossom):
                if x in blossomdual:
                    set_brate(x, 0)
            else:
                set_vrate(x, 0)
        spent = [
            b for b in moving
            if isinstance(b, _Blossom) and b in blossomdual
            and blossomparent[b] is None and label.get(b) == 1 and blossomdual[b] == 0
        ] if augmented else []
        moving.clear()
        # S-blossoms whose dual dropped to zero are dissolved
        for b in spent:
            if b in blossomdual and blossomparent[b] is None:
                expand_blossom(b, True)
        label.clear()
        labeledge.clear()
        allowedge.clear()
        queue.clear()
        heap_free.clear()
        heap_ss.clear()
        heap_t.clear()

    root = 0
    while True:
        while root < n and mate[root] != NO_NODE:
            root += 1
        if root == n:
            break

        # One stage: grow the tree of `root` until it reaches another single vertex
        assign_label(root, 1, None)
        augmented = False
        while True:
            while queue and not augmented:
                v = queue.pop()
                for w in adj[v]:
                    bv = inblossom[v]
                    bw = inblossom[w]
                    if bv == bw:
                        continue
                    if (v, w) not in allowedge:
                        kslack = slack(v, w)
                        if kslack <= 0:
                            allowedge.add((v, w))
                            allowedge.add((w, v))
                    if (v, w) in allowedge:
                        if label.get(bw) is None:
                            if mate[blossombase[bw]] == NO_NODE:
                                augment_matching(v, w)
                                augmented = True
                                break
                            assign_label(w, 2, v)
                        elif label.get(bw) == 1:
                            base = scan_blossom(v, w)
                            if base != NO_NODE:
                                add_blossom(base, v, w)
                            else:
                                augment_matching(v, w)
                                augmented = True
                                break
                        elif label.get(w) is None:
                            # Reached from outside, inside a T-blossom
                            label[w] = 2
                            labeledge[w] = (v, w)
                    elif label.get(bw) == 1:
                        if kslack % 2:
                            raise OptimalityViolation(f"Odd slack {kslack} between S-blossoms")
                        heapq.heappush(heap_ss, (D + kslack // 2, v, w))
                    elif label.get(bw) is None:
                        heapq.heappush(heap_free, (D + kslack, v, w))

            if augmented:
                break

            step = next_delta()
            if step is None:
                break
            delta, deltatype, item = step
            D += delta
            if deltatype == 4:
                expand_blossom(item, False)
            else:
                v, w = item
                allowedge.add((v, w))
                allowedge.add((w, v))
                queue.append(v)

        end_stage(augmented)
        if not augmented:
            # The tree cannot grow: no perfect matching exists
            break

    for v in range(n):
        if mate[v] != NO_NODE and mate[mate[v]] != v:
            raise OptimalityViolation(f"Asymmetric mate at vertex {v}")
    verify_optimum()
    return mate


def min_weight_perfect_matching(
    inst: WeightedInstance,
    forbidden: Collection[int] = (),
    penalties: np.ndarray | None = None,
    ) -> Matching:
    """Exact minimum-weight perfect matching.

    Args:
        inst: Weighted instance.
        forbidden: Edge ids that may not be used.
        penalties: Optional non-negative per-edge additive penalties; they
            move the argmin only.

    Returns:
        The optimal matching, its cost in original weights and the
        penalized objective.

    Raises:
        NoPerfectMatching: The graph minus `forbidden` has no perfect matching.
        NonFiniteWeight: An effective weight is NaN or infinite.
        OptimalityViolation: The dual certificate failed.
    """
    sg = prepare(inst, forbidden, penalties)
    n = sg.num_vertices
    if n % 2:
        raise NoPerfectMatching(f"Odd vertex count {n}")

    top = max(sg.int_weights, default=0) + 1
    adj: list[dict[int, int]] = [{} for _ in range(n)]
    host: dict[tuple[int, int], int] = {}
    for (u, v), w, e in zip(sg.endpoints, sg.int_weights, sg.edge_ids):
        adj[u][v] = adj[v][u] = 2 * (top - w)
        host[(u, v)] = e

    mate = _max_weight_perfect(n, adj)
    ids = [host[(v, w)] for v, w in enumerate(mate) if v < w]
    if 2 * len(ids) != n:
        raise NoPerfectMatching(
            f"Maximum matching covers {2 * len(ids)} of {n} vertices "
            f"with {len(set(forbidden))} forbidden edges"
        )

    verify_perfect(inst.graph, ids)
    matching = make_matching(inst.weights, sg.effective, ids)
    logger.debug(f"Blossom matching on {n} vertices: cost {matching.cost:.6f}")
    return matching
