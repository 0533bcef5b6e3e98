"""Weighted multigraphs and the rewrite primitives used by net surgery.

A graph is a set of vertex ids plus edges (id, (a, b), multiplicity).  Loops
(a == b) are permitted; they count twice toward a vertex's edge-end count.
Every primitive returns a fresh graph; identity is by ids, never by
isomorphism.
"""

from __future__ import annotations

from .errors import ValidationError


class WeightedMultigraph:
    def __init__(self, vertices=(), edges=None):
        """edges: mapping eid -> (a, b, multiplicity)."""
        self.vertices = set(vertices)
        self.edges = {}
        for eid, (a, b, m) in (edges or {}).items():
            self._add_edge_checked(eid, a, b, m)
        self._counter = 0

    def _add_edge_checked(self, eid, a, b, m):
        if a not in self.vertices or b not in self.vertices:
            raise ValidationError(f"edge {eid!r} references undeclared vertex",
                                  module="multigraph", operation="add_edge")
        if not (isinstance(m, int) and m >= 1):
            raise ValidationError(f"edge {eid!r} multiplicity must be a "
                                  "positive integer", module="multigraph",
                                  operation="add_edge")
        if eid in self.edges:
            raise ValidationError(f"duplicate edge id {eid!r}",
                                  module="multigraph", operation="add_edge")
        self.edges[eid] = (a, b, int(m))

    # -- construction helpers ------------------------------------------

    def copy(self):
        g = WeightedMultigraph()
        g.vertices = set(self.vertices)
        g.edges = dict(self.edges)
        g._counter = self._counter
        return g

    def fresh_vertex_id(self):
        while True:
            self._counter += 1
            vid = f"v#{self._counter}"
            if vid not in self.vertices:
                return vid

    def fresh_edge_id(self):
        while True:
            self._counter += 1
            eid = f"e#{self._counter}"
            if eid not in self.edges:
                return eid

    @classmethod
    def cycle(cls, k, multiplicity=1, prefix=""):
        vids = [f"{prefix}v{i}" for i in range(k)]
        edges = {f"{prefix}e{i}": (vids[i], vids[(i + 1) % k], multiplicity)
                 for i in range(k)}
        return cls(vids, edges)

    @classmethod
    def theta(cls, n_edges=3, multiplicity=1):
        edges = {f"e{i}": ("a", "b", multiplicity) for i in range(n_edges)}
        return cls(["a", "b"], edges)

    @classmethod
    def star(cls, leaves, center="c"):
        vids = [center] + list(leaves)
        edges = {f"e{i}": (center, v, 1) for i, v in enumerate(leaves)}
        return cls(vids, edges)

    # -- queries ---------------------------------------------------------

    def edge_ends_at(self, v):
        """Number of edge-ends at v (a loop counts twice)."""
        cnt = 0
        for (a, b, _m) in self.edges.values():
            cnt += (a == v) + (b == v)
        return cnt

    def incident_edges(self, v):
        return sorted(eid for eid, (a, b, _m) in self.edges.items()
                      if v in (a, b))

    def degree_map(self):
        deg = {v: 0 for v in self.vertices}
        for (a, b, _m) in self.edges.values():
            deg[a] += 1
            deg[b] += 1
        return deg

    def components(self):
        """Connected components as sorted lists of vertex ids."""
        adj = {v: set() for v in self.vertices}
        for (a, b, _m) in self.edges.values():
            adj[a].add(b)
            adj[b].add(a)
        seen, comps = set(), []
        for v in sorted(self.vertices, key=str):
            if v in seen:
                continue
            stack, comp = [v], []
            seen.add(v)
            while stack:
                u = stack.pop()
                comp.append(u)
                for w in adj[u]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
            comps.append(sorted(comp, key=str))
        return comps

    def is_connected(self):
        return len(self.components()) <= 1

    def subgraph(self, vertex_subset):
        vs = set(vertex_subset)
        edges = {eid: e for eid, e in self.edges.items()
                 if e[0] in vs and e[1] in vs}
        g = WeightedMultigraph(vs, edges)
        g._counter = self._counter
        return g

    def multiplicities(self):
        return {eid: m for eid, (_a, _b, m) in self.edges.items()}


# ----------------------------------------------------------------------
# admissibility predicates


def is_good_star(g: WeightedMultigraph) -> bool:
    """Connected with at least three edge-ends at every vertex."""
    if not g.vertices or not g.is_connected():
        return False
    return all(g.edge_ends_at(v) >= 3 for v in g.vertices)


def is_cycle_graph(g: WeightedMultigraph) -> bool:
    if not g.vertices or not g.is_connected():
        return False
    return all(g.edge_ends_at(v) == 2 for v in g.vertices)


def is_good(g: WeightedMultigraph) -> bool:
    """good* or a cycle graph carrying one uniform multiplicity."""
    if is_good_star(g):
        return True
    if is_cycle_graph(g):
        mults = set(g.multiplicities().values())
        return len(mults) == 1
    return False


# ----------------------------------------------------------------------
# surgery primitives: each returns (new_graph, info)


def subdivide_edge(g: WeightedMultigraph, eid, l):
    """Split an edge into l equal parts; pieces inherit the multiplicity.

    info carries the new interior vertex ids (in order from the edge's first
    endpoint) and the chain of new edge ids.
    """
    if eid not in g.edges:
        raise ValidationError(f"no edge {eid!r}", module="multigraph",
                              operation="subdivide_edge")
    if l < 1:
        raise ValidationError("subdivision count must be >= 1",
                              module="multigraph", operation="subdivide_edge")
    a, b, m = g.edges[eid]
    out = g.copy()
    if l == 1:
        return out, {"new_vertices": [], "new_edges": [eid]}
    del out.edges[eid]
    vids = [out.fresh_vertex_id() for _ in range(l - 1)]
    out.vertices.update(vids)
    chain = [a] + vids + [b]
    eids = []
    for i in range(l):
        ne = out.fresh_edge_id()
        out.edges[ne] = (chain[i], chain[i + 1], m)
        eids.append(ne)
    return out, {"new_vertices": vids, "new_edges": eids}


def split_edge_once(g: WeightedMultigraph, eid):
    """Split an edge at one interior point: two edges, one new vertex."""
    out, info = subdivide_edge(g, eid, 2)
    return out, {"new_vertex": info["new_vertices"][0],
                 "new_edges": info["new_edges"]}


def replace_overlap(g: WeightedMultigraph, e1, e2, overlap):
    """Rewrite two edges overlapping along a common sub-arc into three edges.

    overlap = (va, vb): va is the endpoint of e2 interior to e1 and vb the
    endpoint of e1 interior to e2, so the new edges run (other end of e1) ->
    va with multiplicity n1, va -> vb with n1+n2, and vb -> (other end of e2)
    with n2.
    """
    for e in (e1, e2):
        if e not in g.edges:
            raise ValidationError(f"no edge {e!r}", module="multigraph",
                                  operation="replace_overlap")
    va, vb = overlap
    a1, b1, n1 = g.edges[e1]
    a2, b2, n2 = g.edges[e2]
    if va not in (a2, b2) or vb not in (a1, b1):
        raise ValidationError("overlap endpoints must belong to the edges",
                              module="multigraph", operation="replace_overlap")
    far1 = b1 if vb == a1 else a1
    far2 = b2 if va == a2 else a2
    out = g.copy()
    del out.edges[e1]
    del out.edges[e2]
    ids = []
    for (x, y, m) in ((far1, va, n1), (va, vb, n1 + n2), (vb, far2, n2)):
        ne = out.fresh_edge_id()
        out.edges[ne] = (x, y, m)
        ids.append(ne)
    return out, {"new_edges": ids,
                 "multiplicities": (n1, n1 + n2, n2)}


def split_at_crossing(g: WeightedMultigraph, e1, e2):
    """Introduce one vertex where two edge interiors cross transversally."""
    if e1 == e2:
        raise ValidationError("crossing requires two distinct edges",
                              module="multigraph", operation="split_at_crossing")
    out, i1 = split_edge_once(g, e1)
    out, i2 = split_edge_once(out, e2)
    v1, v2 = i1["new_vertex"], i2["new_vertex"]
    out, _ = identify_vertices(out, v1, v2)
    return out, {"vertex": v1, "edges_from_e1": i1["new_edges"],
                 "edges_from_e2": i2["new_edges"]}


def identify_vertices(g: WeightedMultigraph, v1, v2):
    """Quotient graph identifying v2 with v1."""
    for v in (v1, v2):
        if v not in g.vertices:
            raise ValidationError(f"no vertex {v!r}", module="multigraph",
                                  operation="identify_vertices")
    if v1 == v2:
        return g.copy(), {"kept": v1}
    out = g.copy()
    out.vertices.discard(v2)
    for eid, (a, b, m) in list(out.edges.items()):
        na = v1 if a == v2 else a
        nb = v1 if b == v2 else b
        out.edges[eid] = (na, nb, m)
    return out, {"kept": v1, "removed": v2}


def erase_colinear_vertex(g: WeightedMultigraph, v, e1, e2):
    """Remove a two-end vertex, merging its edges into one.

    Requires the two edge-ends at v to be exactly e1, e2 with equal
    multiplicities.  When the far endpoints coincide the result is a loop.
    """
    if v not in g.vertices:
        raise ValidationError(f"no vertex {v!r}", module="multigraph",
                              operation="erase_colinear_vertex")
    inc = g.incident_edges(v)
    if sorted([e1, e2]) != inc or g.edge_ends_at(v) != 2:
        raise ValidationError(f"vertex {v!r} must carry exactly the two "
                              "edge-ends being merged", module="multigraph",
                              operation="erase_colinear_vertex")
    a1, b1, n1 = g.edges[e1]
    a2, b2, n2 = g.edges[e2]
    if n1 != n2:
        raise ValidationError("multiplicity mismatch in erase",
                              module="multigraph",
                              operation="erase_colinear_vertex")
    far1 = b1 if a1 == v else a1
    far2 = b2 if a2 == v else a2
    out = g.copy()
    del out.edges[e1]
    del out.edges[e2]
    out.vertices.discard(v)
    ne = out.fresh_edge_id()
    out.edges[ne] = (far1, far2, n1)
    return out, {"new_edge": ne, "endpoints": (far1, far2), "loop": far1 == far2}
