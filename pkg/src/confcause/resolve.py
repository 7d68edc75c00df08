"""Resolution of undecided edge marks into a mixed causal graph.

A discovered graph usually keeps circle marks where the data could not settle
an orientation. Each such edge is resolved by an information argument: if a
latent variable small enough (entropy below a fraction of the less complex
endpoint) could explain the dependence as pure confounding, the edge becomes
bidirected; otherwise the functional direction with the lower residual
complexity wins — the edge points from the endpoint whose conditional
entropy of the other is smaller. The output is an acyclic directed mixed
graph (ADMG): directed edges plus bidirected confounding edges, no circles.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from graphlib import CycleError, TopologicalSorter

from .dataset import Dataset, Kind, Role, VariableMeta
from .discovery import Mark, Pag, StructuralConstraints
from .errors import EngineError, UnknownVertex
from .stats import entropy, min_entropy_latent

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Admg:
    """Acyclic directed mixed graph over named vertices."""

    vertices: tuple[VariableMeta, ...]
    directed: frozenset[tuple[str, str]]
    bidirected: frozenset[frozenset[str]]
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        names = set(self.vertex_names)
        for u, v in self.directed:
            if u not in names or v not in names:
                raise UnknownVertex(f"edge endpoint not a vertex: {u}->{v}")
        for pair in self.bidirected:
            if not pair <= names:
                raise UnknownVertex(f"edge endpoints not vertices: {sorted(pair)}")
        self.topological_order()  # raises on a directed cycle

    @property
    def vertex_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.vertices)

    def meta(self, name: str) -> VariableMeta:
        for v in self.vertices:
            if v.name == name:
                return v
        raise UnknownVertex(f"no such vertex: {name}", vertex=name)

    def parents(self, v: str) -> tuple[str, ...]:
        return tuple(sorted(u for u, w in self.directed if w == v))

    def children(self, v: str) -> tuple[str, ...]:
        return tuple(sorted(w for u, w in self.directed if u == v))

    def spouses(self, v: str) -> tuple[str, ...]:
        """Vertices joined to v by a bidirected edge."""
        out = set()
        for pair in self.bidirected:
            if v in pair:
                out.update(pair - {v})
        return tuple(sorted(out))

    def ancestors(self, v: str) -> frozenset[str]:
        """Strict ancestors of v along directed edges."""
        seen: set[str] = set()
        stack = list(self.parents(v))
        while stack:
            u = stack.pop()
            if u in seen:
                continue
            seen.add(u)
            stack.extend(self.parents(u))
        return frozenset(seen)

    def topological_order(self) -> tuple[str, ...]:
        sorter = TopologicalSorter({n: [] for n in self.vertex_names})
        for u, v in sorted(self.directed):
            sorter.add(v, u)
        try:
            order: list[str] = []
            sorter.prepare()
            while sorter.is_active():
                ready = sorted(sorter.get_ready())
                order.extend(ready)
                sorter.done(*ready)
            return tuple(order)
        except CycleError as exc:
            raise EngineError(f"directed part contains a cycle: {exc}") from exc

    def edge_count(self) -> int:
        return len(self.directed) + len(self.bidirected)

    def to_json_dict(self) -> dict:
        return {
            "vertices": [
                {"name": v.name, "role": v.role.value, "kind": v.kind.value}
                for v in self.vertices
            ],
            "directed": [[u, v] for u, v in sorted(self.directed)],
            "bidirected": [sorted(pair) for pair in sorted(self.bidirected, key=sorted)],
            "notes": list(self.notes),
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping) -> "Admg":
        vertices = tuple(
            VariableMeta(e["name"], Role(e["role"]), Kind(e["kind"]))
            for e in payload["vertices"]
        )
        directed = frozenset((u, v) for u, v in payload.get("directed", []))
        bidirected = frozenset(frozenset(p) for p in payload.get("bidirected", []))
        return cls(vertices, directed, bidirected, tuple(payload.get("notes", ())))

    def to_dot(self, name: str = "model") -> str:
        lines = [f"digraph {name} {{"]
        for v in self.vertices:
            shape = {"option": "box", "metric": "ellipse", "objective": "diamond"}[
                v.role.value
            ]
            lines.append(f'  "{v.name}" [shape={shape}];')
        for u, v in sorted(self.directed):
            lines.append(f'  "{u}" -> "{v}";')
        for pair in sorted(self.bidirected, key=sorted):
            a, b = sorted(pair)
            lines.append(f'  "{a}" -> "{b}" [dir=both, style=dashed];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def entropy_threshold(h_first: float, h_second: float, ratio: float = 0.8) -> float:
    """Latent-entropy budget for treating a dependence as pure confounding:
    a fraction of the simpler endpoint's marginal entropy."""
    if ratio <= 0.0:
        raise EngineError(f"ratio must be positive, got {ratio}", ratio=ratio)
    return ratio * min(h_first, h_second)


class _Assembler:
    """Accumulates resolved edges, repairing constraint and cycle violations."""

    def __init__(self, sc: StructuralConstraints | None) -> None:
        self.sc = sc
        self.directed: set[tuple[str, str]] = set()
        self.bidirected: set[frozenset[str]] = set()
        self.notes: list[str] = []

    def _reaches(self, src: str, dst: str) -> bool:
        stack = [src]
        seen = set()
        while stack:
            cur = stack.pop()
            if cur == dst:
                return True
            if cur in seen:
                continue
            seen.add(cur)
            stack.extend(w for u, w in self.directed if u == cur)
        return False

    def _direction_ok(self, u: str, v: str) -> bool:
        if self.sc is not None and not self.sc.allows_direction(u, v):
            return False
        return not self._reaches(v, u)  # adding u->v must not close a cycle

    def add_directed(self, u: str, v: str, origin: str) -> None:
        if self._direction_ok(u, v):
            self.directed.add((u, v))
            return
        if self._direction_ok(v, u):
            self.notes.append(f"{origin}: reversed {u}->{v} (constraint/cycle)")
            self.directed.add((v, u))
            return
        self.notes.append(f"{origin}: demoted {u}->{v} to bidirected (constraint/cycle)")
        self.add_bidirected(u, v, origin)

    def add_bidirected(self, u: str, v: str, origin: str) -> None:
        if self.sc is not None and not self.sc.allows_bidirected(u, v):
            # an exogenous endpoint cannot be confounded; point away from it
            if self.sc.role(u) == Role.OPTION and self._direction_ok(u, v):
                self.notes.append(f"{origin}: bidirected {u}-{v} redirected as {u}->{v}")
                self.directed.add((u, v))
                return
            if self.sc.role(v) == Role.OPTION and self._direction_ok(v, u):
                self.notes.append(f"{origin}: bidirected {u}-{v} redirected as {v}->{u}")
                self.directed.add((v, u))
                return
            self.notes.append(f"{origin}: dropped inadmissible bidirected {u}-{v}")
            return
        self.bidirected.add(frozenset((u, v)))


def resolve_edges(
    pag: Pag,
    ds: Dataset,
    theta_ratio: float = 0.8,
    sc: StructuralConstraints | None = None,
) -> Admg:
    """Resolve every undecided edge of ``pag`` into a directed or bidirected
    edge using entropies computed on ``ds`` (which must be fully discrete).

    Decided marks are copied verbatim. For each edge with a circle end, the
    minimum latent entropy H(Z) that could explain the pair as confounding is
    compared against ``theta_ratio * min(H(u), H(v))``: strictly below means
    bidirected, otherwise the direction with the smaller conditional entropy
    of effect given cause is emitted. Constraint- or cycle-violating emissions
    are repaired (reversed, else demoted to bidirected) and logged.
    """
    asm = _Assembler(sc)
    marginal: dict[str, float] = {}

    def h(name: str) -> float:
        if name not in marginal:
            marginal[name] = entropy(ds, [name]).value_bits
        return marginal[name]

    undecided: list[tuple[str, str]] = []
    for edge in sorted(pag.edges, key=lambda e: (e.u, e.v)):
        mu, mv = edge.mark_u, edge.mark_v
        if mu == Mark.TAIL and mv == Mark.ARROW:
            asm.add_directed(edge.u, edge.v, "copy")
        elif mu == Mark.ARROW and mv == Mark.TAIL:
            asm.add_directed(edge.v, edge.u, "copy")
        elif mu == Mark.ARROW and mv == Mark.ARROW:
            asm.add_bidirected(edge.u, edge.v, "copy")
        else:
            if Mark.CIRCLE not in (mu, mv):
                logger.info(
                    "undirected edge %s-%s routed through entropy resolution",
                    edge.u, edge.v,
                )
                asm.notes.append(f"undirected edge {edge.u}-{edge.v} resolved by entropy")
            undecided.append((edge.u, edge.v))

    for u, v in undecided:
        h_u, h_v = h(u), h(v)
        latent_bits, _ = min_entropy_latent(ds, u, v)
        threshold = entropy_threshold(h_u, h_v, theta_ratio)
        if latent_bits < threshold:
            asm.add_bidirected(u, v, "entropy")
            continue
        h_uv = entropy(ds, [u, v]).value_bits
        forward = h_uv - h_u   # H(v | u): residual complexity if u causes v
        backward = h_uv - h_v  # H(u | v): residual complexity if v causes u
        if forward < backward:
            asm.add_directed(u, v, "entropy")
        else:
            asm.add_directed(v, u, "entropy")

    return Admg(
        pag.vertices,
        frozenset(asm.directed),
        frozenset(asm.bidirected),
        tuple(asm.notes),
    )
