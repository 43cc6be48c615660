"""Build process graphs from declarative scenario files.

A scenario is a JSON document with five sections:

``topologies``
    per sector, ``{"nodes": [...], "edges": [[u, v], ...]}`` (undirected links).
``facilities``
    per sector, ``{"LABEL": physical_node, ...}``.
``processes``
    list of ``{"id", "label", "sector", "kind", ...}``.  ``kind`` is
    ``production``, ``service`` or ``delivery``.  Deliveries name a ``source``
    and ``destination`` facility and may give an explicit node ``path``;
    otherwise the unique shortest path is used.  ``resources`` lists the
    facilities executing the process (default: ``facility`` or ``source``).
    An optional ``qof_fraction`` overrides the global threshold.
``dependencies``
    list of ``{"source", "target", "weight"}``; incoming weights of each
    target must sum to one.
``defaults``
    ``qof_fraction``, ``partial_step`` and ``derived_weight``.

Deliveries whose physical route lies inside another delivery's route of the
same sector become parents of that delivery.  Their raw weight is
``derived_weight``; the receiving node's incoming weights are then rescaled
proportionally to sum to one.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import SECTORS, WEIGHT_TOL, GraphError, ProcessGraph

KINDS = ("production", "service", "delivery")
Edge = tuple[int, int]


class ScenarioError(ValueError):
    """A scenario file that cannot be turned into a graph."""

    def __init__(self, problems: list[str] | str):
        self.problems = [problems] if isinstance(problems, str) else list(problems)
        super().__init__("; ".join(self.problems))


class PathError(ScenarioError):
    pass


# -- resources -> processes --------------------------------------------------------


@dataclass(frozen=True)
class KnowledgeMatrix:
    processes: tuple[int, ...]
    resources: tuple[str, ...]
    entries: np.ndarray  # bool, processes x resources

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=bool)
        if e.shape != (len(self.processes), len(self.resources)):
            raise ValueError(f"knowledge matrix shape {e.shape} does not match "
                             f"{len(self.processes)} processes x {len(self.resources)} resources")
        idle = [p for p, row in zip(self.processes, e) if not row.any()]
        if idle:
            raise ValueError(f"processes without an executing resource: {idle}")
        object.__setattr__(self, "entries", e)

    def rows(self) -> list[list[str]]:
        out = [["process", *self.resources]]
        for p, row in zip(self.processes, self.entries):
            out.append([str(p), *("1" if x else "0" for x in row)])
        return out


def map_resources_to_processes(knowledge, resources) -> np.ndarray:
    """Processes enabled by the given available resources (boolean matrix-vector product)."""
    mat = knowledge.entries if isinstance(knowledge, KnowledgeMatrix) else np.asarray(knowledge, dtype=bool)
    vec = np.asarray(resources, dtype=bool)
    if mat.ndim != 2 or vec.ndim != 1 or mat.shape[1] != vec.shape[0]:
        raise ValueError(f"cannot apply a {mat.shape} knowledge matrix to {vec.shape[0]} resources")
    return (mat & vec).any(axis=1)


# -- physical topologies ------------------------------------------------------------


def _link(u: int, v: int) -> Edge:
    return (u, v) if u <= v else (v, u)


@dataclass(frozen=True)
class UtilityTopology:
    sector: str
    nodes: tuple[int, ...]
    edges: tuple[Edge, ...]
    facilities: dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        node_set = set(self.nodes)
        bad = [e for e in self.edges if e[0] not in node_set or e[1] not in node_set or e[0] == e[1]]
        if bad:
            raise ScenarioError(f"{self.sector}: invalid links {bad}")
        missing = {k: v for k, v in self.facilities.items() if v not in node_set}
        if missing:
            raise ScenarioError(f"{self.sector}: facilities on unknown nodes {missing}")
        object.__setattr__(self, "edges", tuple(sorted({_link(*e) for e in self.edges})))

    def adjacency(self) -> dict[int, list[int]]:
        adj: dict[int, list[int]] = {v: [] for v in self.nodes}
        for u, v in self.edges:
            adj[u].append(v)
            adj[v].append(u)
        return {k: sorted(vs) for k, vs in adj.items()}

    def components(self) -> int:
        adj, seen, count = self.adjacency(), set(), 0
        for s in self.nodes:
            if s in seen:
                continue
            count += 1
            stack = [s]
            seen.add(s)
            while stack:
                for w in adj[stack.pop()]:
                    if w not in seen:
                        seen.add(w)
                        stack.append(w)
        return count

    def location(self, facility: str) -> int:
        try:
            return self.facilities[facility]
        except KeyError:
            raise ScenarioError(f"facility {facility!r} is not placed in the {self.sector} network") from None


def resolve_shortest_path(topology: UtilityTopology, source: str, destination: str) -> list[Edge]:
    """Links of the unique fewest-hop route between two facilities."""
    s, t = topology.location(source), topology.location(destination)
    if s == t:
        raise PathError(f"{topology.sector}: {source} and {destination} share node {s}")
    adj = topology.adjacency()
    dist, count, pred = {s: 0}, {s: 1}, {}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for w in adj[u]:
            if w not in dist:
                dist[w], count[w], pred[w] = dist[u] + 1, count[u], u
                queue.append(w)
            elif dist[w] == dist[u] + 1:
                count[w] += count[u]
    if t not in dist:
        raise PathError(f"{topology.sector}: {destination} is unreachable from {source}")
    if count[t] > 1:
        raise PathError(f"{topology.sector}: {count[t]} shortest routes from {source} to "
                        f"{destination}; declare the path explicitly")
    walk = [t]
    while walk[-1] != s:
        walk.append(pred[walk[-1]])
    walk.reverse()
    return [_link(a, b) for a, b in zip(walk, walk[1:])]


def walk_links(topology: UtilityTopology, walk: list[int], source: str, destination: str) -> list[Edge]:
    """Validate an explicit node walk and return its links."""
    if len(walk) < 2 or walk[0] != topology.location(source) or walk[-1] != topology.location(destination):
        raise PathError(f"{topology.sector}: path {walk} does not run from {source} to {destination}")
    if len(set(walk)) != len(walk):
        raise PathError(f"{topology.sector}: path {walk} revisits a node")
    links = [_link(a, b) for a, b in zip(walk, walk[1:])]
    known = set(topology.edges)
    missing = [e for e in links if e not in known]
    if missing:
        raise PathError(f"{topology.sector}: path {walk} uses missing links {missing}")
    return links


@dataclass(frozen=True)
class DeliveryProcess:
    id: int
    sector: str
    source: str
    destination: str
    path: tuple[Edge, ...] | None = None


def _contains(outer: tuple[Edge, ...], inner: tuple[Edge, ...]) -> bool:
    k = len(inner)
    if k == 0 or k > len(outer):
        return False
    rev = inner[::-1]
    return any(outer[i:i + k] in (inner, rev) for i in range(len(outer) - k + 1))


def derive_path_dependencies(topology: UtilityTopology, processes, log: list[str] | None = None
                             ) -> list[tuple[int, int]]:
    """Pairs (B, A) where B's route is a contiguous stretch of A's route.

    Routes are compared as sequences of undirected links, in either direction.
    Processes of other sectors are ignored.  Routes that share links without
    nesting produce no pair and are only reported in ``log``.
    """
    routes = {}
    for p in processes:
        if p.sector != topology.sector:
            continue
        path = p.path if p.path is not None else resolve_shortest_path(topology, p.source, p.destination)
        if not path:
            raise PathError(f"process {p.id}: empty delivery path")
        routes[p.id] = tuple(path)
    pairs = []
    for a in sorted(routes):
        for b in sorted(routes):
            if a == b:
                continue
            if _contains(routes[a], routes[b]):
                pairs.append((b, a))
            elif log is not None and a < b and set(routes[a]) & set(routes[b]) \
                    and not _contains(routes[b], routes[a]):
                log.append(f"partial overlap, no dependency: {topology.sector} deliveries {a} and {b}")
    return sorted(pairs)


# -- scenarios -------------------------------------------------------------------------


@dataclass(frozen=True)
class ProcessSpec:
    id: int
    label: str
    sector: str
    kind: str
    resources: tuple[str, ...]
    facility: str | None = None
    source: str | None = None
    destination: str | None = None
    path: tuple[int, ...] | None = None
    qof_fraction: float | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topologies: dict[str, UtilityTopology]
    processes: tuple[ProcessSpec, ...]
    dependencies: tuple[tuple[int, int, float], ...]
    defaults: dict
    auto_normalize: bool = False


DEFAULTS = {"qof_fraction": 0.5, "partial_step": 0.2, "derived_weight": 1.0}


def load_scenario(source, auto_normalize: bool = False) -> ScenarioConfig:
    """Parse and validate a scenario from a path, bundled name, JSON text or a loaded dict.

    With ``auto_normalize`` a process whose declared incoming weights do not sum
    to one is rescaled at build time (and logged) instead of rejected.
    """
    if isinstance(source, dict):
        doc = source
    else:
        text = scenario_path(source).read_text(encoding="utf-8") \
            if not str(source).lstrip().startswith("{") else str(source)
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    problems: list[str] = []
    unknown = set(doc) - {"name", "description", "topologies", "facilities", "processes",
                          "dependencies", "defaults"}
    if unknown:
        problems.append(f"unknown sections {sorted(unknown)}")

    defaults = dict(DEFAULTS)
    defaults.update(doc.get("defaults") or {})
    for k in ("qof_fraction", "partial_step"):
        if not 0.0 <= float(defaults[k]) <= 1.0:
            problems.append(f"defaults.{k} outside [0, 1]")
    if float(defaults["derived_weight"]) <= 0.0:
        problems.append("defaults.derived_weight must be positive")

    topologies = {}
    facilities = doc.get("facilities") or {}
    for sector, t in (doc.get("topologies") or {}).items():
        if sector not in SECTORS:
            problems.append(f"unknown sector {sector!r}")
            continue
        try:
            fac = facilities.get(sector) or {}
            topologies[sector] = UtilityTopology(
                sector, tuple(int(v) for v in t.get("nodes", [])),
                tuple((int(u), int(v)) for u, v in t.get("edges", [])),
                {str(k): int(v) for k, v in fac.items()})
        except (ScenarioError, TypeError, ValueError) as exc:
            problems.append(str(exc))
    for sector in facilities:
        if sector not in topologies and sector in SECTORS:
            problems.append(f"facilities given for {sector!r} without a topology")

    procs, seen = [], set()
    for raw in doc.get("processes") or []:
        try:
            pid = int(raw["id"])
            kind = raw.get("kind", "production")
            sector = raw.get("sector", "other")
            if pid in seen:
                raise ScenarioError(f"duplicate process id {pid}")
            if kind not in KINDS:
                raise ScenarioError(f"process {pid}: unknown kind {kind!r}")
            if sector not in SECTORS:
                raise ScenarioError(f"process {pid}: unknown sector {sector!r}")
            facility = raw.get("facility")
            src, dst = raw.get("source"), raw.get("destination")
            path = tuple(int(v) for v in raw["path"]) if raw.get("path") is not None else None
            if kind == "delivery":
                if not src or not dst:
                    raise ScenarioError(f"process {pid}: deliveries need source and destination")
                if sector not in topologies:
                    raise ScenarioError(f"process {pid}: no {sector} topology for the delivery")
                topologies[sector].location(src)
                topologies[sector].location(dst)
            resources = tuple(raw.get("resources") or ([facility] if facility else [src] if src else []))
            if not resources:
                raise ScenarioError(f"process {pid}: no executing resource")
            qof = raw.get("qof_fraction")
            if qof is not None and not 0.0 <= float(qof) <= 1.0:
                raise ScenarioError(f"process {pid}: qof_fraction outside [0, 1]")
            seen.add(pid)
            procs.append(ProcessSpec(pid, str(raw.get("label", "")), sector, kind, resources,
                                     facility, src, dst, path,
                                     None if qof is None else float(qof)))
        except KeyError as exc:
            problems.append(f"process entry missing {exc}")
        except (ScenarioError, TypeError, ValueError) as exc:
            problems.append(str(exc))

    deps, incoming = [], {}
    for raw in doc.get("dependencies") or []:
        try:
            s, t, w = int(raw["source"]), int(raw["target"]), float(raw.get("weight", 1.0))
        except (KeyError, TypeError, ValueError) as exc:
            problems.append(f"bad dependency entry {raw!r}: {exc}")
            continue
        for v in (s, t):
            if v not in seen:
                problems.append(f"dependency {s}->{t}: unknown process {v}")
        if not 0.0 <= w <= 1.0:
            problems.append(f"dependency {s}->{t}: weight {w} outside [0, 1]")
        deps.append((s, t, w))
        incoming.setdefault(t, []).append(w)
    for t, ws in sorted(incoming.items()):
        if abs(sum(ws) - 1.0) > WEIGHT_TOL and not (auto_normalize and sum(ws) > 0):
            problems.append(f"process {t}: declared incoming weights sum to {sum(ws):.12g}, not 1")

    if problems:
        raise ScenarioError(problems)
    return ScenarioConfig(str(doc.get("name", "")), topologies, tuple(procs), tuple(deps), defaults,
                          auto_normalize)


@dataclass
class BuildResult:
    graph: ProcessGraph
    derived: list[tuple[int, int]]
    knowledge: KnowledgeMatrix
    log: list[str]


def knowledge_matrix(config: ScenarioConfig) -> KnowledgeMatrix:
    resources = sorted({r for p in config.processes for r in p.resources})
    col = {r: j for j, r in enumerate(resources)}
    entries = np.zeros((len(config.processes), len(resources)), dtype=bool)
    for i, p in enumerate(config.processes):
        for r in p.resources:
            entries[i, col[r]] = True
    return KnowledgeMatrix(tuple(p.id for p in config.processes), tuple(resources), entries)


def delivery_processes(config: ScenarioConfig) -> list[DeliveryProcess]:
    out = []
    for p in config.processes:
        if p.kind != "delivery":
            continue
        topo = config.topologies[p.sector]
        links = (walk_links(topo, list(p.path), p.source, p.destination) if p.path is not None
                 else resolve_shortest_path(topo, p.source, p.destination))
        out.append(DeliveryProcess(p.id, p.sector, p.source, p.destination, tuple(links)))
    return out


def _zero_weight_cycle(edges: dict[tuple[int, int], float]) -> list[int] | None:
    adj: dict[int, list[int]] = {}
    for (s, t), w in sorted(edges.items()):
        if w == 0.0:
            adj.setdefault(s, []).append(t)
    state: dict[int, int] = {}
    for root in sorted(adj):
        if root in state:
            continue
        stack = [(root, iter(adj.get(root, [])))]
        path = [root]
        state[root] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
                path.pop()
            elif state.get(nxt) == 1:
                return path[path.index(nxt):] + [nxt]
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(adj.get(nxt, []))))
                path.append(nxt)
    return None


def build(config: ScenarioConfig) -> BuildResult:
    log: list[str] = []
    for sector, topo in sorted(config.topologies.items()):
        n = topo.components()
        log.append(f"{sector} network: {len(topo.nodes)} nodes, {len(topo.edges)} links, "
                   f"{n} connected component{'s' if n != 1 else ''}")
    knowledge = knowledge_matrix(config)
    deliveries = delivery_processes(config)
    derived = []
    for sector, topo in sorted(config.topologies.items()):
        derived += derive_path_dependencies(topo, deliveries, log)
    derived.sort()

    g = ProcessGraph()
    for p in config.processes:
        g.add_node(p.id, p.label, p.sector, p.qof_fraction)
    edges = {(s, t): w for s, t, w in config.dependencies}
    grown = set()
    if config.auto_normalize:
        sums: dict[int, float] = {}
        for (s, t), w in sorted(edges.items()):
            sums[t] = sums.get(t, 0.0) + w
        for t, total in sorted(sums.items()):
            if abs(total - 1.0) > WEIGHT_TOL:
                grown.add(t)
                log.append(f"warning: process {t} declared incoming weights sum to {total:.12g}; "
                           "normalised")
    raw = float(config.defaults["derived_weight"])
    for b, a in derived:
        if (b, a) in edges:
            log.append(f"derived dependency {b}->{a} already declared; kept declared weight")
            continue
        edges[(b, a)] = raw
        grown.add(a)
        log.append(f"derived dependency {b}->{a} (shared route)")
    for a in sorted(grown):
        keys = sorted(k for k in edges if k[1] == a)
        total = sum(edges[k] for k in keys)
        for k in keys:
            edges[k] = edges[k] / total
        log.append(f"process {a}: incoming weights renormalised over {len(keys)} parents "
                   f"(raw sum {total:.12g})")
    cycle = _zero_weight_cycle(edges)
    if cycle:
        raise ScenarioError(f"cycle of zero-weight dependencies: {' -> '.join(map(str, cycle))}")
    for (s, t), w in sorted(edges.items()):
        try:
            g.add_edge(s, t, w)
        except GraphError as exc:
            raise ScenarioError(str(exc)) from None
    return BuildResult(g.freeze(), derived, knowledge, log)


def build_graph(config) -> ProcessGraph:
    """Frozen graph of a scenario (a :class:`ScenarioConfig`, path or dict)."""
    if not isinstance(config, ScenarioConfig):
        config = load_scenario(config)
    return build(config).graph


BUNDLED = Path(__file__).with_name("scenarios")


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in BUNDLED.glob("*.json"))


def scenario_path(name_or_path) -> Path:
    """Resolve a bundled scenario name (e.g. ``synthetic-iun``) or a file path."""
    p = Path(name_or_path)
    if p.exists():
        return p
    bundled = BUNDLED / f"{p.stem}.json"
    if p.parent == Path(".") and bundled.exists():
        return bundled
    raise FileNotFoundError(f"no scenario file {name_or_path} (bundled: {', '.join(bundled_scenarios())})")
