"""Versioned text formats for released sketches, with bit-exact round-trips.

Every release file opens with a `# privdist-release v1 mechanism=...` header
carrying the privacy metadata, followed by mechanism-specific sections in a
fixed canonical order. Floats are written with shortest round-trip repr, so
save(load(f)) reproduces f byte for byte.
"""

import os
import tempfile
from pathlib import Path

import numpy as np

from .baselines import EdgeNoiseRelease
from .dp import NoiseLedger
from .graphs import WeightedGraph
from .grid_release import BlockPartition, GridReleaseSketch
from .path_release import PathReleaseSketch
from .tree_release import HeavyPathDecomposition, TreeReleaseSketch

RELEASE_MAGIC = "# privdist-release v1"


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or Path("."), suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# ---------------------------------------------------------------------------
# tree releases
# ---------------------------------------------------------------------------

def dump_tree_release(sketch: TreeReleaseSketch) -> str:
    d = sketch.decomposition
    lines = [
        f"{RELEASE_MAGIC} mechanism=tree epsilon={sketch.epsilon!r} "
        f"seed={sketch.seed} V={sketch.vertex_count}"
    ]
    if sketch.clamp_nonnegative:
        lines.append("option clamp-nonnegative")
    for pid, path in enumerate(d.paths):
        lines.append("path " + str(pid) + " " + " ".join(map(str, path)))
    for u, v in d.light_edges:
        lines.append(f"light {u} {v}")
    for pid, sk in enumerate(sketch.path_sketches):
        flat = " ".join(repr(float(x)) for x in sk.flat_sums())
        lines.append(f"sums {pid} {sk.noise_scale!r} {sk.edge_count}"
                     + (f" {flat}" if flat else ""))
    lines.append(f"lightscale {sketch.light_scale!r}")
    for u, v in d.light_edges:
        lines.append(f"lightval {u} {v} {sketch.light_edge_noisy[(u, v)]!r}")
    return "\n".join(lines) + "\n"


def _decomposition_from_sections(vertex_count, paths, light_pairs) -> HeavyPathDecomposition:
    path_of = np.full(vertex_count, -1, dtype=np.int64)
    pos_of = np.zeros(vertex_count, dtype=np.int64)
    parent = np.full(vertex_count, -1, dtype=np.int64)
    for pid, path in enumerate(paths):
        for pos, v in enumerate(path):
            path_of[v] = pid
            pos_of[v] = pos
            if pos > 0:
                parent[v] = path[pos - 1]
    head_parent = np.full(len(paths), -1, dtype=np.int64)
    for u, v in light_pairs:
        parent[v] = u
        head_parent[path_of[v]] = u
    children: list[list[int]] = [[] for _ in range(vertex_count)]
    for v in range(vertex_count):
        if parent[v] >= 0:
            children[int(parent[v])].append(v)
    root = paths[0][0]
    depth = np.full(vertex_count, -1, dtype=np.int64)
    height = np.zeros(vertex_count, dtype=np.int64)
    depth[root] = 0
    order = [root]
    stack = [root]
    while stack:
        u = stack.pop()
        for c in children[u]:
            depth[c] = depth[u] + 1
            order.append(c)
            stack.append(c)
    for u in reversed(order):
        if children[u]:
            height[u] = 1 + max(height[c] for c in children[u])
    heads = np.asarray([p[0] for p in paths], dtype=np.int64)
    return HeavyPathDecomposition(
        paths=paths,
        light_edges=light_pairs,
        path_of=path_of,
        pos_of=pos_of,
        parent=parent,
        depth=depth,
        height=height,
        head_parent=head_parent,
        head_depth=depth[heads],
    )


def _split_levels(flat: list[float], edge_count: int) -> list[np.ndarray]:
    if edge_count == 0:
        return []
    from .path_release import num_levels

    sums = []
    pos = 0
    for level in range(num_levels(edge_count)):
        width = 1 << level
        count = -(-edge_count // width)
        sums.append(np.asarray(flat[pos:pos + count], dtype=np.float64))
        pos += count
    if pos != len(flat):
        raise ValueError("interval sum count does not match edge count")
    return sums


def parse_tree_release(text: str) -> TreeReleaseSketch:
    header, options, sections = _split_release(text, "tree")
    epsilon = float(header["epsilon"])
    seed = int(header["seed"])
    vertex_count = int(header["V"])
    paths: list[list[int]] = []
    for toks in sections.get("path", []):
        pid = int(toks[0])
        if pid != len(paths):
            raise ValueError("path sections out of order")
        paths.append([int(x) for x in toks[1:]])
    light_pairs = [(int(t[0]), int(t[1])) for t in sections.get("light", [])]
    decomp = _decomposition_from_sections(vertex_count, paths, light_pairs)
    sketches: list[PathReleaseSketch] = []
    for toks in sections.get("sums", []):
        pid, scale, edge_count = int(toks[0]), float(toks[1]), int(toks[2])
        if pid != len(sketches):
            raise ValueError("sums sections out of order")
        flat = [float(x) for x in toks[3:]]
        if edge_count == 0:
            sketches.append(PathReleaseSketch.empty(seed=seed))
            continue
        level_sums = _split_levels(flat, edge_count)
        sketches.append(PathReleaseSketch(
            edge_count=edge_count,
            levels=len(level_sums),
            noisy_interval_sums=level_sums,
            noise_scale=scale,
            seed=seed,
        ))
    light_scale_rows = sections.get("lightscale", [["0.0"]])
    light_scale = float(light_scale_rows[0][0])
    light_noisy = {}
    for toks in sections.get("lightval", []):
        light_noisy[(int(toks[0]), int(toks[1]))] = float(toks[2])
    if set(light_noisy) != set(light_pairs):
        raise ValueError("light-edge values do not match the decomposition")
    ledger = NoiseLedger()
    for pid, sk in enumerate(sketches):
        for level_sums in sk.noisy_interval_sums:
            for _ in range(level_sums.size):
                ledger.record(f"path-{pid}", sk.noise_scale)
    for _ in light_noisy:
        ledger.record("light-edge", light_scale)
    return TreeReleaseSketch(
        decomposition=decomp,
        path_sketches=sketches,
        light_edge_noisy=light_noisy,
        light_scale=light_scale,
        epsilon=epsilon,
        seed=seed,
        vertex_count=vertex_count,
        ledger=ledger,
        clamp_nonnegative="clamp-nonnegative" in options,
    )


# ---------------------------------------------------------------------------
# grid releases
# ---------------------------------------------------------------------------

def dump_grid_release(sketch: GridReleaseSketch) -> str:
    part = sketch.partition
    lines = [
        f"{RELEASE_MAGIC} mechanism=grid epsilon={sketch.epsilon!r} "
        f"delta={sketch.delta!r} seed={sketch.seed} V={sketch.vertex_count} "
        f"side={part.grid_side} block_side={part.block_side} "
        f"k_direct={sketch.k_direct} scale={sketch.noise_scale!r}"
    ]
    if sketch.clamp_nonnegative:
        lines.append("option clamp-nonnegative")
    for bid, (r0, c0, nr, nc) in enumerate(part.rects):
        lines.append(f"block {bid} {r0} {c0} {nr} {nc}")
    hub_slot = {int(v): i for i, v in enumerate(part.hub_vertices)}
    hub_lines = []
    intra_lines = []
    for (u, v), value in sorted(sketch.pair_values.items()):
        if u in hub_slot and v in hub_slot:
            hub_lines.append(f"hub {u} {v} {value!r}")
        else:
            intra_lines.append(f"intra {u} {v} {value!r}")
    return "\n".join(lines + hub_lines + intra_lines) + "\n"


def parse_grid_release(text: str) -> GridReleaseSketch:
    header, options, sections = _split_release(text, "grid")
    side = int(header["side"])
    vertex_count = int(header["V"])
    if side * side != vertex_count:
        raise ValueError("grid release header has V != side^2")
    block_side = int(header["block_side"])
    rects = []
    for toks in sections.get("block", []):
        bid = int(toks[0])
        if bid != len(rects):
            raise ValueError("block sections out of order")
        rects.append(tuple(int(x) for x in toks[1:]))
    blocks = []
    boundary_sets = []
    block_of = np.empty(vertex_count, dtype=np.int64)
    for bid, (r0, c0, nr, nc) in enumerate(rects):
        verts = []
        bound = []
        for r in range(r0, r0 + nr):
            for c in range(c0, c0 + nc):
                u = r * side + c
                verts.append(u)
                block_of[u] = bid
                if r in (r0, r0 + nr - 1) or c in (c0, c0 + nc - 1):
                    bound.append(u)
        blocks.append(np.asarray(verts, dtype=np.int64))
        boundary_sets.append(np.asarray(bound, dtype=np.int64))
    partition = BlockPartition(
        grid_side=side,
        block_side=block_side,
        rects=rects,
        blocks=blocks,
        boundary_sets=boundary_sets,
        block_of=block_of,
    )
    values = {}
    for key in ("hub", "intra"):
        for toks in sections.get(key, []):
            values[(int(toks[0]), int(toks[1]))] = float(toks[2])
    k_direct = int(header["k_direct"])
    if len(values) != k_direct:
        raise ValueError("direct-pair count does not match header k_direct")
    scale = float(header["scale"])
    ledger = NoiseLedger()
    for _ in range(k_direct):
        ledger.record("direct-pair", scale)
    from .grid_release import paper_form_scale
    from .dp import PrivacyParams

    delta = float(header["delta"])
    epsilon = float(header["epsilon"])
    return GridReleaseSketch(
        partition=partition,
        pair_values=values,
        k_direct=k_direct,
        noise_scale=scale,
        paper_scale=paper_form_scale(vertex_count, PrivacyParams(epsilon, delta)),
        epsilon=epsilon,
        delta=delta,
        seed=int(header["seed"]),
        vertex_count=vertex_count,
        ledger=ledger,
        clamp_nonnegative="clamp-nonnegative" in options,
    )


# ---------------------------------------------------------------------------
# edge-noise releases
# ---------------------------------------------------------------------------

def dump_edge_noise_release(release: EdgeNoiseRelease) -> str:
    g = release.noisy_graph
    scale = release.ledger.scale("edge-weight") if release.ledger.count("edge-weight") else 0.0
    lines = [
        f"{RELEASE_MAGIC} mechanism=edge-noise epsilon={release.epsilon!r} "
        f"seed={release.seed} V={g.vertex_count} scale={scale!r}"
    ]
    if release.clamp_nonnegative:
        lines.append("option clamp-nonnegative")
    kind_line = f"kind {g.kind}"
    if g.grid_side is not None:
        kind_line += f" side={g.grid_side}"
    if g.root is not None:
        kind_line += f" root={g.root}"
    lines.append(kind_line)
    for u, v, w in zip(g.edge_u, g.edge_v, g.weights):
        lines.append(f"edge {u} {v} {float(w)!r}")
    return "\n".join(lines) + "\n"


def parse_edge_noise_release(text: str) -> EdgeNoiseRelease:
    header, options, sections = _split_release(text, "edge-noise")
    kind_rows = sections.get("kind", [["general"]])
    kind_toks = kind_rows[0]
    kind = kind_toks[0]
    extras = dict(tok.split("=", 1) for tok in kind_toks[1:])
    edges = [(int(t[0]), int(t[1]), float(t[2])) for t in sections.get("edge", [])]
    graph = WeightedGraph(
        kind, int(header["V"]), edges,
        grid_side=int(extras["side"]) if "side" in extras else None,
        root=int(extras["root"]) if "root" in extras else None,
    )
    ledger = NoiseLedger()
    scale = float(header.get("scale", 0.0))
    for _ in edges:
        ledger.record("edge-weight", scale)
    return EdgeNoiseRelease(
        noisy_graph=graph,
        epsilon=float(header["epsilon"]),
        seed=int(header["seed"]),
        ledger=ledger,
        clamp_nonnegative="clamp-nonnegative" in options,
    )


# ---------------------------------------------------------------------------
# shared plumbing
# ---------------------------------------------------------------------------

def _split_release(text: str, expect_mechanism: str | None = None):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines or not lines[0].startswith(RELEASE_MAGIC + " "):
        raise ValueError("malformed release header")
    header = dict(
        item.split("=", 1)
        for item in lines[0][len(RELEASE_MAGIC):].split()
        if "=" in item
    )
    if "mechanism" not in header:
        raise ValueError("release header missing mechanism")
    if expect_mechanism and header["mechanism"] != expect_mechanism:
        raise ValueError(
            f"expected mechanism={expect_mechanism}, got {header['mechanism']}")
    options = set()
    sections: dict[str, list[list[str]]] = {}
    for ln in lines[1:]:
        toks = ln.split()
        if toks[0] == "option":
            options.add(toks[1])
            continue
        sections.setdefault(toks[0], []).append(toks[1:])
    return header, options, sections


def dump_release(release) -> str:
    if isinstance(release, TreeReleaseSketch):
        return dump_tree_release(release)
    if isinstance(release, GridReleaseSketch):
        return dump_grid_release(release)
    if isinstance(release, EdgeNoiseRelease):
        return dump_edge_noise_release(release)
    raise TypeError(f"not a release object: {type(release)!r}")


def save_release(release, path) -> None:
    atomic_write_text(path, dump_release(release))


def parse_release(text: str):
    header, _, _ = _split_release(text)
    mechanism = header["mechanism"]
    if mechanism == "tree":
        return parse_tree_release(text)
    if mechanism == "grid":
        return parse_grid_release(text)
    if mechanism == "edge-noise":
        return parse_edge_noise_release(text)
    raise ValueError(f"unknown release mechanism {mechanism!r}")


def load_release(path):
    return parse_release(Path(path).read_text())


def query_release(release, s: int, t: int) -> tuple[float, int]:
    """Uniform query surface over loaded releases: (value, noise terms)."""
    from .grid_release import query_grid_with_terms
    from .tree_release import query_tree

    if isinstance(release, TreeReleaseSketch):
        value, terms = query_tree(release, s, t)
    elif isinstance(release, GridReleaseSketch):
        value, terms = query_grid_with_terms(release, s, t)
    elif isinstance(release, EdgeNoiseRelease):
        value, terms = release.query(s, t), 0
    else:
        raise TypeError(f"not a release object: {type(release)!r}")
    if release.clamp_nonnegative:
        value = max(0.0, value)
    return value, terms
