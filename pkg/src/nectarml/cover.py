"""Overlapping covers: mutable community collections over graph nodes.

A Cover maps community ids to node sets and keeps the reverse node ->
community-ids index in sync. Community ids are opaque ints, unique within a
run; empty communities are never kept, so every id in `communities` holds at
least one node.
"""

from __future__ import annotations

from typing import Iterable, Sequence

from .graph import Graph


class CommunityFileError(ValueError):
    """Raised for unreadable or malformed community-file input."""


class Cover:
    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.communities: dict[int, set[int]] = {}
        self.memberships: list[set[int]] = [set() for _ in range(n_nodes)]
        self._next_id = 0

    # -- mutation -------------------------------------------------------------

    def new_community(self, nodes: Iterable[int], cid: int | None = None) -> int:
        """Create a community; explicit cid reuses a retired id (must be free)."""
        if cid is None:
            cid = self._next_id
            self._next_id += 1
        elif cid in self.communities:
            raise ValueError(f"community id {cid} already in use")
        else:
            self._next_id = max(self._next_id, cid + 1)
        members = set(nodes)
        if not members:
            raise ValueError("cannot create an empty community")
        self.communities[cid] = members
        for v in members:
            self.memberships[v].add(cid)
        return cid

    def add(self, v: int, cid: int) -> None:
        self.communities[cid].add(v)
        self.memberships[v].add(cid)

    def remove(self, v: int, cid: int) -> bool:
        """Remove v from community cid; drop the community if emptied.

        Returns True when the community was deleted.
        """
        members = self.communities[cid]
        members.discard(v)
        self.memberships[v].discard(cid)
        if not members:
            del self.communities[cid]
            return True
        return False

    def dissolve(self, cid: int) -> None:
        for v in self.communities[cid]:
            self.memberships[v].discard(cid)
        del self.communities[cid]

    # -- queries ----------------------------------------------------------------

    def membership_count(self, v: int) -> int:
        return len(self.memberships[v])

    def size(self, cid: int) -> int:
        return len(self.communities[cid])

    def __len__(self) -> int:
        return len(self.communities)

    def node_sets(self) -> list[set[int]]:
        """Community node sets in a canonical (sorted) order."""
        return [set(s) for s in sorted(self.communities.values(), key=sorted)]

    def canonical(self) -> list[tuple[int, ...]]:
        """Hashable canonical form, for structural equality across runs."""
        return sorted(tuple(sorted(s)) for s in self.communities.values())

    def copy(self) -> "Cover":
        c = Cover(self.n)
        c._next_id = self._next_id
        c.communities = {cid: set(s) for cid, s in self.communities.items()}
        c.memberships = [set(s) for s in self.memberships]
        return c

    @classmethod
    def from_node_sets(cls, n_nodes: int, sets: Sequence[Iterable[int]]) -> "Cover":
        cover = cls(n_nodes)
        for s in sets:
            cover.new_community(s)
        return cover


# ---------------------------------------------------------------------------
# community files: one community per line, whitespace-delimited node labels
# ---------------------------------------------------------------------------

def load_community_file(path) -> list[list[str]]:
    """Read label-space communities; '#' comment lines and blanks skipped.

    Duplicate labels within a line are collapsed, order of first appearance
    kept so output stays stable for round-trips.
    """
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise CommunityFileError(f"cannot read community file {path}: {exc}") from exc
    out: list[list[str]] = []
    for line in lines:
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        seen: dict[str, None] = {}
        for tok in stripped.split():
            seen.setdefault(tok)
        out.append(list(seen))
    return out


def save_community_file(path, communities: Sequence[Sequence[str]], header_lines: Sequence[str] = ()) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        for comm in communities:
            fh.write(" ".join(comm) + "\n")


def cover_to_label_sets(cover: Cover, g: Graph) -> list[list[str]]:
    """Canonical label-space communities (members sorted by internal index)."""
    return [g.to_labels(sorted(s)) for s in cover.node_sets()]


def cover_from_label_sets(label_sets: Sequence[Sequence[str]], g: Graph) -> Cover:
    cover = Cover(g.n)
    for comm in label_sets:
        nodes = []
        for lab in comm:
            idx = g.label_index.get(lab)
            if idx is None:
                raise CommunityFileError(f"community references unknown node {lab!r}")
            nodes.append(idx)
        cover.new_community(nodes)
    return cover
