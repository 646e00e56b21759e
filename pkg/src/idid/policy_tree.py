from __future__ import annotations

from typing import Iterator, Sequence


class PolicyTree:
    """Immutable conditional plan: an action plus one subtree per observation.

    Equality and hashing are structural over (action, children). The
    ``unreachable`` set marks observation branches that had zero probability
    when the tree was built; it is metadata and does not take part in
    equality.
    """

    __slots__ = ("action", "children", "horizon", "unreachable", "_hash")

    def __init__(self, action: int, children: Sequence["PolicyTree"] = (),
                 unreachable: frozenset[int] = frozenset()):
        children = tuple(children)
        if children:
            h = children[0].horizon
            if any(c.horizon != h for c in children):
                raise ValueError("all children of a node must share a horizon")
            horizon = h + 1
        else:
            horizon = 1
        object.__setattr__(self, "action", int(action))
        object.__setattr__(self, "children", children)
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "unreachable", frozenset(unreachable))
        object.__setattr__(self, "_hash", hash((self.action, children)))

    def __setattr__(self, name, value):
        raise AttributeError("PolicyTree is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, PolicyTree) or self._hash != other._hash:
            return False
        return self.action == other.action and self.children == other.children

    def __repr__(self) -> str:
        if not self.children:
            return f"PolicyTree({self.action})"
        return f"PolicyTree({self.action}, {list(self.children)!r})"

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def child(self, o: int) -> "PolicyTree":
        if not self.children:
            raise ValueError("leaf nodes have no children")
        return self.children[o]

    def nodes(self) -> Iterator["PolicyTree"]:
        """Preorder walk (a shared subtree is visited once per occurrence)."""
        yield self
        for c in self.children:
            yield from c.nodes()

    def size(self) -> int:
        return 1 + sum(c.size() for c in self.children)

    def arity(self) -> int:
        return len(self.children)

    def check_arity(self, n_actions: int, n_obs: int) -> None:
        for node in self.nodes():
            if not 0 <= node.action < n_actions:
                raise ValueError(f"action {node.action} out of range for {n_actions} actions")
            if node.children and len(node.children) != n_obs:
                raise ValueError(f"node has {len(node.children)} children, expected {n_obs}")

    def actions_at_depth(self, d: int) -> list[int]:
        level = [self]
        for _ in range(d):
            level = [c for n in level for c in n.children]
        return [n.action for n in level]

    def follow(self, observations: Sequence[int]) -> "PolicyTree":
        node = self
        for o in observations:
            node = node.child(o)
        return node

    def to_dict(self) -> dict:
        d: dict = {"a": self.action}
        if self.children:
            d["c"] = [c.to_dict() for c in self.children]
        if self.unreachable:
            d["u"] = sorted(self.unreachable)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicyTree":
        kids = [cls.from_dict(c) for c in d.get("c", ())]
        return cls(d["a"], kids, frozenset(d.get("u", ())))

    def render(self, action_names=None, obs_names=None, indent: str = "") -> str:
        name = action_names[self.action] if action_names else str(self.action)
        lines = [indent + name]
        for o, c in enumerate(self.children):
            oname = obs_names[o] if obs_names else str(o)
            sub = c.render(action_names, obs_names, indent + "    ")
            lines.append(f"{indent}  {oname}:")
            lines.append(sub)
        return "\n".join(lines)


class Behavior:
    """What a model actually does under the uniform-over-optimal convention.

    Each node holds the set of optimal actions and, per (optimal action,
    observation), the behavior after that update, or None when the
    observation cannot occur.  Without ties this is the canonical tree with
    impossible branches cut; with ties it tells apart models whose canonical
    trees agree but whose optimal sets differ.
    """

    __slots__ = ("actions", "children", "horizon", "_hash")

    def __init__(self, actions: Sequence[int], children: Sequence[Sequence["Behavior | None"]] = (),
                 horizon: int = 1):
        object.__setattr__(self, "actions", tuple(int(a) for a in actions))
        object.__setattr__(self, "children", tuple(tuple(c) for c in children))
        object.__setattr__(self, "horizon", horizon)
        object.__setattr__(self, "_hash", hash((self.actions, self.children, horizon)))

    def __setattr__(self, name, value):
        raise AttributeError("Behavior is immutable")

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other) -> bool:
        if self is other:
            return True
        if not isinstance(other, Behavior) or self._hash != other._hash:
            return False
        return (self.actions, self.children, self.horizon) == (other.actions, other.children, other.horizon)

    def child(self, a: int, o: int) -> "Behavior | None":
        return self.children[self.actions.index(a)][o]

    def __repr__(self) -> str:
        return f"Behavior({self.actions}, h={self.horizon})"
