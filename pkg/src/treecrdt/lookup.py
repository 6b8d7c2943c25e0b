"""The client-visible tree: instances, deterministic dumps, and validation."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

from .render import render, sort_key

InstanceKey = Tuple  # () is the root; other keys are tuples identifying instances


@dataclass
class Instance:
    key: InstanceKey
    node: Any
    parent: InstanceKey
    label: str
    ghost: bool = False
    pos: Any = None

    def order_key(self):
        if self.pos is not None:
            return (0, sort_key(self.pos), sort_key(self.key))
        return (1, sort_key(self.node), sort_key(self.key))


@dataclass
class LookupTree:
    """A rooted tree of node instances with a canonical textual dump."""

    root_label: str = "root"
    instances: Dict[InstanceKey, Instance] = field(default_factory=dict)

    def add_instance(
        self,
        key: InstanceKey,
        node: Any,
        parent: InstanceKey,
        label: Optional[str] = None,
        ghost: bool = False,
        pos: Any = None,
    ) -> None:
        if key == () or key in self.instances:
            raise ValueError(f"duplicate or reserved instance key {key!r}")
        self.instances[key] = Instance(
            key=key,
            node=node,
            parent=parent,
            label=label if label is not None else render(node),
            ghost=ghost,
            pos=pos,
        )

    def remove_instance(self, key: InstanceKey) -> None:
        del self.instances[key]

    def children(self, key: InstanceKey) -> List[Instance]:
        kids = [inst for inst in self.instances.values() if inst.parent == key]
        return sorted(kids, key=Instance.order_key)

    def parent_map(self) -> Dict[InstanceKey, InstanceKey]:
        return {key: inst.parent for key, inst in self.instances.items()}

    def nodes_present(self) -> set:
        return {inst.node for inst in self.instances.values()}

    def instances_of(self, node: Any) -> List[Instance]:
        return [inst for inst in self.instances.values() if inst.node == node]

    def contains_node(self, node: Any) -> bool:
        return any(inst.node == node for inst in self.instances.values())

    def validate(self) -> None:
        """Check the parent map is total, acyclic, and root-connected."""
        for key, inst in self.instances.items():
            if inst.parent != () and inst.parent not in self.instances:
                raise AssertionError(f"instance {key!r} has missing parent")
        for key in self.instances:
            seen = set()
            cur = key
            while cur != ():
                if cur in seen:
                    raise AssertionError(f"cycle through instance {key!r}")
                seen.add(cur)
                cur = self.instances[cur].parent

    def dump(self) -> str:
        lines = [self.root_label]

        def walk(key: InstanceKey, depth: int) -> None:
            for inst in self.children(key):
                label = inst.label
                if inst.pos is not None:
                    label += f" @{render(inst.pos)}"
                if inst.ghost:
                    label += " ~"
                lines.append("  " * depth + label)
                walk(inst.key, depth + 1)

        walk((), 1)
        return "\n".join(lines)

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, LookupTree):
            return NotImplemented
        return self.dump() == other.dump()
