"""Canonical, deterministic text rendering and ordering for set elements."""

from __future__ import annotations

from typing import Any, Iterable, Tuple


class Path(tuple):
    """A tree path as a tuple of atoms; the empty path is the root."""

    def render(self) -> str:
        if not self:
            return "/"
        return "/" + "/".join(render(a) for a in self)

    def __repr__(self) -> str:
        return f"Path({self.render()})"

    def child(self, atom: Any) -> "Path":
        return Path(self + (atom,))

    def parent(self) -> "Path":
        return Path(self[:-1])

    def prefixes(self) -> "list[Path]":
        """Proper prefixes, shortest first, starting with the empty path."""
        return [Path(self[:k]) for k in range(len(self))]

    def starts_with(self, prefix: tuple) -> bool:
        return self[: len(prefix)] == tuple(prefix)

    def order_key(self) -> Tuple:
        """Length first, then atom order; ties the processing order down."""
        return (len(self), sort_key(self))


def render(e: Any) -> str:
    """Render an element canonically; equal elements always render identically."""
    if isinstance(e, Path):
        return e.render()
    if isinstance(e, str):
        return e
    if isinstance(e, bool):
        return "true" if e else "false"
    if isinstance(e, int):
        return str(e)
    if hasattr(e, "render"):
        return e.render()
    if isinstance(e, (tuple, list)):
        return "(" + ",".join(render(x) for x in e) + ")"
    if isinstance(e, (set, frozenset)):
        return "[" + ",".join(sorted(render(x) for x in e)) + "]"
    raise TypeError(f"cannot render {type(e).__name__}")


def sort_key(e: Any) -> Tuple:
    """Type-tagged recursive key making heterogeneous elements totally ordered."""
    if e is None:
        return ("",)
    if isinstance(e, Path):
        return ("p",) + tuple(sort_key(a) for a in e)
    if isinstance(e, bool):
        return ("b", e)
    if isinstance(e, str):
        return ("s", e)
    if isinstance(e, int):
        return ("i", e)
    if hasattr(e, "canon_key"):
        return ("o", type(e).__name__, e.canon_key())
    if isinstance(e, (tuple, list)):
        return ("t",) + tuple(sort_key(x) for x in e)
    raise TypeError(f"cannot order {type(e).__name__}")


def sorted_elements(elems: Iterable[Any]) -> list:
    return sorted(elems, key=sort_key)
