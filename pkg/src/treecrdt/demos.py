"""Built-in demonstration scenarios with side-by-side policy outcomes."""

from __future__ import annotations

from typing import Callable, Dict, List, Tuple

from .clocks import ReplicaClock
from .harness import ComboSpec, Simulation
from .render import Path, render
from .wootr import BEGIN, END, WootrSequence, sort_key

Action = Tuple[str, ...]


def _run(combo: ComboSpec, script: List[Action], replicas: int = 2, seed: int = 3) -> Simulation:
    sim = Simulation(combo, replicas, seed)
    for action in script:
        record = sim.execute(action)
        if record.violation is not None:
            raise AssertionError(f"demo step {action} failed: {record.violation}")
    return sim


def _script_lines(script: List[Action]) -> List[str]:
    return ["  " + ("sync" if a[0] == "sync" else " ".join(a)) for a in script]


def _dump_lines(sim: Simulation, rid: str = "r1") -> List[str]:
    return ["  " + ln for ln in sim.replicas[rid].tree.lookup().dump().splitlines()]


CYCLE_SCRIPT: List[Action] = [
    ("r1", "add", "x", "root"),
    ("r1", "add", "y", "x"),
    ("r2", "add", "y", "root"),
    ("r2", "add", "x", "y"),
    ("sync",),
]


def demo_cycle() -> str:
    """Concurrent adds of x under y and y under x, one mapping policy at a time."""
    lines = [
        "cycle: replica r1 adds x then y below it, r2 concurrently adds y then x below it",
        "script (graph <kind> state skip <map> plain):",
        *_script_lines(CYCLE_SCRIPT),
        "",
        "the merged edge set holds a cycle between x and y; each mapping policy",
        "resolves it differently:",
    ]
    for kind, mp in (
        ("g", "several"),
        ("lww", "newest"),
        ("c", "highest"),
        ("g", "shortest"),
        ("g", "zero"),
    ):
        combo = ComboSpec("graph", kind, "state", "skip", mp, None)
        sim = _run(combo, CYCLE_SCRIPT)
        lines.append(f"{mp} ({kind} kind)")
        lines.extend(_dump_lines(sim))
    return "\n".join(lines) + "\n"


ORPHAN_SCRIPT: List[Action] = [
    ("r1", "add", "a", "root"),
    ("r1", "add", "b", "a"),
    ("r1", "add", "c", "b"),
    ("sync",),
    ("r2", "add", "d", "c"),
    ("r1", "rmv", "b"),
    ("sync",),
]


def demo_orphan_policies() -> str:
    """A subtree removal racing an add below it, one connection policy at a time."""
    lines = [
        "orphan-policies: r1 removes the subtree under b while r2 adds d below c",
        "script (graph or state <connect> shortest plain):",
        *_script_lines(ORPHAN_SCRIPT),
        "",
        "after convergence d is live but its ancestors b and c are gone; each",
        "connection policy places the orphan differently:",
    ]
    for connect in ("skip", "reappear", "root", "compact"):
        combo = ComboSpec("graph", "or", "state", connect, "shortest", None)
        sim = _run(combo, ORPHAN_SCRIPT)
        lines.append(connect)
        lines.extend(_dump_lines(sim))
    return "\n".join(lines) + "\n"


WORD_SCRIPT: List[Action] = [
    ("r1", "add", "a", "/"),
    ("r1", "add", "b", "/a"),
    ("r1", "add", "c", "/a"),
    ("r1", "add", "c", "/a/b"),
    ("r2", "deliver", "r1"),
    ("r1", "add", "d", "/a/b/c"),
    ("r1", "add", "e", "/a/b/c/d"),
    ("r1", "add", "f", "/a/b/c/d/e"),
    ("r2", "rmv", "/a/b/c"),
    ("r3", "deliver", "r1"),
    ("r3", "rmv", "/a/b/c/d/e/f"),
    ("r1", "add", "g", "/a/b/c/d/e/f"),
    ("sync",),
]


def _path_text(p: Path) -> str:
    return "".join(str(a) for a in p) or "/"


def _path_set(paths) -> str:
    texts = sorted((_path_text(Path(p)) for p in paths), key=lambda t: (len(t), t))
    return "{" + ", ".join(["/"] + [t for t in texts if t != "/"]) + "}"


def demo_word_example() -> str:
    """A pruned path chain shown under all four connection policies."""
    lines = [
        "word-example: r1 grows a chain to abcdefg while r2 and r3 concurrently",
        "remove the single links abc and abcdef",
        "script (word or op <connect> - plain):",
        *_script_lines(WORD_SCRIPT),
        "",
    ]
    shown: Dict[str, str] = {}
    dumps: Dict[str, List[str]] = {}
    for connect in ("skip", "reappear", "root", "compact"):
        combo = ComboSpec("word", "or", "op", connect, None, None)
        sim = _run(combo, WORD_SCRIPT, replicas=3)
        tree = sim.replicas["r1"].tree
        if connect == "skip":
            lines.append(f"live paths {_path_set(tree.live_paths())}")
        shown[connect] = _path_set(tree.lookup().instances)
        dumps[connect] = _dump_lines(sim)
    for connect in ("skip", "reappear", "root", "compact"):
        lines.append(f"{connect:8s} {shown[connect]}")
        lines.extend(dumps[connect])
        if connect == "reappear":
            lines.append(
                "  note: the recreated chain contains abcdef, the prefix of"
                " abcdefg; a reading that gives abcef drops the d"
            )
    return "\n".join(lines) + "\n"


def demo_wootr_abc() -> str:
    """Two replicas edit one sequence; the element set orders itself."""
    c1, c2 = ReplicaClock("r1", 0), ReplicaClock("r2", 0)
    s1, s2 = WootrSequence("or", "op"), WootrSequence("or", "op")
    op_a = s1.gen_insert("a", BEGIN, END, c1)
    a = op_a.element
    op_b = s1.gen_insert("b", a, END, c1)
    op_c = s2.gen_insert("c", BEGIN, END, c2)
    for op in (op_a, op_b):
        s2.apply(op)
    s1.apply(op_c)
    elements = sorted(s1.elements.lookup(), key=sort_key)
    lines = [
        "wootr-abc: r1 inserts a then b after it while r2 concurrently inserts c",
        "elements are (atom, previous, next) triples; ^ and $ mark the ends",
        "element set",
        *("  " + render(e) for e in elements),
        f"sequence at r1: {s1.text()}",
        f"sequence at r2: {s2.text()}",
    ]
    return "\n".join(lines) + "\n"


DEMOS: Dict[str, Callable[[], str]] = {
    "cycle": demo_cycle,
    "orphan-policies": demo_orphan_policies,
    "word-example": demo_word_example,
    "wootr-abc": demo_wootr_abc,
}
