"""Graphviz DOT rendering of systems, containment areas and parent pointers."""

from __future__ import annotations

from .analysis import ContainmentArea
from .io import encode_value
from .system import Configuration, WeightedSystem

__all__ = ["system_to_dot"]


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def system_to_dot(
    system: WeightedSystem,
    config: Configuration | None = None,
    s_b: ContainmentArea | None = None,
    s_b_star: ContainmentArea | None = None,
) -> str:
    """S_B members are filled pink, S_B* members get a thick blue border;
    Byzantine processes are filled red and the root is drawn double.

    With a configuration, levels appear in node labels and parent edges are
    drawn bold with an arrow towards the parent.
    """
    names = system.names
    lines = ["graph system {", "  node [shape=circle, style=filled, fillcolor=white];"]
    for v in system.processes:
        attrs = []
        label = names[v]
        if config is not None:
            label += f"\\n{encode_value(config[v].level)}"
        attrs.append(f"label={_quote(label)}")
        if v == system.root:
            attrs.append("shape=doublecircle")
        if v in system.byzantine:
            attrs.append("fillcolor=tomato")
        elif s_b is not None and v in s_b.members:
            attrs.append("fillcolor=pink")
        if s_b_star is not None and v in s_b_star.members:
            attrs.append("color=blue, penwidth=3")
        lines.append(f"  {_quote(names[v])} [{', '.join(attrs)}];")
    for u, v in system.edges:
        attrs = [f"label={_quote(str(encode_value(system.weight(u, v))))}"]
        if config is not None:
            if config.parent(system, u) == v:
                attrs += ["penwidth=3", "dir=forward"]
            elif config.parent(system, v) == u:
                attrs += ["penwidth=3", "dir=back"]
        lines.append(f"  {_quote(names[u])} -- {_quote(names[v])} [{', '.join(attrs)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"
