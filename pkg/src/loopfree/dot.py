"""Graphviz export of a round state, optionally annotated with a gadget layout.

Installed rules come out solid, pending new edges dashed, and the edge
classes carry colors (forward green, backward red, horizontal blue).
Output ordering follows positions on the old path so repeated exports are
byte-identical.
"""

from __future__ import annotations

from .model import EdgeClass, RoundState, classify_pending

_CLASS_COLOR = {
    EdgeClass.FORWARD: "forestgreen",
    EdgeClass.BACKWARD: "crimson",
    EdgeClass.HORIZONTAL: "steelblue",
}


def export_dot(
    state: RoundState,
    edge_labels: dict[tuple[str, str], str] | None = None,
) -> str:
    """Render the active graph plus pending new edges as DOT text.

    ``edge_labels`` may map (tail, head) pairs to category labels (for
    example from a gadget layout sidecar); matching edges get the label.
    """
    inst = state.instance
    labels = edge_labels or {}
    lines = ["digraph update_state {", "  rankdir=LR;", "  node [shape=circle];"]
    for v in inst.nodes:
        attrs = []
        if v == inst.s:
            attrs.append('style=filled fillcolor="gold"')
        elif v == inst.d:
            attrs.append('style=filled fillcolor="gray85"')
        lines.append(f'  "{v}"' + (f" [{' '.join(attrs)}]" if attrs else "") + ";")
    for v in inst.nodes:
        w = state.active_out(v)
        if w is not None:
            lines.append(f'  "{v}" -> "{w}" [style=solid];')
    classes = classify_pending(state)
    for v in sorted(state.pending, key=inst.position):
        w = inst.out2(v)
        cls = classes[v]
        attrs = [f'style=dashed color="{_CLASS_COLOR[cls]}"']
        label = labels.get((v, w))
        if label:
            attrs.append(f'label="{label}"')
        lines.append(f'  "{v}" -> "{w}" [{" ".join(attrs)}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
