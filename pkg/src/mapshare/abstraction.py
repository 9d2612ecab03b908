"""Compression templates: row-stochastic averaging maps over local windows.

A template partitions a sensing window into disjoint groups of cells.
Applying it to a local map replaces each group with the equal-weight
average of its member cells, giving a multi-resolution summary that costs
(group count) * value_bits + index_bits to transmit. Offsets a template
leaves uncovered are simply never transmitted (no-information regions).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid_world import LocalMap

__all__ = [
    "AbstractionTemplate",
    "BitCostParams",
    "MessageRow",
    "AbstractionMessage",
    "TemplateFormatError",
    "apply_template",
    "default_theta_set",
    "template_rows",
    "check_rows",
    "validate_template",
    "validate_theta_set",
    "parse_templates",
    "format_templates",
    "load_templates",
    "save_templates",
]

Offset = tuple[int, int]  # (dr, dc) relative to the window center

ROW_SUM_TOL = 1e-12


class TemplateFormatError(ValueError):
    """A template file could not be parsed."""


@dataclass(frozen=True)
class AbstractionTemplate:
    """One compression template: disjoint groups of window offsets."""

    tpl_id: int
    groups: tuple[tuple[Offset, ...], ...]

    @property
    def k(self) -> int:
        """Number of groups, i.e. values transmitted at full coverage."""
        return len(self.groups)

    @property
    def coverage(self) -> frozenset[Offset]:
        return frozenset(off for group in self.groups for off in group)


@dataclass(frozen=True)
class BitCostParams:
    """Bits per transmitted occupancy value and per template index."""

    value_bits: int = 12
    index_bits: int = 4

    def __post_init__(self):
        if self.value_bits < 1:
            raise ValueError("value_bits must be >= 1")
        if self.index_bits < 0:
            raise ValueError("index_bits must be >= 0")

    def message_bits(self, row_count: int) -> int:
        return row_count * self.value_bits + self.index_bits


@dataclass(frozen=True)
class MessageRow:
    """One averaging equation: equal weights over global cell indices."""

    cells: tuple[int, ...]
    weights: tuple[float, ...]


@dataclass(frozen=True, eq=False)
class AbstractionMessage:
    """Transmitted payload: template id, averaging rows, and row values."""

    theta: int
    rows: tuple[MessageRow, ...]
    values: tuple[float, ...]
    bits: int

    @property
    def empty(self) -> bool:
        return not self.rows

    @property
    def k_effective(self) -> int:
        return len(self.rows)


def apply_template(
    tpl: AbstractionTemplate,
    lm: LocalMap,
    excluded: set[int] | frozenset[int],
    bits: BitCostParams,
    *,
    nominal_bits: bool = False,
) -> AbstractionMessage:
    """Compress a local map with a template.

    Group offsets that fall outside the map (window clipping) or hit
    `excluded` global cells are removed before averaging; surviving
    members get equal weights that sum to 1. Groups with no survivors are
    dropped. Bit cost uses the surviving group count unless
    `nominal_bits` asks for the template's full group count.
    """
    if len(lm) == 0:
        raise ValueError("cannot apply a template to an empty local map")
    center = lm.center
    value_of = {cell: float(v) for cell, v in zip(lm.cells, lm.values)}
    rows: list[MessageRow] = []
    values: list[float] = []
    for group in tpl.groups:
        members: list[int] = []
        for dr, dc in group:
            gr, gc = center.row + dr, center.col + dc
            if gc < 0 or gc >= lm.map_width:
                continue  # clipped; also guards row-major index aliasing
            cell = gr * lm.map_width + gc
            if cell not in value_of or cell in excluded:
                continue
            members.append(cell)
        if not members:
            continue
        w = 1.0 / len(members)
        rows.append(MessageRow(cells=tuple(members), weights=(w,) * len(members)))
        values.append(float(sum(value_of[c] for c in members) * w))
    if not rows:
        return AbstractionMessage(theta=tpl.tpl_id, rows=(), values=(), bits=0)
    count = tpl.k if nominal_bits else len(rows)
    return AbstractionMessage(
        theta=tpl.tpl_id,
        rows=tuple(rows),
        values=tuple(values),
        bits=bits.message_bits(count),
    )


def default_theta_set(
    window_w: int, window_h: int, count: int
) -> tuple[AbstractionTemplate, ...]:
    """Built-in template family for a window, finest to coarsest.

    Includes the identity (all singleton groups), uniform block
    partitions, center-weighted mixes, stripes, halves, and the single
    whole-window group. Group counts are strictly decreasing along the
    returned tuple; ids are renumbered 1..count.
    """
    if window_w <= 0 or window_h <= 0 or window_w % 2 == 0 or window_h % 2 == 0:
        raise ValueError("window dimensions must be odd and positive")
    if count < 2:
        raise ValueError("need at least 2 templates")
    catalog: list[tuple[Offset, ...]] = []

    def push(groups: list[list[Offset]]) -> None:
        catalog.append(tuple(tuple(g) for g in groups if g))

    push(_blocks(window_w, window_h, 1))
    big_r = (min(window_w, window_h) - 2) // 2
    if big_r >= 1:
        push(_center_fine(window_w, window_h, big_r, outer="none"))
    push(_blocks(window_w, window_h, 2))
    if 1 < min(window_w, window_h) // 2:
        push(_center_fine(window_w, window_h, 1, outer="arcs"))
        push(_center_fine(window_w, window_h, 1, outer="ring"))
    push(_blocks(window_w, window_h, 3))
    push(_stripes(window_w, window_h))
    push(_blocks(window_w, window_h, 4))
    push(_halves(window_w, window_h))
    push(_blocks(window_w, window_h, max(window_w, window_h)))

    by_k: dict[int, tuple[tuple[Offset, ...], ...]] = {}
    for groups in catalog:
        by_k.setdefault(len(groups), groups)
    ranked = sorted(by_k.items(), key=lambda item: -item[0])
    if count > len(ranked):
        raise ValueError(
            f"only {len(ranked)} distinct template resolutions exist for a "
            f"{window_w}x{window_h} window, requested {count}"
        )
    if count == len(ranked):
        chosen = ranked
    else:
        picks = np.linspace(0, len(ranked) - 1, count).round().astype(int)
        chosen = [ranked[i] for i in sorted(set(picks.tolist()))]
        # rounding collisions can shrink the pick set; backfill greedily
        pool = [i for i in range(len(ranked)) if ranked[i] not in chosen]
        while len(chosen) < count:
            chosen.append(ranked[pool.pop(0)])
        chosen.sort(key=lambda item: -item[0])
    return tuple(
        AbstractionTemplate(tpl_id=i + 1, groups=groups)
        for i, (_, groups) in enumerate(chosen)
    )


def _window_offsets(w: int, h: int) -> list[Offset]:
    rh, rw = h // 2, w // 2
    return [(dr, dc) for dr in range(-rh, rh + 1) for dc in range(-rw, rw + 1)]


def _blocks(w: int, h: int, size: int) -> list[list[Offset]]:
    rh, rw = h // 2, w // 2
    groups = []
    for r0 in range(0, h, size):
        for c0 in range(0, w, size):
            groups.append(
                [
                    (r - rh, c - rw)
                    for r in range(r0, min(r0 + size, h))
                    for c in range(c0, min(c0 + size, w))
                ]
            )
    return groups


def _center_fine(w: int, h: int, radius: int, outer: str) -> list[list[Offset]]:
    groups = [
        [(dr, dc)]
        for dr in range(-radius, radius + 1)
        for dc in range(-radius, radius + 1)
    ]
    rest = [
        (dr, dc)
        for dr, dc in _window_offsets(w, h)
        if max(abs(dr), abs(dc)) > radius
    ]
    if outer == "none" or not rest:
        return groups
    if outer == "ring":
        groups.append(rest)
        return groups
    if outer == "arcs":
        top = [(dr, dc) for dr, dc in rest if dr < -radius]
        bottom = [(dr, dc) for dr, dc in rest if dr > radius]
        left = [(dr, dc) for dr, dc in rest if abs(dr) <= radius and dc < 0]
        right = [(dr, dc) for dr, dc in rest if abs(dr) <= radius and dc > 0]
        groups.extend(g for g in (top, bottom, left, right) if g)
        return groups
    raise ValueError(f"unknown outer mode {outer!r}")


def _stripes(w: int, h: int) -> list[list[Offset]]:
    rh, rw = h // 2, w // 2
    return [[(dr, dc) for dc in range(-rw, rw + 1)] for dr in range(-rh, rh + 1)]


def _halves(w: int, h: int) -> list[list[Offset]]:
    left = [(dr, dc) for dr, dc in _window_offsets(w, h) if dc < 0]
    right = [(dr, dc) for dr, dc in _window_offsets(w, h) if dc >= 0]
    return [left, right]


def template_rows(tpl: AbstractionTemplate, w: int, h: int) -> list[dict[Offset, float]]:
    """Induced averaging rows on an unclipped w x h window."""
    rows = []
    for group in tpl.groups:
        weight = 1.0 / len(group) if group else 0.0
        rows.append({off: weight for off in group})
    return rows


def check_rows(rows: list[dict[Offset, float]]) -> list[str]:
    """Row-stochasticity report: nonnegative weights summing to 1."""
    issues = []
    for i, row in enumerate(rows, start=1):
        if not row:
            issues.append(f"row {i}: empty")
            continue
        if any(w < 0 for w in row.values()):
            issues.append(f"row {i}: negative weight")
        total = sum(row.values())
        if abs(total - 1.0) > ROW_SUM_TOL:
            issues.append(
                f"row {i}: weights sum to {total!r}, off by {total - 1.0:.3e} "
                f"(tolerance {ROW_SUM_TOL})"
            )
    return issues


def validate_template(tpl: AbstractionTemplate, w: int, h: int) -> list[str]:
    """Structural checks for one template; empty list means valid."""
    issues = []
    rh, rw = h // 2, w // 2
    seen: dict[Offset, int] = {}
    for gi, group in enumerate(tpl.groups, start=1):
        if not group:
            issues.append(f"template {tpl.tpl_id}: group {gi} is empty")
        for off in group:
            if off in seen:
                issues.append(
                    f"template {tpl.tpl_id}: offset {off} in groups "
                    f"{seen[off]} and {gi}"
                )
            seen[off] = gi
            dr, dc = off
            if abs(dr) > rh or abs(dc) > rw:
                issues.append(
                    f"template {tpl.tpl_id}: offset {off} outside the "
                    f"{w}x{h} window"
                )
    issues.extend(
        f"template {tpl.tpl_id}: {msg}" for msg in check_rows(template_rows(tpl, w, h))
    )
    return issues


def validate_theta_set(
    templates: tuple[AbstractionTemplate, ...], w: int, h: int
) -> list[str]:
    """Validate a whole template set, including monotone group counts."""
    issues = []
    for tpl in templates:
        issues.extend(validate_template(tpl, w, h))
    ks = [tpl.k for tpl in templates]
    for a, b in zip(ks, ks[1:]):
        if b >= a:
            issues.append(f"group counts not strictly decreasing: {ks}")
            break
    return issues


def format_templates(
    templates: tuple[AbstractionTemplate, ...], w: int, h: int
) -> str:
    """Serialize templates to the line-oriented text format."""
    lines = [f"window {w} {h}"]
    for tpl in templates:
        lines.append(f"template {tpl.tpl_id}")
        for group in tpl.groups:
            lines.append("group " + " ".join(f"{dr},{dc}" for dr, dc in group))
    return "\n".join(lines) + "\n"


def parse_templates(text: str) -> tuple[int, int, tuple[AbstractionTemplate, ...]]:
    """Parse the template text format; returns (window_w, window_h, templates)."""
    window: tuple[int, int] | None = None
    templates: list[AbstractionTemplate] = []
    current_id: int | None = None
    current_groups: list[tuple[Offset, ...]] = []

    def flush():
        nonlocal current_id, current_groups
        if current_id is not None:
            templates.append(
                AbstractionTemplate(tpl_id=current_id, groups=tuple(current_groups))
            )
        current_id, current_groups = None, []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        kind = fields[0].lower()
        if kind == "window":
            if len(fields) != 3:
                raise TemplateFormatError(f"line {line_no}: window expects W H")
            try:
                window = (int(fields[1]), int(fields[2]))
            except ValueError:
                raise TemplateFormatError(
                    f"line {line_no}: bad window dimensions {fields[1:]!r}"
                ) from None
        elif kind == "template":
            if len(fields) != 2:
                raise TemplateFormatError(f"line {line_no}: template expects an id")
            flush()
            try:
                current_id = int(fields[1])
            except ValueError:
                raise TemplateFormatError(
                    f"line {line_no}: bad template id {fields[1]!r}"
                ) from None
        elif kind == "group":
            if current_id is None:
                raise TemplateFormatError(f"line {line_no}: group before template")
            offsets = []
            for token in fields[1:]:
                parts = token.split(",")
                if len(parts) != 2:
                    raise TemplateFormatError(
                        f"line {line_no}: bad offset {token!r} (want dr,dc)"
                    )
                try:
                    offsets.append((int(parts[0]), int(parts[1])))
                except ValueError:
                    raise TemplateFormatError(
                        f"line {line_no}: bad offset {token!r} (want dr,dc)"
                    ) from None
            if not offsets:
                raise TemplateFormatError(f"line {line_no}: empty group")
            current_groups.append(tuple(offsets))
        else:
            raise TemplateFormatError(f"line {line_no}: unknown directive {kind!r}")
    flush()
    if window is None:
        raise TemplateFormatError("missing 'window W H' header")
    if not templates:
        raise TemplateFormatError("no templates defined")
    return window[0], window[1], tuple(templates)


def load_templates(path) -> tuple[int, int, tuple[AbstractionTemplate, ...]]:
    with open(path, "r", encoding="ascii") as fh:
        return parse_templates(fh.read())


def save_templates(path, templates, w: int, h: int) -> None:
    with open(path, "w", encoding="ascii") as fh:
        fh.write(format_templates(templates, w, h))
