"""Formal concept analysis over the join sample.

A context stores one Python ``int`` per attribute whose bits mark the
incident objects, so both derivation operators reduce to big-integer AND
and subset tests. Concepts are enumerated by Close-by-One.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Sequence

from .errors import ContextTooLarge, UnknownId
from .estimator import bind_predicates
from .kb import KnowledgeBase
from .query import ApproximateQuery, FlexibleQuery, Resolver
from .sampler import JoinSample

DEFAULT_ALPHA = 0.5
MAX_CELLS = 10 ** 7


def mask_to_indices(mask: int) -> list[int]:
    bits = bin(mask)[:1:-1]
    return [i for i, ch in enumerate(bits) if ch == "1"]


def indices_to_mask(indices: Iterable[int], size: int) -> int:
    if size == 0:
        return 0
    buf = bytearray(b"0") * size
    for i in indices:
        buf[size - 1 - i] = 49  # ord("1")
    return int(buf, 2)


@dataclass(frozen=True)
class FormalContext:
    objects: tuple[Hashable, ...]
    attributes: tuple[Hashable, ...]
    columns: tuple[int, ...]  # per attribute: bitmask over object positions
    _obj_pos: dict = field(init=False, repr=False, compare=False)
    _attr_pos: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(self.columns) != len(self.attributes):
            raise ValueError("one column mask per attribute required")
        object.__setattr__(self, "_obj_pos", {o: i for i, o in enumerate(self.objects)})
        object.__setattr__(self, "_attr_pos", {a: j for j, a in enumerate(self.attributes)})
        if len(self._obj_pos) != len(self.objects) or len(self._attr_pos) != len(self.attributes):
            raise ValueError("object and attribute ids must be unique")
        if any(c >> len(self.objects) for c in self.columns):
            raise ValueError("column mask refers to a non-existent object")

    @classmethod
    def from_pairs(cls, objects: Sequence, attributes: Sequence,
                   incidence: Iterable[tuple]) -> "FormalContext":
        objects, attributes = tuple(objects), tuple(attributes)
        opos = {o: i for i, o in enumerate(objects)}
        apos = {a: j for j, a in enumerate(attributes)}
        cols = [0] * len(attributes)
        for o, a in incidence:
            if o not in opos or a not in apos:
                raise UnknownId(f"pair ({o!r}, {a!r}) outside the context")
            cols[apos[a]] |= 1 << opos[o]
        return cls(objects, attributes, tuple(cols))

    @property
    def all_objects(self) -> int:
        return (1 << len(self.objects)) - 1

    @property
    def all_attributes(self) -> int:
        return (1 << len(self.attributes)) - 1

    @property
    def incidence(self) -> frozenset:
        return frozenset((self.objects[i], a) for a, col in zip(self.attributes, self.columns)
                         for i in mask_to_indices(col))

    # bitmask derivations
    def intent_of(self, extent: int) -> int:
        intent = 0
        for j, col in enumerate(self.columns):
            if col & extent == extent:
                intent |= 1 << j
        return intent

    def extent_of(self, intent: int) -> int:
        extent = self.all_objects
        j = 0
        while intent:
            if intent & 1:
                extent &= self.columns[j]
            intent >>= 1
            j += 1
        return extent

    def object_mask(self, objs: Iterable) -> int:
        try:
            return indices_to_mask((self._obj_pos[o] for o in objs), len(self.objects))
        except KeyError as exc:
            raise UnknownId(f"unknown object {exc.args[0]!r}") from None

    def attribute_mask(self, attrs: Iterable) -> int:
        mask = 0
        for a in attrs:
            if a not in self._attr_pos:
                raise UnknownId(f"unknown attribute {a!r}")
            mask |= 1 << self._attr_pos[a]
        return mask

    def decode_objects(self, mask: int) -> frozenset:
        return frozenset(self.objects[i] for i in mask_to_indices(mask))

    def decode_attributes(self, mask: int) -> frozenset:
        return frozenset(self.attributes[j] for j in mask_to_indices(mask))


def common_attributes(ctx: FormalContext, objects: Iterable) -> frozenset:
    return ctx.decode_attributes(ctx.intent_of(ctx.object_mask(objects)))


def common_objects(ctx: FormalContext, attributes: Iterable) -> frozenset:
    return ctx.decode_objects(ctx.extent_of(ctx.attribute_mask(attributes)))


@dataclass(frozen=True)
class Concept:
    extent_mask: int
    intent_mask: int
    context: FormalContext = field(compare=False, repr=False)

    @cached_property
    def extent(self) -> frozenset:
        return self.context.decode_objects(self.extent_mask)

    @cached_property
    def intent(self) -> frozenset:
        return self.context.decode_attributes(self.intent_mask)

    def __repr__(self):
        return f"Concept(|extent|={bin(self.extent_mask).count('1')}, intent={set(self.intent)})"


@dataclass
class ConceptLattice:
    context: FormalContext
    concepts: list[Concept]
    covers: list[tuple[int, int]]   # (upper, lower): lower's extent is a maximal proper subset
    _by_intent: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_intent = {c.intent_mask: i for i, c in enumerate(self.concepts)}

    def __len__(self):
        return len(self.concepts)

    def find(self, intent_mask: int) -> Concept | None:
        i = self._by_intent.get(intent_mask)
        return None if i is None else self.concepts[i]

    def closure(self, intent_mask: int) -> Concept:
        """The concept generated by an attribute set."""
        extent = self.context.extent_of(intent_mask)
        return self.concepts[self._by_intent[self.context.intent_of(extent)]]

    @property
    def top(self) -> Concept:
        return self.closure(self.context.intent_of(self.context.all_objects))

    @property
    def bottom(self) -> Concept:
        return self.closure(self.context.all_attributes)

    def meet(self, a: Concept, b: Concept) -> Concept:
        return self.closure(a.intent_mask | b.intent_mask)

    def to_dot(self) -> str:
        lines = ["digraph lattice {", "  rankdir=BT;"]
        for i, c in enumerate(self.concepts):
            size = bin(c.extent_mask).count("1")
            names = ", ".join(sorted(_label(a) for a in c.intent))
            label = f"{size}/{{{names}}}".replace('"', '\\"')
            lines.append(f'  c{i} [label="{label}"];')
        for upper, lower in self.covers:
            lines.append(f"  c{lower} -> c{upper};")
        lines.append("}")
        return "\n".join(lines) + "\n"


def _label(attr) -> str:
    if isinstance(attr, tuple) and attr and attr[0] in ("fuzzy", "crisp"):
        return str(attr[1])
    if isinstance(attr, tuple) and attr and attr[0] == "group":
        return f"{attr[1]}={attr[2]}"
    return str(attr)


def close_by_one(ctx: FormalContext) -> list[tuple[int, int]]:
    """All (extent, intent) bitmask pairs, each generated once."""
    m = len(ctx.attributes)
    cols = ctx.columns
    out = []
    top_extent = ctx.all_objects
    start = (top_extent, ctx.intent_of(top_extent), 0)
    stack = [start]
    while stack:
        extent, intent, y = stack.pop()
        out.append((extent, intent))
        children = []
        for j in range(y, m):
            bit = 1 << j
            if intent & bit:
                continue
            new_extent = extent & cols[j]
            new_intent = ctx.intent_of(new_extent)
            below = bit - 1
            if new_intent & below == intent & below:
                children.append((new_extent, new_intent, j + 1))
        stack.extend(reversed(children))
    return out


def _covers(ctx: FormalContext, concepts: list[Concept], index: dict) -> list[tuple[int, int]]:
    covers = []
    m = len(ctx.attributes)
    for i, c in enumerate(concepts):
        candidates = set()
        for j in range(m):
            if c.intent_mask >> j & 1:
                continue
            candidates.add(ctx.intent_of(c.extent_mask & ctx.columns[j]))
        for d in candidates:
            if not any(e != d and e & ~d == 0 for e in candidates):
                covers.append((i, index[d]))
    return covers


def build_lattice(ctx: FormalContext, max_cells: int = MAX_CELLS) -> ConceptLattice:
    cells = len(ctx.objects) * len(ctx.attributes)
    if cells > max_cells:
        raise ContextTooLarge(
            f"context has {cells} incidence cells (limit {max_cells}); "
            "lower the sample fraction or raise the guard")
    concepts = [Concept(e, i, ctx) for e, i in close_by_one(ctx)]
    index = {c.intent_mask: k for k, c in enumerate(concepts)}
    return ConceptLattice(ctx, concepts, _covers(ctx, concepts, index))


# --- conceptual scaling of a join sample ---------------------------------

@dataclass(frozen=True)
class ScaledContext:
    """A scaled context plus what the estimator needs next to it.

    ``memberships[i]`` keeps the exact fuzzy degrees of object ``i`` (one per
    fuzzy predicate) and ``degrees[i]`` their min t-norm combined with the
    crisp outcome; ``group_keys[i]`` is the object's GROUP BY value tuple.
    """
    context: FormalContext
    alpha: float
    memberships: list[tuple[float, ...]]
    degrees: list[float]
    group_keys: list[tuple]
    predicate_mask: int
    group_attribute: dict   # (group column index, value) -> attribute position
    group_columns: tuple[str, ...]


def _base(q) -> FlexibleQuery:
    return q.base if isinstance(q, ApproximateQuery) else q


def scale(sample: JoinSample, q, kb: KnowledgeBase,
          alpha: float = DEFAULT_ALPHA) -> ScaledContext:
    if not 0.0 < alpha <= 1.0:
        raise ValueError(f"alpha must be in (0, 1], got {alpha}")
    q = _base(q)
    layout = sample.layout
    resolver = Resolver({t: layout.source[t].columns for t in layout.tables}, layout.tables)
    preds = bind_predicates(q, resolver, layout, kb)
    group_pos = [layout.position(*resolver.resolve(c)) for c in q.group_by]

    n_obj = len(sample.tuples)
    attributes, hits = [], []
    for pred in q.fuzzy_predicates:
        attributes.append(("fuzzy", str(pred)))
        hits.append([])
    for pred in q.crisp_predicates:
        attributes.append(("crisp", str(pred)))
        hits.append([])
    n_fuzzy = len(q.fuzzy_predicates)
    n_pred = len(attributes)

    memberships, degrees, keys = [], [], []
    group_attribute = {}
    crisp = preds.crisp
    for i, row in enumerate(sample.tuples):
        mem = preds.memberships(row)
        memberships.append(tuple(mem))
        for k, mu in enumerate(mem):
            if mu >= alpha:
                hits[k].append(i)
        ok = True
        for k, (pos, cmp, lit) in enumerate(crisp):
            v = row[pos]
            if v is not None and cmp(v, lit):
                hits[n_fuzzy + k].append(i)
            else:
                ok = False
        degrees.append(min(mem, default=1.0) if ok else 0.0)
        key = tuple(row[p] for p in group_pos)
        keys.append(key)
        for g, value in enumerate(key):
            a = group_attribute.get((g, value))
            if a is None:
                a = group_attribute[(g, value)] = len(attributes)
                attributes.append(("group", str(q.group_by[g]), value))
                hits.append([])
            hits[a].append(i)

    columns = tuple(indices_to_mask(h, n_obj) for h in hits)
    ctx = FormalContext(tuple(range(n_obj)), tuple(attributes), columns)
    return ScaledContext(ctx, alpha, memberships, degrees, keys, (1 << n_pred) - 1,
                         group_attribute, tuple(str(c) for c in q.group_by))


def group_extents(lattice: ConceptLattice, scaled: ScaledContext) -> dict[tuple, list[int]]:
    """Per observed group key, the objects satisfying every scaled predicate.

    The extent is read off the concept generated by the group's nominal
    attributes together with all predicate attributes. Empty extents are
    dropped.
    """
    out = {}
    for key in dict.fromkeys(scaled.group_keys):
        intent = scaled.predicate_mask
        for g, value in enumerate(key):
            intent |= 1 << scaled.group_attribute[(g, value)]
        concept = lattice.closure(intent)
        if concept.extent_mask:
            out[key] = mask_to_indices(concept.extent_mask)
    return out
