"""Parsing for the ``explore-*`` HTML markup extension.

An annotated page declares alternatives instead of single values:

* ``explore-<property>="a b c"`` explores one CSS property of an element,
* ``explore-<p1>-and-<p2>="x;y u;v"`` explores several properties jointly,
* ``explore-child-id="id1 id2"`` keeps exactly one of the listed child
  subtrees per design,
* ``<explore-css> ... ----- ... </explore-css>`` explores whole rule-set
  groups, separated by a line of dashes.

``parse`` turns a document into a :class:`DesignSpec`: the document text
with element ids assigned, the ordered list of explored attributes, and
the nesting tree of explored elements. Parsing is lenient about HTML
conformance but rejects structurally mismatched tags.
"""

from __future__ import annotations

import html
import re
from dataclasses import dataclass, field


EXPLORE_PREFIX = "explore-"
CHILD_SELECT_ATTR = "explore-child-id"
CSS_BLOCK_TAG = "explore-css"
GENERATED_ID_PREFIX = "sw-id-"

KIND_CSS_PROPERTY = "css_property"
KIND_JOINT_PROPERTIES = "joint_properties"
KIND_CHILD_SELECT = "child_select"
KIND_CSS_BLOCK_GROUP = "css_block_group"

VOID_TAGS = frozenset({
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link",
    "meta", "param", "source", "track", "wbr",
})
# Content of these elements is kept as raw text, never tokenized.
RAW_TEXT_TAGS = frozenset({"script", "style", CSS_BLOCK_TAG})


class MarkupError(ValueError):
    """Base class for errors raised while parsing an annotated document."""

    def __init__(self, message: str, element_id: str | None = None):
        super().__init__(message)
        self.element_id = element_id


class MalformedMarkup(MarkupError):
    pass


class UnknownChildId(MarkupError):
    pass


class DuplicateId(MarkupError):
    pass


class JointArityMismatch(MarkupError):
    pass


@dataclass(frozen=True)
class OptionValue:
    """One candidate value; multi-segment only for joint properties."""

    segments: tuple[str, ...]


@dataclass(frozen=True)
class ExploreAttribute:
    attr_id: int
    owner_element_id: str
    kind: str
    property_names: tuple[str, ...]
    options: tuple[OptionValue, ...]
    parent: tuple[int, int] | None = None  # (parent attr_id, parent option index)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    element_id: str | None
    message: str


@dataclass
class TreeNode:
    element_id: str
    attr_ids: list[int]
    children: list["TreeNode"] = field(default_factory=list)


@dataclass
class DesignSpec:
    """A parsed annotated document."""

    base_html: str
    attributes: list[ExploreAttribute]
    tree: list[TreeNode]

    def __post_init__(self) -> None:
        self._doc: Document | None = None

    def document(self) -> "Document":
        """Tokenized view of base_html, parsed once and cached."""
        if self._doc is None:
            self._doc = tokenize(self.base_html)
        return self._doc

    def attribute(self, attr_id: int) -> ExploreAttribute:
        return self.attributes[attr_id]


# ---------------------------------------------------------------------------
# Lenient tokenizer


@dataclass
class SourceAttr:
    name: str                       # lowercased
    raw_name: str
    value: str | None
    span: tuple[int, int]           # includes the leading whitespace run
    value_span: tuple[int, int] | None


@dataclass
class SourceElement:
    tag: str                        # lowercased
    attrs: list[SourceAttr]
    open_span: tuple[int, int]
    name_end: int                   # offset just past the tag name
    close_span: tuple[int, int] | None = None
    content_span: tuple[int, int] | None = None  # raw-text elements only
    parent: "SourceElement | None" = None
    children: list["SourceElement"] = field(default_factory=list)

    def get(self, name: str) -> str | None:
        for a in self.attrs:
            if a.name == name:
                return a.value
        return None

    def find_attr(self, name: str) -> SourceAttr | None:
        for a in self.attrs:
            if a.name == name:
                return a
        return None

    @property
    def element_id(self) -> str | None:
        return self.get("id")

    @property
    def outer_span(self) -> tuple[int, int]:
        end = self.close_span[1] if self.close_span else self.open_span[1]
        return (self.open_span[0], end)


class Document:
    """Token tree over an HTML string, with source spans kept for splicing."""

    def __init__(self, text: str, roots: list[SourceElement],
                 elements: list[SourceElement]):
        self.text = text
        self.roots = roots
        self.elements = elements  # document (pre)order
        self.ids: dict[str, SourceElement] = {}
        for elem in elements:
            eid = elem.element_id
            if eid is None:
                continue
            if eid in self.ids:
                raise DuplicateId(f"id {eid!r} is used more than once", eid)
            self.ids[eid] = elem
        self.head: SourceElement | None = next(
            (e for e in elements if e.tag == "head"), None)


_TAG_NAME_RE = re.compile(r"<([a-zA-Z][^\s/>]*)")
_CLOSE_RE = re.compile(r"</\s*([a-zA-Z][^\s>]*)\s*>")
_ATTR_RE = re.compile(
    r"""([^\s=/>]+)(?:\s*=\s*(?:"([^"]*)"|'([^']*)'|([^\s>]*)))?""")


def _scan_attrs(text: str, pos: int) -> tuple[list[SourceAttr], int, bool]:
    attrs: list[SourceAttr] = []
    n = len(text)
    while True:
        ws_start = pos
        while pos < n and text[pos] in " \t\r\n":
            pos += 1
        if pos >= n:
            raise MalformedMarkup("unterminated tag at end of document")
        ch = text[pos]
        if ch == ">":
            return attrs, pos + 1, False
        if ch == "/":
            j = pos + 1
            while j < n and text[j] in " \t\r\n":
                j += 1
            if j < n and text[j] == ">":
                return attrs, j + 1, True
            pos += 1
            continue
        m = _ATTR_RE.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedMarkup(f"cannot parse attribute near offset {pos}")
        value: str | None = None
        value_span: tuple[int, int] | None = None
        for group in (2, 3, 4):
            if m.group(group) is not None:
                value = html.unescape(m.group(group))
                value_span = (m.start(group), m.end(group))
                break
        attrs.append(SourceAttr(
            name=m.group(1).lower(), raw_name=m.group(1), value=value,
            span=(ws_start, m.end()), value_span=value_span))
        pos = m.end()


def tokenize(text: str) -> Document:
    """Parse HTML into an element tree, keeping source offsets.

    Tolerant of unquoted values, missing values, comments, doctypes and
    void elements; raises MalformedMarkup for mismatched or unclosed
    structural tags and DuplicateId for reused ids.
    """
    pos = 0
    roots: list[SourceElement] = []
    elements: list[SourceElement] = []
    stack: list[SourceElement] = []

    def add(elem: SourceElement) -> None:
        if stack:
            stack[-1].children.append(elem)
            elem.parent = stack[-1]
        else:
            roots.append(elem)
        elements.append(elem)

    while True:
        lt = text.find("<", pos)
        if lt < 0:
            break
        if text.startswith("<!--", lt):
            end = text.find("-->", lt + 4)
            if end < 0:
                raise MalformedMarkup("unterminated comment")
            pos = end + 3
            continue
        if text.startswith("<!", lt) or text.startswith("<?", lt):
            end = text.find(">", lt)
            if end < 0:
                raise MalformedMarkup("unterminated declaration")
            pos = end + 1
            continue
        if text.startswith("</", lt):
            m = _CLOSE_RE.match(text, lt)
            if not m:
                raise MalformedMarkup(f"cannot parse closing tag at offset {lt}")
            name = m.group(1).lower()
            if not stack:
                raise MalformedMarkup(f"closing </{name}> with no open element")
            open_elem = stack.pop()
            if open_elem.tag != name:
                raise MalformedMarkup(
                    f"mismatched closing tag </{name}>; <{open_elem.tag}> is open",
                    open_elem.element_id)
            open_elem.close_span = (lt, m.end())
            pos = m.end()
            continue
        m = _TAG_NAME_RE.match(text, lt)
        if not m:
            pos = lt + 1  # stray '<' in text
            continue
        tag = m.group(1).lower()
        attrs, open_end, self_closing = _scan_attrs(text, m.end())
        elem = SourceElement(tag=tag, attrs=attrs,
                             open_span=(lt, open_end), name_end=m.end())
        add(elem)
        if self_closing or tag in VOID_TAGS:
            pos = open_end
            continue
        if tag in RAW_TEXT_TAGS:
            close_re = re.compile(r"</\s*%s\s*>" % re.escape(tag), re.IGNORECASE)
            cm = close_re.search(text, open_end)
            if not cm:
                raise MalformedMarkup(f"unterminated <{tag}> element",
                                      elem.element_id)
            elem.content_span = (open_end, cm.start())
            elem.close_span = (cm.start(), cm.end())
            pos = cm.end()
            continue
        stack.append(elem)
        pos = open_end

    if stack:
        raise MalformedMarkup(f"unclosed <{stack[-1].tag}> element",
                              stack[-1].element_id)
    return Document(text, roots, elements)


def apply_edits(text: str, edits: list[tuple[int, int, str]]) -> str:
    """Splice (start, end, replacement) edits into text.

    Edits must be disjoint or strictly nested inside a replaced span;
    nested edits are discarded (the outer replacement wins). Insertions
    at a replaced span's boundaries are kept.
    """
    indexed = sorted(enumerate(edits), key=lambda t: (t[1][0], -t[1][1], t[0]))
    kept: list[tuple[int, int, str, int]] = []
    cover_start, cover_end = -1, -1
    for idx, (s, e, rep) in indexed:
        if cover_start < s < cover_end:
            if e > cover_end:
                raise ValueError("overlapping edits")
            continue
        kept.append((s, e, rep, idx))
        if e > s:
            cover_start, cover_end = s, e
    out = text
    for s, e, rep, _ in sorted(kept, key=lambda t: (t[0], t[3]), reverse=True):
        out = out[:s] + rep + out[e:]
    return out


# ---------------------------------------------------------------------------
# Explore extraction


_DASH_LINE_RE = re.compile(r"^[ \t]*-+[ \t]*$", re.MULTILINE)


def parse_joint(name: str, value: str) -> tuple[tuple[str, ...], tuple[OptionValue, ...]]:
    """Split a joint explore attribute into property names and options.

    ``name`` is the full attribute name (``explore-h-and-w``); options are
    whitespace-delimited, segments within an option semicolon-delimited
    and aligned with the property list.
    """
    if not name.startswith(EXPLORE_PREFIX):
        raise MalformedMarkup(f"not an explore attribute: {name!r}")
    body = name[len(EXPLORE_PREFIX):]
    if "-and-" not in body:
        raise MalformedMarkup(f"joint attribute {name!r} has a single property")
    properties = tuple(body.split("-and-"))
    if any(not p for p in properties):
        raise MalformedMarkup(f"empty property name in {name!r}")
    options = []
    for token in value.split():
        segments = tuple(seg.strip() for seg in token.split(";"))
        if len(segments) != len(properties):
            raise JointArityMismatch(
                f"option {token!r} has {len(segments)} segments for "
                f"{len(properties)} properties")
        if any(not seg for seg in segments):
            raise MalformedMarkup(f"empty value segment in option {token!r}")
        options.append(OptionValue(segments))
    return properties, tuple(options)


def _split_css_groups(content: str, element_id: str | None) -> tuple[OptionValue, ...]:
    groups = [g.strip() for g in _DASH_LINE_RE.split(content)]
    if any(not g for g in groups):
        raise MalformedMarkup("empty style group in <explore-css> block",
                              element_id)
    return tuple(OptionValue((g,)) for g in groups)


def _is_explore_attr(attr: SourceAttr) -> bool:
    return attr.name.startswith(EXPLORE_PREFIX)


def _explored(elem: SourceElement) -> bool:
    return elem.tag == CSS_BLOCK_TAG or any(_is_explore_attr(a) for a in elem.attrs)


def _assign_ids(doc: Document) -> Document:
    existing = {e.element_id for e in doc.elements if e.element_id is not None}
    edits: list[tuple[int, int, str]] = []
    counter = 0
    for elem in doc.elements:
        if not _explored(elem) or elem.element_id is not None:
            continue
        while f"{GENERATED_ID_PREFIX}{counter}" in existing:
            counter += 1
        new_id = f"{GENERATED_ID_PREFIX}{counter}"
        counter += 1
        existing.add(new_id)
        edits.append((elem.name_end, elem.name_end, f' id="{new_id}"'))
    if not edits:
        return doc
    return tokenize(apply_edits(doc.text, edits))


def _extract_attributes(doc: Document) -> list[ExploreAttribute]:
    markers: list[tuple[int, SourceElement, SourceAttr | None]] = []
    for elem in doc.elements:
        if elem.tag == CSS_BLOCK_TAG:
            markers.append((elem.open_span[0], elem, None))
        for a in elem.attrs:
            if _is_explore_attr(a):
                markers.append((a.span[0], elem, a))
    markers.sort(key=lambda m: m[0])

    drafts: list[dict] = []
    for attr_id, (_, elem, attr) in enumerate(markers):
        owner_id = elem.element_id
        assert owner_id is not None  # ids assigned before extraction
        if attr is None:
            start, end = elem.content_span  # type: ignore[misc]
            options = _split_css_groups(doc.text[start:end], owner_id)
            kind, properties = KIND_CSS_BLOCK_GROUP, ()
        elif attr.name == CHILD_SELECT_ATTR:
            if not attr.value or not attr.value.split():
                raise MalformedMarkup(
                    f"{CHILD_SELECT_ATTR} needs at least one child id", owner_id)
            candidates = attr.value.split()
            for cand in candidates:
                target = doc.ids.get(cand)
                if target is None:
                    raise UnknownChildId(
                        f"{CHILD_SELECT_ATTR} references missing id {cand!r}",
                        owner_id)
                if target.parent is not elem:
                    raise UnknownChildId(
                        f"{CHILD_SELECT_ATTR} candidate {cand!r} is not a "
                        f"direct child of {owner_id!r}", owner_id)
            options = tuple(OptionValue((c,)) for c in candidates)
            kind, properties = KIND_CHILD_SELECT, ()
        else:
            if attr.value is None:
                raise MalformedMarkup(
                    f"explore attribute {attr.name!r} has no value", owner_id)
            body = attr.name[len(EXPLORE_PREFIX):]
            if not body:
                raise MalformedMarkup("explore attribute without a property name",
                                      owner_id)
            if "-and-" in body:
                try:
                    properties, options = parse_joint(attr.name, attr.value)
                except MarkupError as err:
                    err.element_id = err.element_id or owner_id
                    raise
                kind = KIND_JOINT_PROPERTIES
            else:
                tokens = attr.value.split()
                options = tuple(OptionValue((t,)) for t in tokens)
                properties = (body,)
                kind = KIND_CSS_PROPERTY
        if not options:
            raise MalformedMarkup(
                f"explore markup on {owner_id!r} declares no options", owner_id)
        drafts.append({
            "attr_id": attr_id, "owner": elem, "owner_id": owner_id,
            "kind": kind, "properties": tuple(properties), "options": options,
        })

    # Activation links: an attribute whose owner sits inside (or is) a
    # child-select candidate is only meaningful when that candidate wins.
    candidate_of: dict[int, tuple[int, int]] = {}  # id(element) -> (attr, option)
    for d in drafts:
        if d["kind"] != KIND_CHILD_SELECT:
            continue
        for opt_idx, opt in enumerate(d["options"]):
            cand = doc.ids[opt.segments[0]]
            candidate_of.setdefault(id(cand), (d["attr_id"], opt_idx))

    out = []
    for d in drafts:
        parent = None
        elem: SourceElement | None = d["owner"]
        while elem is not None:
            hit = candidate_of.get(id(elem))
            if hit is not None:
                parent = hit
                break
            elem = elem.parent
        out.append(ExploreAttribute(
            attr_id=d["attr_id"], owner_element_id=d["owner_id"], kind=d["kind"],
            property_names=d["properties"], options=d["options"], parent=parent))
    return out


def _build_tree(doc: Document, attributes: list[ExploreAttribute]) -> list[TreeNode]:
    by_owner: dict[str, list[int]] = {}
    for a in attributes:
        by_owner.setdefault(a.owner_element_id, []).append(a.attr_id)
    nodes: dict[int, TreeNode] = {}
    roots: list[TreeNode] = []
    for elem in doc.elements:
        eid = elem.element_id
        if eid is None or eid not in by_owner:
            continue
        node = TreeNode(element_id=eid, attr_ids=by_owner[eid])
        nodes[id(elem)] = node
        parent = elem.parent
        while parent is not None and id(parent) not in nodes:
            parent = parent.parent
        if parent is None:
            roots.append(node)
        else:
            nodes[id(parent)].children.append(node)
    return roots


def parse(document_text: str) -> DesignSpec:
    """Parse an annotated HTML document into a DesignSpec.

    Elements carrying explore markup but no id receive generated
    ``sw-id-<n>`` ids, written into the returned base_html; all other
    text is preserved byte for byte.
    """
    doc = _assign_ids(tokenize(document_text))
    attributes = _extract_attributes(doc)
    spec = DesignSpec(base_html=doc.text, attributes=attributes,
                      tree=_build_tree(doc, attributes))
    spec._doc = doc
    return spec


# ---------------------------------------------------------------------------
# Validation


def _link_depth(attributes: list[ExploreAttribute], attr_id: int) -> int:
    depth = 0
    parent = attributes[attr_id].parent
    while parent is not None:
        depth += 1
        parent = attributes[parent[0]].parent
    return depth


def validate(spec: DesignSpec) -> list[Diagnostic]:
    """Check a parsed spec against the invariants parse cannot reject.

    Returns an empty list for a launchable spec.
    """
    diags: list[Diagnostic] = []
    for a in spec.attributes:
        if len(a.options) < 2:
            diags.append(Diagnostic(
                "TooFewOptions", a.owner_element_id,
                f"attribute {a.attr_id} has {len(a.options)} option(s); "
                "exploration needs at least 2"))
        if len(set(a.options)) != len(a.options):
            diags.append(Diagnostic(
                "DuplicateOption", a.owner_element_id,
                f"attribute {a.attr_id} repeats an option value"))

    claims: dict[str, list[int]] = {}
    for a in spec.attributes:
        if a.kind != KIND_CHILD_SELECT:
            continue
        for opt in a.options:
            claims.setdefault(opt.segments[0], []).append(a.attr_id)
    for cand_id, owners in claims.items():
        if len(owners) > 1:
            diags.append(Diagnostic(
                "OverlappingChildSelect", cand_id,
                f"child {cand_id!r} is claimed by {CHILD_SELECT_ATTR} "
                f"attributes {owners}"))

    for a in spec.attributes:
        if _link_depth(spec.attributes, a.attr_id) > 3:
            diags.append(Diagnostic(
                "DeepNesting", a.owner_element_id,
                f"attribute {a.attr_id} is nested more than 3 levels deep"))

    doc = spec.document()
    for a in spec.attributes:
        if a.kind != KIND_CSS_BLOCK_GROUP:
            continue
        elem = doc.ids.get(a.owner_element_id)
        inside_head = False
        while elem is not None:
            if elem.tag == "head":
                inside_head = True
                break
            elem = elem.parent
        if not inside_head:
            diags.append(Diagnostic(
                "CssBlockOutsideHead", a.owner_element_id,
                f"<{CSS_BLOCK_TAG}> block {a.attr_id} sits outside <head>"))
    return diags


# ---------------------------------------------------------------------------
# JSON form (stable field names, consumed by the CLI and the web UI)


def spec_to_json(spec: DesignSpec) -> dict:
    def node(t: TreeNode) -> dict:
        return {"element_id": t.element_id, "attr_ids": t.attr_ids,
                "children": [node(c) for c in t.children]}

    return {
        "base_html": spec.base_html,
        "attributes": [
            {
                "attr_id": a.attr_id,
                "owner_element_id": a.owner_element_id,
                "kind": a.kind,
                "property_names": list(a.property_names),
                "options": [list(o.segments) for o in a.options],
                "parent": list(a.parent) if a.parent else None,
            }
            for a in spec.attributes
        ],
        "tree": [node(t) for t in spec.tree],
    }


def spec_from_json(data: dict) -> DesignSpec:
    def node(d: dict) -> TreeNode:
        return TreeNode(element_id=d["element_id"], attr_ids=list(d["attr_ids"]),
                        children=[node(c) for c in d["children"]])

    attributes = [
        ExploreAttribute(
            attr_id=a["attr_id"], owner_element_id=a["owner_element_id"],
            kind=a["kind"], property_names=tuple(a["property_names"]),
            options=tuple(OptionValue(tuple(o)) for o in a["options"]),
            parent=tuple(a["parent"]) if a["parent"] else None)
        for a in data["attributes"]
    ]
    return DesignSpec(base_html=data["base_html"], attributes=attributes,
                      tree=[node(t) for t in data["tree"]])
