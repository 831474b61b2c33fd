"""Gene schema, search-space size and rendering of configurations.

Each explored attribute becomes one gene; a design is a sequence of
option indices. Genes owned by elements inside a child-select candidate
carry an activation link and only take effect while that candidate is
chosen; their values stay in the sequence either way (dormant, not
absent), so sequences keep a fixed length.
"""

from __future__ import annotations

import itertools
import json
import math
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .markup import (
    CSS_BLOCK_TAG,
    DesignSpec,
    EXPLORE_PREFIX,
    KIND_CHILD_SELECT,
    KIND_CSS_BLOCK_GROUP,
    SourceElement,
    apply_edits,
)


@dataclass(frozen=True)
class GeneSchema:
    option_counts: tuple[int, ...]
    activation: tuple[tuple[int, int] | None, ...]
    attr_of: tuple[int, ...]

    @property
    def gene_count(self) -> int:
        return len(self.option_counts)


def build_schema(spec: DesignSpec) -> GeneSchema:
    """One gene per explored attribute, in attribute order."""
    return GeneSchema(
        option_counts=tuple(len(a.options) for a in spec.attributes),
        activation=tuple(a.parent for a in spec.attributes),
        attr_of=tuple(a.attr_id for a in spec.attributes),
    )


def active_genes(schema: GeneSchema, sequence: Sequence[int]) -> set[int]:
    """Genes whose value affects the rendered design.

    A gene is active when it has no activation link, or its parent is
    active and holds the linked option. Links always point to
    lower-indexed genes, so one forward pass settles the chain.
    """
    active: list[bool] = []
    for gene, link in enumerate(schema.activation):
        if link is None:
            active.append(True)
        else:
            parent, option = link
            active.append(active[parent] and sequence[parent] == option)
    return {g for g, flag in enumerate(active) if flag}


def space_size(schema: GeneSchema) -> int:
    """Number of distinct renderable designs.

    Dormant-gene values are render-invisible, so nested genes contribute
    per parent option: a gene's weight is the sum over its options of the
    product of the weights of the genes that option activates; root
    weights multiply.
    """
    n = schema.gene_count
    children: dict[int, dict[int, list[int]]] = {}
    for gene, link in enumerate(schema.activation):
        if link is not None:
            parent, option = link
            children.setdefault(parent, {}).setdefault(option, []).append(gene)
    weight = [0] * n
    for gene in reversed(range(n)):
        by_option = children.get(gene, {})
        total = 0
        for option in range(schema.option_counts[gene]):
            prod = 1
            for child in by_option.get(option, ()):
                prod *= weight[child]
            total += prod
        weight[gene] = total
    size = 1
    for gene, link in enumerate(schema.activation):
        if link is None:
            size *= weight[gene]
    return size


def check_sequence(schema: GeneSchema, sequence: Sequence[int]) -> None:
    if len(sequence) != schema.gene_count:
        raise ValueError(f"sequence length {len(sequence)} != gene count "
                         f"{schema.gene_count}")
    for gene, value in enumerate(sequence):
        if not 0 <= value < schema.option_counts[gene]:
            raise ValueError(f"gene {gene} value {value} out of range "
                             f"0..{schema.option_counts[gene] - 1}")


def encode(schema: GeneSchema, choices: Mapping[int, int]) -> tuple[int, ...]:
    """Configuration (attr_id -> option index) to genetic sequence."""
    sequence = tuple(choices[attr] for attr in schema.attr_of)
    check_sequence(schema, sequence)
    return sequence


def decode(schema: GeneSchema, sequence: Sequence[int]) -> dict[int, int]:
    """Genetic sequence back to a configuration keyed by attr_id."""
    check_sequence(schema, sequence)
    return {attr: sequence[gene] for gene, attr in enumerate(schema.attr_of)}


# ---------------------------------------------------------------------------
# Rendering


def _style_escape(value: str) -> str:
    return value.replace("&", "&amp;").replace('"', "&quot;")


def render(spec: DesignSpec, schema: GeneSchema, sequence: Sequence[int]) -> str:
    """Render one configuration to a standalone HTML document.

    Active property genes write their chosen declarations as inline
    styles (appended after any existing ones, so they win the cascade),
    active child-select genes drop the non-chosen listed candidates,
    active style-group genes inject a <style> element at the end of
    <head>, and every trace of explore markup is stripped.
    """
    check_sequence(schema, sequence)
    doc = spec.document()
    active = active_genes(schema, sequence)

    edits: list[tuple[int, int, str]] = []
    declarations: dict[int, list[str]] = {}  # id(element) -> inline decls
    element_for: dict[int, SourceElement] = {}
    style_blocks: list[str] = []

    for gene in range(schema.gene_count):
        attr = spec.attributes[schema.attr_of[gene]]
        option = attr.options[sequence[gene]]
        owner = doc.ids[attr.owner_element_id]
        if attr.kind == KIND_CHILD_SELECT:
            if gene not in active:
                continue
            chosen = option.segments[0]
            for opt in attr.options:
                if opt.segments[0] == chosen:
                    continue
                candidate = doc.ids[opt.segments[0]]
                edits.append((*candidate.outer_span, ""))
        elif attr.kind == KIND_CSS_BLOCK_GROUP:
            if gene in active:
                style_blocks.append(option.segments[0])
        else:
            if gene not in active:
                continue
            decls = declarations.setdefault(id(owner), [])
            element_for[id(owner)] = owner
            decls.extend(f"{name}: {value}" for name, value
                         in zip(attr.property_names, option.segments))

    # One style edit per element, all of its active genes in gene order.
    for key, decls in declarations.items():
        owner = element_for[key]
        text = "; ".join(decls)
        existing = owner.find_attr("style")
        if existing is not None and existing.value_span is not None:
            start, end = existing.value_span
            sep = "" if (existing.value or "").rstrip().endswith(";") else ";"
            joiner = "" if not (existing.value or "").strip() else f"{sep} "
            edits.append((end, end, f"{joiner}{_style_escape(text)}"))
        else:
            edits.append((owner.name_end, owner.name_end,
                          f' style="{_style_escape(text)}"'))

    # Strip the markup extension itself.
    for elem in doc.elements:
        if elem.tag == CSS_BLOCK_TAG:
            edits.append((*elem.outer_span, ""))
            continue
        for a in elem.attrs:
            if a.name.startswith(EXPLORE_PREFIX):
                edits.append((*a.span, ""))

    if style_blocks:
        css = "\n".join(style_blocks)
        injection = f"<style>\n{css}\n</style>\n"
        if doc.head is not None and doc.head.close_span is not None:
            at = doc.head.close_span[0]
        elif doc.roots and doc.roots[0].tag == "html":
            at = doc.roots[0].open_span[1]
        else:
            at = 0
        edits.append((at, at, injection))

    return apply_edits(doc.text, edits)


def sample_distinct_designs(spec: DesignSpec, schema: GeneSchema, n: int,
                            rng: random.Random,
                            enumerate_threshold: int = 4096
                            ) -> list[tuple[tuple[int, ...], str]]:
    """Up to n distinct rendered variants as (sequence, html) pairs.

    Small spaces are enumerated (asking for space_size designs yields
    every one of them); large spaces are rejection-sampled with a
    bounded number of attempts.
    """
    raw = math.prod(schema.option_counts) if schema.gene_count else 1
    if raw <= enumerate_threshold:
        seen: dict[str, tuple[int, ...]] = {}
        for sequence in itertools.product(*(range(c)
                                            for c in schema.option_counts)):
            html = render(spec, schema, sequence)
            seen.setdefault(html, sequence)
        distinct = [(sequence, html) for html, sequence in seen.items()]
        if n >= len(distinct):
            return distinct
        return rng.sample(distinct, n)
    out: list[tuple[tuple[int, ...], str]] = []
    rendered: set[str] = set()
    attempts = 0
    while len(out) < n and attempts < 50 * n + 100:
        attempts += 1
        sequence = tuple(rng.randrange(c) for c in schema.option_counts)
        html = render(spec, schema, sequence)
        if html not in rendered:
            rendered.add(html)
            out.append((sequence, html))
    return out


# ---------------------------------------------------------------------------
# Export


def export_designs(spec: DesignSpec, schema: GeneSchema, individuals: Iterable,
                   out_dir: str | Path) -> dict:
    """Write ranked designs as design-<generation>-<rank>.html + manifest.

    ``individuals`` need ``id``, ``sequence`` and ``generation`` fields;
    rank follows list order, best first.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest: dict = {"designs": []}
    for rank, ind in enumerate(individuals, start=1):
        name = f"design-{ind.generation}-{rank}.html"
        (out / name).write_text(render(spec, schema, ind.sequence),
                                encoding="utf-8")
        manifest["designs"].append({
            "file": name,
            "individual_id": ind.id,
            "generation": ind.generation,
            "rank": rank,
            "sequence": list(ind.sequence),
        })
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2),
                                       encoding="utf-8")
    return manifest
