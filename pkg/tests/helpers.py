"""Shared oracles and generators for the test suite."""

from __future__ import annotations

import itertools
import random

from designsearch import DesignSpec, GeneSchema, build_schema, parse, render


def page(body: str, head: str = "") -> str:
    return (f"<html>\n<head>\n<title>t</title>\n{head}\n</head>\n"
            f"<body>\n{body}\n</body>\n</html>\n")


def enumerate_renders(spec: DesignSpec, schema: GeneSchema) -> set[str]:
    """Brute-force oracle: every raw sequence, rendered; distinct outputs."""
    outputs = set()
    for sequence in itertools.product(*(range(c) for c in schema.option_counts)):
        outputs.add(render(spec, schema, sequence))
    return outputs


def random_schema(rng: random.Random, max_genes: int = 8,
                  linked: bool = True) -> GeneSchema:
    """A random gene layout, optionally with activation links."""
    n = rng.randint(2, max_genes)
    counts = [rng.randint(2, 5) for _ in range(n)]
    activation: list[tuple[int, int] | None] = [None] * n
    if linked:
        for gene in range(1, n):
            if rng.random() < 0.4:
                parent = rng.randrange(gene)
                activation[gene] = (parent, rng.randrange(counts[parent]))
    return GeneSchema(tuple(counts), tuple(activation), tuple(range(n)))


class _SpecBuilder:
    """Random annotated page with nested child-select chains.

    Keeps the raw sequence product under ``max_raw`` so the enumeration
    oracle stays cheap. Every option value is globally unique, so
    distinct active choices always render distinct documents.
    """

    PROPS = ["color", "background", "font-size", "padding", "margin",
             "border-radius", "letter-spacing"]

    def __init__(self, rng: random.Random, max_raw: int = 3000,
                 max_genes: int = 8):
        self.rng = rng
        self.max_raw = max_raw
        self.max_genes = max_genes
        self.raw = 1
        self.genes = 0
        self.uid = 0
        self.has_nested_chain = False

    def _fits(self, count: int) -> bool:
        return self.genes < self.max_genes and self.raw * count <= self.max_raw

    def _value(self) -> str:
        self.uid += 1
        return f"v{self.uid}"

    def _ident(self, stem: str) -> str:
        self.uid += 1
        return f"{stem}{self.uid}"

    def _css_attrs(self, limit: int) -> str:
        parts = []
        props = self.rng.sample(self.PROPS, k=min(limit, len(self.PROPS)))
        for prop in props:
            count = self.rng.randint(2, 4)
            if not self._fits(count):
                break
            self.raw *= count
            self.genes += 1
            values = " ".join(self._value() for _ in range(count))
            parts.append(f'explore-{prop}="{values}"')
        return " ".join(parts)

    def _element(self, depth: int) -> str:
        roll = self.rng.random()
        if roll < 0.45 and depth < 3:
            count = self.rng.randint(2, 3)
            if self._fits(count):
                self.raw *= count
                self.genes += 1
                if depth > 0:
                    self.has_nested_chain = True
                ids = [self._ident("cand") for _ in range(count)]
                candidates = "\n".join(
                    f'<div id="{cid}">{self._element(depth + 1)}</div>'
                    for cid in ids)
                keep = f"<span>{self._ident('keep')}</span>"
                listed = " ".join(ids)
                return (f'<div explore-child-id="{listed}">\n{candidates}\n'
                        f'{keep}\n</div>')
        if roll < 0.85:
            attrs = self._css_attrs(self.rng.randint(1, 2))
            sep = " " if attrs else ""
            return f"<div{sep}{attrs}>{self._ident('text')}</div>"
        return f"<p>{self._ident('plain')}</p>"

    def build(self) -> str:
        blocks = [self._element(0) for _ in range(self.rng.randint(2, 4))]
        head = ""
        if self.rng.random() < 0.4 and self._fits(2):
            self.raw *= 2
            self.genes += 1
            head = (f"<explore-css>\nh1 {{ color: {self._value()}; }}\n"
                    f"----\nh1 {{ color: {self._value()}; }}\n</explore-css>")
        return page("\n".join(blocks), head=head)


def random_spec_html(rng: random.Random, max_raw: int = 3000,
                     max_genes: int = 8) -> tuple[str, bool]:
    """Annotated page plus a flag telling whether it nests child-selects."""
    builder = _SpecBuilder(rng, max_raw=max_raw, max_genes=max_genes)
    html = builder.build()
    return html, builder.has_nested_chain


def parse_and_schema(html: str):
    spec = parse(html)
    return spec, build_schema(spec)


class FixedRng:
    """Feeds preset values for randint, delegates everything else."""

    def __init__(self, randints: list[int], seed: int = 0):
        self._randints = list(randints)
        self._rng = random.Random(seed)

    def randint(self, a: int, b: int) -> int:
        if self._randints:
            value = self._randints.pop(0)
            assert a <= value <= b
            return value
        return self._rng.randint(a, b)

    def __getattr__(self, name):
        return getattr(self._rng, name)
