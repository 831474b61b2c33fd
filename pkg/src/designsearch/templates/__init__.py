"""Bundled annotated page templates.

Six full pages (album, blog, cover, dashboard, pricing, product) sized
for the page-type experiments, plus small syntax snippets used in docs
and tests.
"""

from importlib import resources

EXPECTED_SPACE_SIZES = {
    "album": 972,
    "blog": 1080,
    "cover": 972,
    "dashboard": 1215,
    "pricing": 1056,
    "product": 1008,
}


def names() -> list[str]:
    root = resources.files(__package__)
    return sorted(entry.name[:-5] for entry in root.iterdir()
                  if entry.name.endswith(".html"))


def load(name: str) -> str:
    return (resources.files(__package__) / f"{name}.html").read_text("utf-8")
