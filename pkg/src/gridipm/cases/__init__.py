"""Bundled example cases, addressable by short name."""

from importlib import resources

from ..grid.case import GridCase, parse_case


def path(name: str):
    """Traversable path of a bundled case file."""
    return resources.files(__package__) / f"{name}.case"

def load(name: str) -> GridCase:
    p = path(name)
    if not p.is_file():
        available = sorted(f.name[:-5] for f in resources.files(__package__).iterdir()
                           if f.name.endswith(".case"))
        raise FileNotFoundError(f"no bundled case {name!r}; have {available}")
    return parse_case(p.read_text())
