"""
Reader and writer for the plain-text case format.

A case has three sections headed BUS, GEN and BRANCH. Rows are whitespace
separated; '#' starts a comment line. Capacity '-' means "assign later from
the base flow".
"""
from importlib import resources
from pathlib import Path
from typing import List
import logging

from pydantic import ValidationError

from app.models.grid import Bus, BusKind, Generator, Branch, GridCase
from app.utils.exceptions import (
    CaseParseException,
    CaseValidationException,
    UnknownCaseException,
)

logger = logging.getLogger(__name__)

FIXTURES = {"ieee14": "ieee14.case", "ieee9": "ieee9.case"}

_COLUMNS = {"BUS": 3, "GEN": 3, "BRANCH": 5}


def _number(token: str, line_number: int, what: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise CaseParseException(f"{what} is not a number: {token!r}", line_number)

def _integer(token: str, line_number: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise CaseParseException(f"{what} is not an integer: {token!r}", line_number)


def parse_case(source: str, name: str = "case") -> GridCase:
    buses: List[Bus] = []
    generators: List[Generator] = []
    branches: List[Branch] = []
    section = None

    for line_number, raw in enumerate(source.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        header = line.upper()
        if header in _COLUMNS:
            section = header
            continue
        if section is None:
            raise CaseParseException(f"row outside of a section: {line!r}", line_number)

        cols = line.split()
        if len(cols) != _COLUMNS[section]:
            raise CaseParseException(
                f"{section} row needs {_COLUMNS[section]} columns, got {len(cols)}", line_number
            )

        try:
            if section == "BUS":
                try:
                    kind = BusKind(cols[1].lower())
                except ValueError:
                    raise CaseParseException(f"unknown bus kind {cols[1]!r}", line_number)
                buses.append(Bus(
                    id=_integer(cols[0], line_number, "bus id"),
                    kind=kind,
                    nominal_demand=_number(cols[2], line_number, "demand"),
                ))
            elif section == "GEN":
                generators.append(Generator(
                    id=len(generators) + 1,
                    bus=_integer(cols[0], line_number, "generator bus"),
                    p_min=_number(cols[1], line_number, "p_min"),
                    p_max=_number(cols[2], line_number, "p_max"),
                ))
            else:
                capacity = None if cols[4] == "-" else _number(cols[4], line_number, "capacity")
                branches.append(Branch(
                    id=_integer(cols[0], line_number, "branch id"),
                    from_bus=_integer(cols[1], line_number, "from bus"),
                    to_bus=_integer(cols[2], line_number, "to bus"),
                    reactance=_number(cols[3], line_number, "reactance"),
                    capacity=capacity,
                ))
        except ValidationError as e:
            raise CaseValidationException(f"line {line_number}: {e.errors()[0]['msg']}")

    try:
        grid = GridCase(name=name, buses=buses, generators=generators, branches=branches)
    except ValidationError as e:
        raise CaseValidationException(f"{name}: {e.errors()[0]['msg']}")

    logger.debug(f"Parsed case {name}: {len(buses)} buses, {len(generators)} generators, {len(branches)} branches")
    return grid


def serialize_case(grid: GridCase) -> str:
    lines = [f"# {grid.name}", "BUS", "# id kind demand"]
    for bus in grid.buses:
        lines.append(f"{bus.id} {bus.kind.value} {bus.nominal_demand!r}")
    lines += ["GEN", "# bus p_min p_max"]
    for gen in grid.generators:
        lines.append(f"{gen.bus} {gen.p_min!r} {gen.p_max!r}")
    lines += ["BRANCH", "# id from to reactance capacity"]
    for br in grid.branches:
        capacity = "-" if br.capacity is None else repr(br.capacity)
        lines.append(f"{br.id} {br.from_bus} {br.to_bus} {br.reactance!r} {capacity}")
    return "\n".join(lines) + "\n"


def load_case(name_or_path: str) -> GridCase:
    """Loads an embedded fixture by name or a case file from disk."""
    if name_or_path in FIXTURES:
        text = resources.files("app.data").joinpath(FIXTURES[name_or_path]).read_text(encoding="utf-8")
        return parse_case(text, name=name_or_path)

    path = Path(name_or_path)
    if not path.is_file():
        raise UnknownCaseException(f"unknown case {name_or_path!r}: not a fixture name or readable file")
    return parse_case(path.read_text(encoding="utf-8"), name=path.stem)
