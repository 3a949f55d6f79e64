import pytest

from app.models.grid import BusKind
from app.services.case_parser import load_case, parse_case, serialize_case
from app.utils.exceptions import CaseParseException, CaseValidationException, UnknownCaseException


def test_ieee14_fixture(ieee14):
    assert len(ieee14.buses) == 14
    assert len(ieee14.branches) == 20
    assert len(ieee14.generators) == 5
    assert len(ieee14.load_buses()) == 11
    assert ieee14.total_demand() == pytest.approx(259.0)
    assert all(br.capacity is None for br in ieee14.branches)


def test_ieee9_fixture(ieee9):
    assert len(ieee9.buses) == 9
    assert len(ieee9.generators) == 3
    assert ieee9.load_buses() == [5, 7, 9]
    assert ieee9.total_demand() == pytest.approx(6.75)


def test_empty_bus_table_is_rejected():
    with pytest.raises(CaseValidationException):
        parse_case("BUS\nGEN\nBRANCH\n")


def test_malformed_row_names_its_line():
    src = "# header\nBUS\n1 load\n"
    with pytest.raises(CaseParseException) as err:
        parse_case(src)
    assert err.value.line_number == 3


def test_non_numeric_column():
    with pytest.raises(CaseParseException) as err:
        parse_case("BUS\n1 load lots\n")
    assert err.value.line_number == 2


def test_unknown_bus_kind():
    with pytest.raises(CaseParseException):
        parse_case("BUS\n1 battery 0\n")


def test_row_before_section():
    with pytest.raises(CaseParseException):
        parse_case("1 load 1.0\nBUS\n")


def test_dangling_branch_reference():
    src = "BUS\n1 generator 0\n2 load 1\nGEN\n1 0 5\nBRANCH\n1 1 9 0.1 -\n"
    with pytest.raises(CaseValidationException):
        parse_case(src)


def test_dangling_generator_reference():
    src = "BUS\n1 generator 0\n2 load 1\nGEN\n7 0 5\nBRANCH\n1 1 2 0.1 -\n"
    with pytest.raises(CaseValidationException):
        parse_case(src)


@pytest.mark.parametrize("x", ["0", "-0.2"])
def test_non_positive_reactance(x):
    src = f"BUS\n1 generator 0\n2 load 1\nGEN\n1 0 5\nBRANCH\n1 1 2 {x} -\n"
    with pytest.raises(CaseValidationException):
        parse_case(src)


def test_demand_on_junction_is_rejected():
    with pytest.raises(CaseValidationException):
        parse_case("BUS\n1 junction 2.0\n")


def test_explicit_capacity_and_kinds():
    src = "BUS\n1 generator 0\n2 load 1.5\n3 junction 0\nGEN\n1 0 5\nBRANCH\n1 1 2 0.1 3.5\n2 2 3 0.2 -\n"
    grid = parse_case(src)
    assert grid.branch(1).capacity == 3.5
    assert grid.branch(2).capacity is None
    assert grid.bus(3).kind == BusKind.JUNCTION


@pytest.mark.parametrize("name", ["ieee14", "ieee9"])
def test_round_trip(name):
    grid = load_case(name)
    again = parse_case(serialize_case(grid), name=grid.name)
    assert again == grid


def test_round_trip_keeps_capacities():
    src = "BUS\n1 generator 0\n2 load 0.3333333333333333\nGEN\n1 0.5 5\nBRANCH\n4 1 2 0.123 7.25\n"
    grid = parse_case(src)
    assert parse_case(serialize_case(grid), name=grid.name) == grid


def test_load_case_from_file(tmp_path, ieee9):
    path = tmp_path / "mg.case"
    path.write_text(serialize_case(ieee9))
    grid = load_case(str(path))
    assert grid.name == "mg"
    assert grid.buses == ieee9.buses


def test_unknown_case():
    with pytest.raises(UnknownCaseException):
        load_case("ieee999")
