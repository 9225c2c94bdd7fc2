import pytest
from hypothesis import given, settings, strategies as st

from hazardscope.errors import ValidationError
from hazardscope.ingest import GroundTruth
from hazardscope.submission import (SubmissionRow, SubmissionTable, evaluate_submission, read_submission,
                                    write_submission)

text = st.text(st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), max_size=12)
ids = text.filter(bool)


@st.composite
def tables(draw):
    slots = draw(st.integers(1, 6))
    keys = draw(st.sets(st.tuples(ids, st.integers(0, 10 ** 6)), max_size=8))
    rows = []
    for vid, fi in sorted(keys):
        hazards = draw(st.lists(st.tuples(ids, text), max_size=slots))
        rows.append(SubmissionRow(vid, fi, draw(st.booleans()), tuple(hazards)))
    return SubmissionTable(tuple(rows), slots)


def _row(vid="v", fi=0, state=False, hazards=()):
    return SubmissionRow(vid, fi, state, tuple(hazards))


def test_layout(tmp_path):
    p = tmp_path / "s.csv"
    write_submission(SubmissionTable((_row(hazards=[("t1", "dog"), ("t2", "")]),)), p)
    header, line = p.read_text().splitlines()
    assert header.split(",")[:3] == ["ID", "Driver_State_Changed", "Hazard_Track_1"]
    assert header.split(",")[-1] == "Hazard_Name_22"
    cells = line.split(",")
    assert len(cells) == 46 and cells[:4] == ["v_0", "False", "t1", "t2"]
    assert cells[4:24] == [""] * 20 and cells[24] == "dog"


@settings(max_examples=150, deadline=None)
@given(tables())
def test_round_trip(tmp_path_factory, table):
    p = tmp_path_factory.mktemp("rt") / "s.csv"
    write_submission(table, p)
    assert read_submission(p) == table


@pytest.mark.parametrize("body,match", [
    ("v_0,False\n", "columns"),
    ("v0,False,,,,\n", "malformed ID"),
    ("v_0,maybe,,,,\n", "True/False"),
    ("v_0,True,,,,\nv_0,True,,,,\n", "duplicate"),
    ("v_0,True,,a,,\n", "packed"),
    ("v_0,True,a,,,x\n", "packed"),
])
def test_malformed(tmp_path, body, match):
    p = tmp_path / "s.csv"
    p.write_text("ID,Driver_State_Changed,Hazard_Track_1,Hazard_Track_2,Hazard_Name_1,Hazard_Name_2\n" + body)
    with pytest.raises(ValidationError, match=match):
        read_submission(p)


def test_bad_header(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("ID,State,Hazard_Track_1,Hazard_Name_1\n")
    with pytest.raises(ValidationError, match="header"):
        read_submission(p)
    p.write_text("")
    with pytest.raises(ValidationError, match="empty"):
        read_submission(p)


def test_table_validation():
    with pytest.raises(ValidationError, match="duplicate"):
        SubmissionTable((_row(), _row()))
    with pytest.raises(ValidationError, match="exceed"):
        SubmissionTable((_row(hazards=[("a", ""), ("b", "")]),), slots=1)
    with pytest.raises(ValidationError):
        SubmissionTable((_row(hazards=[("", "dog")]),))


def test_evaluate(tmp_path):
    gt = GroundTruth("v", (False, True), (frozenset(), frozenset({"a", "b"})), (frozenset(), frozenset({"dog"})))
    table = SubmissionTable((_row(fi=0), _row(fi=1, state=False, hazards=[("a", "Dog")])))
    rep = evaluate_submission(table, {"v": gt})
    assert rep.overall.a_reaction == 0.5 and rep.overall.a_detection == 0.75
    assert rep.overall.a_classific == 1.0
    with pytest.raises(ValidationError, match="cover"):
        evaluate_submission(SubmissionTable((_row(fi=0),)), {"v": gt})
    with pytest.raises(ValidationError, match="lacks"):
        evaluate_submission(table, {"v": gt, "w": gt})
