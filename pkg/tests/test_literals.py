import pytest
from hypothesis import given
from hypothesis import strategies as st

from abpsim import (
    FromA,
    FromB,
    LiteralError,
    Msg,
    MsgI,
    MsgO,
    OracleCursor,
    OracleSpec,
    SetTimer,
    Tick,
    TimeoutEvent,
    format_value,
    parse_value,
)


@pytest.mark.parametrize("text,value", [
    ("true", True),
    ("false", False),
    ("0", 0),
    ("-17", -17),
    ("[]", ()),
    ("[1,2,3]", (1, 2, 3)),
    ("[true,[3,4]]", (True, (3, 4))),
    ("Tick", Tick),
    ("Timeout", TimeoutEvent),
    ("Msg(7)", Msg(7)),
    ("Msg(true,7)", Msg((True, 7))),
    ("MsgI(FromA(3))", MsgI(FromA(3))),
    ("MsgO(false,4)", MsgO((False, 4))),
    ("FromB(true)", FromB(True)),
    ("SetTimer(3)", SetTimer(3)),
    ("SetTimer(-1)", SetTimer(-1)),
    ("Oracle([true,false],1)", OracleCursor(OracleSpec.explicit([True, False]), 1)),
    ("Oracle([false])", OracleCursor(OracleSpec.explicit([False]), 0)),
])
def test_parse_value_examples(text, value):
    assert parse_value(text) == value


def test_parse_tolerates_whitespace():
    assert parse_value(" [ true , [ 3 , 4 ] ] ") == (True, (3, 4))
    assert parse_value("MsgO( true , 3 )") == MsgO((True, 3))


def test_parse_distinguishes_bools_from_ints():
    assert parse_value("1") == 1 and parse_value("1") is not True
    assert parse_value("true") is True


@pytest.mark.parametrize("text", [
    "",
    "Msg()",
    "Msg(1",
    "[1,",
    "[1 2]",
    "true false",
    "flurb",
    "SetTimer(true)",
    "SetTimer(1,2)",
    "Oracle(3)",
    "Oracle([1],0)",
    "Oracle([true],-1)",
    "Oracle([true],0,9)",
    "Msg(@)",
])
def test_parse_rejects_malformed_text(text):
    with pytest.raises(LiteralError):
        parse_value(text)


def test_format_booleans_before_integers():
    assert format_value(True) == "true"
    assert format_value(False) == "false"
    assert format_value(1) == "1"


def test_format_spreads_wide_tuple_payloads():
    assert format_value(MsgO((True, 3))) == "MsgO(true,3)"
    assert format_value(Msg((1, 2, 3))) == "Msg(1,2,3)"
    # Short tuple payloads stay bracketed so the text re-parses to the
    # same value instead of collapsing.
    assert format_value(Msg((7,))) == "Msg([7])"
    assert format_value(Msg(())) == "Msg([])"


def test_format_sequences_and_states():
    assert format_value((True, (3, 4))) == "[true,[3,4]]"
    assert format_value([1, [2]]) == "[1,[2]]"
    assert format_value(()) == "[]"


def test_format_oracle_cursors():
    cursor = OracleCursor(OracleSpec.explicit([True, False]), 1)
    assert format_value(cursor) == "Oracle([true,false],1)"
    bernoulli = OracleSpec.bernoulli(0.5, 0).cursor()
    with pytest.raises(LiteralError):
        format_value(bernoulli)
    assert "OracleCursor" in format_value(bernoulli, strict=False)


def test_format_strict_rejects_foreign_values():
    with pytest.raises(LiteralError):
        format_value(None)
    with pytest.raises(LiteralError):
        format_value({"a": 1})
    assert format_value(None, strict=False) == "None"


atoms = st.one_of(
    st.booleans(),
    st.integers(-999, 999),
    st.just(Tick),
    st.just(TimeoutEvent),
    st.builds(SetTimer, st.integers(-5, 5)),
    st.builds(
        OracleCursor,
        st.lists(st.booleans(), max_size=4).map(OracleSpec.explicit),
        st.integers(0, 9),
    ),
)

values = st.recursive(
    atoms,
    lambda children: st.one_of(
        st.lists(children, max_size=3).map(tuple),
        children.map(Msg),
        children.map(MsgI),
        children.map(MsgO),
        children.map(FromA),
        children.map(FromB),
    ),
    max_leaves=12,
)


@given(values)
def test_format_parse_round_trip(value):
    assert parse_value(format_value(value)) == value
