import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from lingamkit.errors import (
    DegenerateError,
    EncodingError,
    PreconditionError,
    SchemaError,
    StructuralError,
    UnimputableColumnError,
)
from lingamkit.tabular import (
    NOMINAL,
    NUMERIC,
    ORDINAL,
    Column,
    Drop,
    EncodingPlan,
    NumericMatrix,
    OneHot,
    Ordinal,
    Passthrough,
    Table,
    constant_columns,
    encode,
    impute,
    load_csv,
    standardize,
)


def write(tmp_path, text, name="t.csv"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return p


def test_load_infers_numeric_with_missing(tmp_path):
    t = load_csv(write(tmp_path, "age,sex\n40,F\n50,M\n,F\n"))
    age = t.column("age")
    assert t.row_count == 3
    assert age.kind == NUMERIC and age.values == (40.0, 50.0, None) and age.n_missing == 1
    assert t.column("sex").kind == NOMINAL


def test_load_missing_tokens(tmp_path):
    t = load_csv(write(tmp_path, "a,b\nNA,x\n1,null\nNaN,y\n2,z\n"))
    assert t.column("a").values == (None, 1.0, None, 2.0)
    assert t.column("b").values == ("x", None, "y", "z")
    t2 = load_csv(write(tmp_path, "a\n-\n1\n", "u.csv"), missing_tokens={"-"})
    assert t2.column("a").values == (None, 1.0)


def test_duplicate_headers(tmp_path):
    with pytest.raises(SchemaError):
        load_csv(write(tmp_path, "a,a\n1,2\n"))


def test_ragged_rows_report_line(tmp_path):
    with pytest.raises(StructuralError, match="line 3"):
        load_csv(write(tmp_path, "a,b\n1,2\n3\n"))


def test_quoted_fields(tmp_path):
    t = load_csv(write(tmp_path, 'name,v\n"x, y",1\n"z",2\n'))
    assert t.column("name").values == ("x, y", "z")


def test_ordinal_hint(tmp_path):
    t = load_csv(write(tmp_path, "g\nI\nII\nIII\n"), ordinal_levels={"g": ["I", "II", "III"]})
    g = t.column("g")
    assert g.kind == ORDINAL and g.levels == ("I", "II", "III")
    t2 = load_csv(write(tmp_path, "g\n3\n1\n2\n", "n.csv"), kind_hints={"g": ORDINAL})
    assert t2.column("g").levels == ("1", "2", "3")


def test_ordinal_levels_must_cover_values():
    with pytest.raises(SchemaError):
        Column("g", ORDINAL, ("I", "IV"), ("I", "II"))


def test_table_invariants():
    with pytest.raises(SchemaError):
        Table((Column("a", NUMERIC, (1.0,)), Column("a", NUMERIC, (2.0,))))
    with pytest.raises(StructuralError):
        Table((Column("a", NUMERIC, (1.0,)), Column("b", NUMERIC, (1.0, 2.0))))


def test_impute_mean_and_mode():
    t = Table((
        Column("x", NUMERIC, (1.0, 2.0, None, 3.0)),
        Column("c", NOMINAL, ("A", "A", "B", None)),
    ))
    out = impute(t)
    assert out.column("x").values == (1.0, 2.0, 2.0, 3.0)
    assert out.column("c").values[-1] == "A"


def test_impute_mode_tie_first_occurrence():
    t = Table((Column("c", NOMINAL, ("A", "B", None)),))
    assert impute(t).column("c").values[-1] == "A"
    t = Table((Column("c", NOMINAL, ("B", "A", None)),))
    assert impute(t).column("c").values[-1] == "B"


def test_impute_all_missing_names_column():
    t = Table((Column("x", NUMERIC, (1.0,)), Column("empty", NUMERIC, (None,))))
    with pytest.raises(UnimputableColumnError, match="empty"):
        impute(t)


@given(st.lists(st.one_of(st.none(), st.floats(-1e6, 1e6)), min_size=1, max_size=30))
def test_impute_idempotent(vals):
    if all(v is None for v in vals):
        return
    t = Table((Column("x", NUMERIC, tuple(vals)),))
    once = impute(t)
    assert impute(once) == once
    assert once.column("x").n_missing == 0


def test_one_hot_encoding():
    t = Table((Column("colour", NOMINAL, ("Red", "Blue", "Red")),))
    m = encode(t, EncodingPlan.default(t))
    assert m.column_names == ("colour_Red", "colour_Blue")
    assert m.column("colour_Red").tolist() == [1, 0, 1]
    assert m.column("colour_Blue").tolist() == [0, 1, 0]


def test_ordinal_encoding():
    t = Table((Column("g", ORDINAL, ("II", "I"), ("I", "II")),))
    m = encode(t, EncodingPlan({"g": Ordinal(("I", "II"))}))
    assert m.column("g").tolist() == [2, 1]
    m = encode(t, EncodingPlan({"g": Ordinal(("I", "II"), (0, 10))}))
    assert m.column("g").tolist() == [10, 0]


def test_ordinal_map_must_increase():
    with pytest.raises(EncodingError):
        Ordinal(("a", "b"), (2, 1))
    with pytest.raises(EncodingError):
        Ordinal(("a", "b"), (1, 1))


def test_drop_directive_and_column_order():
    t = Table((
        Column("a", NUMERIC, (1.0, 2.0)),
        Column("n", NOMINAL, ("x", "y")),
        Column("r", NUMERIC, (5.0, 6.0)),
        Column("z", NUMERIC, (7.0, 8.0)),
    ))
    plan = EncodingPlan.default(t, drop={"r": "redundant"})
    m = encode(t, plan)
    assert m.column_names == ("a", "n_x", "n_y", "z")
    with pytest.raises(EncodingError):
        Drop("boring")


def test_plan_must_cover_all_columns():
    t = Table((Column("a", NUMERIC, (1.0,)), Column("b", NUMERIC, (2.0,))))
    with pytest.raises(SchemaError):
        encode(t, EncodingPlan({"a": Passthrough()}))


def test_unseen_category():
    t = Table((Column("c", NOMINAL, ("x", "q")),))
    with pytest.raises(EncodingError, match="'q'"):
        encode(t, EncodingPlan({"c": OneHot(("x", "y"))}))


def test_encode_rejects_missing():
    t = Table((Column("a", NUMERIC, (1.0, None)),))
    with pytest.raises(EncodingError):
        encode(t, EncodingPlan.default(t))


@given(st.lists(st.sampled_from("abcd"), min_size=1, max_size=40))
def test_one_hot_rows_sum_to_one(vals):
    t = Table((Column("c", NOMINAL, tuple(vals)),))
    m = encode(t, EncodingPlan.default(t))
    assert np.all(m.data.sum(axis=1) == 1)


@given(st.lists(st.floats(-1e9, 1e9), min_size=1, max_size=20))
def test_passthrough_round_trip_exact(vals):
    t = Table((Column("x", NUMERIC, tuple(vals)),))
    m = encode(t, EncodingPlan.default(t))
    assert m.column("x").tolist() == list(vals)


def test_standardize_two_points():
    m = standardize(NumericMatrix(("a",), np.array([[0.0], [2.0]])))
    assert m.standardized
    np.testing.assert_allclose(m.column("a"), [-np.sqrt(0.5), np.sqrt(0.5)], atol=1e-12)


def test_standardize_constant_column():
    with pytest.raises(DegenerateError):
        standardize(NumericMatrix(("a",), np.array([[5.0], [5.0], [5.0]])))
    assert constant_columns(NumericMatrix(("a", "b"), np.array([[5.0, 1], [5.0, 2]]))) == ["a"]


@settings(max_examples=50)
@given(st.integers(2, 50), st.integers(1, 4), st.integers(0, 10_000))
def test_standardize_idempotent(n, p, seed):
    X = np.random.default_rng(seed).normal(3, 7, (n, p))
    once = standardize(NumericMatrix(tuple(f"c{j}" for j in range(p)), X))
    twice = standardize(once)
    assert np.allclose(once.data, twice.data, atol=1e-9)
    assert np.all(np.abs(once.data.mean(axis=0)) < 1e-9)
    assert np.all(np.abs(once.data.std(axis=0, ddof=1) - 1) < 1e-9)


def test_numeric_matrix_invariants():
    with pytest.raises(PreconditionError):
        NumericMatrix(("a",), np.array([[np.nan]]))
    with pytest.raises(PreconditionError):
        NumericMatrix(("a",), np.array([[1.0], [2.0]]), standardized=True)
    with pytest.raises(SchemaError):
        NumericMatrix(("a", "a"), np.zeros((2, 2)))
    m = NumericMatrix(("a",), np.array([[1.0]]))
    with pytest.raises(ValueError):
        m.data[0, 0] = 2.0


def test_csv_round_trips(tmp_path):
    t = Table((Column("x", NUMERIC, (1.5, None)), Column("c", NOMINAL, ("a,b", "c"))))
    t.to_csv(tmp_path / "t.csv")
    back = load_csv(tmp_path / "t.csv")
    assert back.column("x").values == (1.5, None)
    assert back.column("c").values == ("a,b", "c")
    m = NumericMatrix(("u", "v"), np.random.default_rng(0).normal(size=(5, 2)))
    m.to_csv(tmp_path / "m.csv")
    assert NumericMatrix.from_csv(tmp_path / "m.csv").equals(m)
