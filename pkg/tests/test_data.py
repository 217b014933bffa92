import pytest

from steergen import data as D
from steergen.constraint import accepts, compile_ast, parse_regex
from steergen.core import ControlAlphabet, DataTable, Example
from steergen.errors import AlignmentError, DomainError, FormatError, IoError


class TestTemplates:
    def test_eight_distinct_formats(self):
        assert len(D.DATE_FORMATS) == 8
        assert len({f.template for f in D.DATE_FORMATS}) == 8
        axes = {(f.ordinal_day, f.day_first, f.comma_before_year)
                for f in D.DATE_FORMATS}
        assert len(axes) == 8

    def test_ordinal_day_first_comma(self):
        tokens, states = D.DATE_FORMATS[0].render(14, 9, 2015)
        assert " ".join(tokens) == "today is the fourteenth of september , 2015 ."
        assert states == (0, 0, 5, 1, 5, 2, 4, 3, 4)

    def test_ordinal_month_first_no_comma(self):
        spec = next(f for f in D.DATE_FORMATS
                    if f.ordinal_day and not f.day_first and not f.comma_before_year)
        tokens, _ = spec.render(14, 9, 2015)
        assert " ".join(tokens) == "today is september the fourteenth in the year 2015 ."

    def test_two_token_ordinal_day(self):
        tokens, states = D.DATE_FORMATS[0].render(21, 9, 2015)
        assert tokens[3:5] == ("twenty", "first")
        assert states[3:5] == (1, 1)

    def test_nominal_uses_digits(self):
        spec = next(f for f in D.DATE_FORMATS
                    if not f.ordinal_day and f.day_first and f.comma_before_year)
        tokens, _ = spec.render(14, 9, 2015)
        assert " ".join(tokens) == "today is 14 september , 2015 ."

    def test_ordinal_table_complete(self):
        assert set(D.ORDINALS) == set(range(1, 29))
        assert D.ORDINALS[21] == "twenty first"
        assert D.ORDINALS[28] == "twenty eighth"


class TestGenerate:
    def test_deterministic(self):
        a = D.gen_date_dataset(50, seed=7)
        b = D.gen_date_dataset(50, seed=7)
        assert a == b
        assert D.gen_date_dataset(50, seed=8) != a

    def test_gold_states_total(self):
        for ex in D.gen_date_dataset(200, seed=1):
            assert ex.states is not None
            assert len(ex.states.states) == len(ex.text)
            assert all(0 <= s < D.DATE_K for s in ex.states.states)

    def test_tables_well_formed(self):
        for ex in D.gen_date_dataset(100, seed=2):
            assert ex.table.value("month") in D.MONTHS
            assert 1 <= int(ex.table.value("day")) <= 28
            assert 1990 <= int(ex.table.value("year")) <= 2025

    def test_all_formats_appear(self):
        texts = {" ".join(ex.text[:4]) for ex in D.gen_date_dataset(400, seed=3)}
        assert len(texts) > 4  # all three axes visibly exercised

    def test_n_validated(self):
        with pytest.raises(DomainError):
            D.gen_date_dataset(0, seed=0)


class TestAlignDate:
    def test_matches_generation(self):
        for ex in D.gen_date_dataset(300, seed=4):
            assert D.align_date(ex) == ex.states

    def test_rejects_foreign_text(self):
        ex = D.render_date(3, 3, 2000, 0)
        bad = Example(ex.table, ("hello", "world"))
        with pytest.raises(AlignmentError):
            D.align_date(bad)

    def test_rejects_non_date_table(self):
        bad = Example(DataTable((("name", "x"),)), ("today",))
        with pytest.raises(AlignmentError):
            D.align_date(bad)


class TestFormatConstraint:
    def test_paper_format_regex(self):
        assert D.format_constraint(0) == "AAFB+FCEDE"

    def test_accepts_gold_states(self):
        alphabet = ControlAlphabet(D.DATE_K)
        for fmt in range(8):
            dfa = compile_ast(parse_regex(D.format_constraint(fmt), alphabet),
                              alphabet)
            for day in (1, 14, 21, 28):
                ex = D.render_date(day, 6, 2001, fmt)
                assert accepts(dfa, ex.states.states), (fmt, day)

    def test_formats_mutually_exclusive(self):
        alphabet = ControlAlphabet(D.DATE_K)
        dfa0 = compile_ast(parse_regex(D.format_constraint(0), alphabet), alphabet)
        other = D.render_date(14, 9, 2015, 5)
        assert not accepts(dfa0, other.states.states)


class TestVocab:
    def test_size(self):
        assert len(D.date_vocab()) == 108

    def test_covers_all_renderings(self):
        vocab = D.date_vocab()
        for ex in D.gen_date_dataset(300, seed=5):
            for tok in ex.text:
                assert tok in vocab

    def test_expected_members(self):
        vocab = D.date_vocab()
        for tok in ("twenty", "2015", "september", ",", "."):
            assert tok in vocab


class TestHeuristicAlign:
    TABLE = DataTable((
        ("name", "the phoenix"),
        ("food", "french"),
        ("near", "cafe sicilia"),
    ))

    def test_multi_token_value(self):
        labels = D.heuristic_align(self.TABLE, ["near", "cafe", "sicilia"])
        assert labels == (None, "near", "near")

    def test_single_token_value(self):
        labels = D.heuristic_align(self.TABLE, ["serves", "french", "food"])
        assert labels == (None, "food", None)

    def test_no_overlap(self):
        labels = D.heuristic_align(self.TABLE, ["a", "nice", "place"])
        assert labels == (None, None, None)

    def test_longest_match_wins(self):
        table = DataTable((("a", "city"), ("b", "city center")))
        labels = D.heuristic_align(table, ["in", "city", "center"])
        assert labels == (None, "b", "b")

    def test_partial_span(self):
        labels = D.heuristic_align(self.TABLE, ["phoenix", "pub"])
        assert labels == ("name", None)


class TestLoadTableDataset:
    CSV = (
        "mr,ref\n"
        '"name[The Phoenix], eatType[pub], food[French], area[city centre],'
        ' near[Café Sicilia]","The Phoenix is a French pub."\n'
        '"","empty row"\n'
        '"name[Lone]","lone value sentence"\n'
    )

    def test_parse_and_normalize(self, tmp_path):
        p = tmp_path / "data.csv"
        p.write_text(self.CSV, encoding="utf-8")
        examples = D.load_table_dataset(str(p))
        assert len(examples) == 2
        table = examples[0].table
        assert table.value("name") == "the phoenix"
        assert table.value("eatType") == "pub"
        assert table.value("near") == "cafe sicilia"
        assert len(table.entries) == 5
        assert examples[0].text[0] == "the"

    def test_skips_malformed(self, tmp_path):
        p = tmp_path / "data.csv"
        p.write_text('mr,ref\n"",x\n"name[ok]",fine\n', encoding="utf-8")
        assert len(D.load_table_dataset(str(p))) == 1

    def test_all_bad_rows(self, tmp_path):
        p = tmp_path / "data.csv"
        p.write_text('mr,ref\n"",x\n"",y\n', encoding="utf-8")
        with pytest.raises(FormatError):
            D.load_table_dataset(str(p))

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            D.load_table_dataset(str(tmp_path / "nope.csv"))


class TestDatasetFiles:
    def test_roundtrip(self, tmp_path):
        examples = D.gen_date_dataset(25, seed=6)
        p = str(tmp_path / "dates.jsonl")
        D.save_dataset(examples, p)
        assert D.load_dataset(p) == examples

    def test_missing_file(self, tmp_path):
        with pytest.raises(IoError):
            D.load_dataset(str(tmp_path / "nope.jsonl"))
