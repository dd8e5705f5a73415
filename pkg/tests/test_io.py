# %%
import numpy as np
import pandas as pd
import pytest

from occupancy_engine.core.draws import ChainDraws, PosteriorDraws
from occupancy_engine.core.errors import DuplicateRecord, InvalidStateSpace, ParseError, UnknownSite
from occupancy_engine.core.keywords import NONSPATIAL
from occupancy_engine.io import (
    parse_dataset,
    read_draws,
    read_json,
    read_matrix,
    truth_path,
    write_acceptance,
    write_dataset,
    write_draws,
    write_json,
)
from tests.utils import failing_test, small_dataset

HEADER = "quadrat,site,x,y,t,replicate,state"


def write_lines(path, lines):
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def test_round_trip_is_byte_identical(tmp_path):
    data, frame, states = small_dataset()
    first = tmp_path / "first.csv"
    write_dataset(first, data, frame, states)
    parsed, parsed_frame, parsed_states = parse_dataset(first)
    assert parsed_states.labels == states.labels
    assert np.array_equal(parsed_frame.coords, frame.coords)
    assert (parsed.I, parsed.T, parsed.R) == (data.I, data.T, data.R)
    assert parsed.ragged() == data.ragged()
    second = tmp_path / "second.csv"
    write_dataset(second, parsed, parsed_frame, parsed_states)
    assert first.read_bytes() == second.read_bytes()


def test_canonical_form(tmp_path):
    data, frame, states = small_dataset()
    path = tmp_path / "data.csv"
    write_dataset(path, data, frame, states, quadrat="MC2")
    lines = path.read_text().splitlines()
    assert lines[:3] == ["# states: 1,2", "# periods: 3", "# site: 1,1.0,1.0"]
    assert lines[6] == HEADER
    assert lines[7] == "MC2,1,1.0,1.0,1,1,1"
    # the missing survey of site 3 at the second period
    assert "MC2,3,3.0,1.0,2,1," in lines


def test_headerless_file(tmp_path):
    path = write_lines(
        tmp_path / "raw.csv",
        [
            HEADER,
            "A,20,2.0,0.0,2,1,oak",
            "A,10,1.0,0.0,1,1,beech",
            "A,10,1.0,0.0,2,1,oak",
            "A,20,2.0,0.0,1,2,beech",
            "A,20,2.0,0.0,1,1,NA",
        ],
    )
    data, frame, states = parse_dataset(path)
    assert states.labels == ["beech", "oak"]
    # sites are numbered by id
    assert frame.coords.tolist() == [[1.0, 0.0], [2.0, 0.0]]
    assert (data.I, data.T, data.R) == (2, 2, 4)
    assert data.ragged() == [[[0], [1]], [[0], [1]]]


def test_replicates_keep_their_numbering(tmp_path):
    path = write_lines(
        tmp_path / "replicated.csv",
        [HEADER, "A,1,0,0,1,2,b", "A,1,0,0,1,1,a", "A,1,0,0,2,1,a", "A,1,0,0,1,3,a"],
    )
    data, _, _ = parse_dataset(path)
    assert data.replicates(0, 0).tolist() == [0, 1, 0]


def test_parse_error_line_numbers(tmp_path):
    lines = ["# periods: 2", HEADER, "A,1,0,0,1,1,a", "A,1,0,0,x,1,b"]
    with pytest.raises(ParseError) as error:
        parse_dataset(write_lines(tmp_path / "bad_t.csv", lines))
    assert error.value.line == 4
    lines[-1] = "A,1,0,0,0,1,b"
    with pytest.raises(ParseError) as error:
        parse_dataset(write_lines(tmp_path / "zero_t.csv", lines))
    assert error.value.line == 4
    with pytest.raises(ParseError) as error:
        parse_dataset(write_lines(tmp_path / "bad_periods.csv", ["# periods: two", HEADER]))
    assert error.value.line == 1
    columns = write_lines(tmp_path / "columns.csv", ["site,t,state", "1,1,a"])
    failing_test(parse_dataset, [columns], exception=ParseError)
    failing_test(parse_dataset, [write_lines(tmp_path / "empty.csv", ["# periods: 2"])], exception=ParseError)


def test_duplicates_and_unknown_sites(tmp_path):
    duplicated = write_lines(tmp_path / "dup.csv", [HEADER, "A,1,0,0,1,1,a", "A,1,0,0,1,1,b"])
    failing_test(parse_dataset, [duplicated], exception=DuplicateRecord)
    unknown = write_lines(tmp_path / "unknown.csv", ["# site: 1,0.0,0.0", HEADER, "A,2,1,0,1,1,a"])
    failing_test(parse_dataset, [unknown], exception=UnknownSite)
    moved = write_lines(tmp_path / "moved.csv", ["# site: 1,0.0,0.0", HEADER, "A,1,5,0,1,1,a"])
    failing_test(parse_dataset, [moved], exception=UnknownSite)
    undeclared = write_lines(tmp_path / "undeclared.csv", ["# states: a,b", HEADER, "A,1,0,0,1,1,c"])
    failing_test(parse_dataset, [undeclared], exception=ParseError)


def test_quadrat_selection(tmp_path):
    path = write_lines(tmp_path / "two.csv", [HEADER, "MC1,1,0,0,1,1,a", "MC2,1,0,0,1,1,b", "MC2,1,0,0,2,1,a"])
    failing_test(parse_dataset, [path], exception=ParseError)
    failing_test(parse_dataset, [path], dict(quadrat="MC3"), exception=ParseError)
    data, _, states = parse_dataset(path, quadrat="MC2")
    assert data.R == 2 and states.labels == ["a", "b"]


def test_merge_rare(tmp_path):
    rows = [f"A,{i},{i},0,1,1,{'c' if i < 4 else 'r'}" for i in range(1, 6)]
    path = write_lines(tmp_path / "rare.csv", [HEADER] + rows + ["A,1,1,0,2,1,x"])
    data, _, states = parse_dataset(path, merge_rare=3)
    assert states.labels == ["c", "other"]
    assert data.state.tolist() == [0, 1, 0, 0, 1, 1]


def test_merge_rare_keeps_two_states(tmp_path):
    path = write_lines(tmp_path / "lonely.csv", [HEADER, "A,1,0,0,1,1,a", "A,1,0,0,2,1,a", "A,1,0,0,3,1,b"])
    failing_test(parse_dataset, [path], dict(merge_rare=5), exception=InvalidStateSpace)


def test_json_and_truth_path(tmp_path):
    path = tmp_path / "nested" / "content.json"
    write_json(path, dict(b=1, a=[1.5, 2]))
    assert read_json(path) == dict(a=[1.5, 2], b=1)
    assert truth_path(tmp_path / "dataset_001.csv").name == "dataset_001.truth.json"


def test_draws_files(tmp_path):
    rng = np.random.default_rng(0)
    chains = [
        ChainDraws(
            P=np.stack([rng.dirichlet([1, 1], 4), rng.dirichlet([1, 1], 4)], axis=-1),
            phi=rng.dirichlet([1, 1], 4),
            e=rng.uniform(size=4),
            iterations=np.arange(10, 14),
            acceptance=[(3, "sigma1", 0.5, True)],
        )
        for _ in range(2)
    ]
    draws = PosteriorDraws.from_chains(chains, NONSPATIAL, ["a", "b"], burn_in=10)
    write_draws(tmp_path / "draws.csv", draws)
    write_acceptance(tmp_path / "acceptance.csv", draws)
    back = read_draws(tmp_path / "draws.csv", labels=["a", "b"], acceptance_path=tmp_path / "acceptance.csv")
    assert back.model == NONSPATIAL
    assert np.array_equal(back.P, draws.P) and np.array_equal(back.e, draws.e)
    assert back.iterations.tolist() == [10, 11, 12, 13]
    assert back.acceptance == [(0, 3, "sigma1", 0.5, True), (1, 3, "sigma1", 0.5, True)]
    pd.DataFrame(dict(chain=[1], step=[0.5])).to_csv(tmp_path / "wrong.csv", index=False)
    wrong = dict(acceptance_path=tmp_path / "wrong.csv")
    failing_test(read_draws, [tmp_path / "draws.csv"], wrong, exception=ParseError)


def test_read_matrix(tmp_path):
    plain = write_lines(tmp_path / "plain.csv", ["0.9,0.2", "0.1,0.8"])
    assert read_matrix(plain).tolist() == [[0.9, 0.2], [0.1, 0.8]]
    headed = write_lines(tmp_path / "headed.csv", ["from1,from2", "0.9,0.2", "0.1,0.8"])
    assert read_matrix(headed).tolist() == [[0.9, 0.2], [0.1, 0.8]]
    summary = pd.DataFrame(dict(name=["P_1_1", "P_1_2", "P_2_1", "P_2_2", "e"], estimate=[0.9, 0.2, 0.1, 0.8, 0.3]))
    summary.to_csv(tmp_path / "summary.csv", index=False)
    assert read_matrix(tmp_path / "summary.csv").tolist() == [[0.9, 0.2], [0.1, 0.8]]
    failing_test(read_matrix, [write_lines(tmp_path / "text.csv", ["a,b", "c,d"])], exception=ParseError)
