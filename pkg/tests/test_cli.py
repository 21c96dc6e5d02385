import hashlib
import importlib.util
import io
import subprocess
import sys
from pathlib import Path

import pytest

from sfst.cli import run
from sfst.textio import parse_automaton

ROOT = Path(__file__).resolve().parents[1]
GOLDEN = Path(__file__).resolve().parent / "golden"
TRAIN = str(ROOT / "demos" / "data" / "toy_train.txt")


def load_tutorial():
    spec = importlib.util.spec_from_file_location("tutorial", ROOT / "demos" / "tutorial.py")
    mod = importlib.util.module_from_spec(spec)
    spec.loader.exec_module(mod)
    return mod


def sfst(*argv):
    buf = io.StringIO()
    code = run(list(argv), buf)
    return code, buf.getvalue()


@pytest.fixture(scope="module")
def tutorial(tmp_path_factory):
    out = tmp_path_factory.mktemp("tutorial")
    with pytest.warns(RuntimeWarning):
        load_tutorial().main(str(out))
    return out


def write(path, text):
    path.write_text(text, encoding="utf-8")
    return str(path)


GEOMETRIC = "0 0 2 0.5\n0 1 1 0.5\n1\n"


@pytest.mark.parametrize("name", sorted(p.name for p in GOLDEN.iterdir()))
def test_tutorial_matches_golden(tutorial, name):
    assert (tutorial / name).read_bytes() == (GOLDEN / name).read_bytes()


def test_approx_equals_count_then_normalize(tutorial):
    assert (tutorial / "approx.fst").read_bytes() == (tutorial / "approx2.fst").read_bytes()


def test_trim_is_idempotent(tutorial, tmp_path):
    code, once = sfst("trim", str(tutorial / "approx.fst"))
    assert code == 0
    code, twice = sfst("trim", write(tmp_path / "t.fst", once))
    assert code == 0 and twice == once


def test_sampled_counts_ignore_jobs(tutorial):
    syms = f"--symbols={tutorial / 'words.syms'}"
    args = [syms, "--samples=20000", "--seed=4", str(tutorial / "katz3.fst"),
            str(tutorial / "pruned.fst")]
    assert sfst("count", "--jobs=1", *args) == sfst("count", "--jobs=3", *args)


def test_inputs_not_mutated(tutorial, tmp_path):
    files = sorted(tutorial.iterdir())
    before = {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}
    with pytest.warns(RuntimeWarning):
        load_tutorial().main(str(tmp_path))
    sfst("trim", str(tutorial / "katz2.fst"))
    sfst("approx", f"--symbols={tutorial / 'words.syms'}", str(tutorial / "katz2.fst"),
         str(tutorial / "katz2.fst"))
    after = {p: hashlib.sha256(p.read_bytes()).hexdigest() for p in files}
    assert before == after


def test_shortestdistance(tmp_path):
    code, out = sfst("shortestdistance", write(tmp_path / "g.fst", GEOMETRIC))
    assert code == 0
    rows = [line.split() for line in out.splitlines()]
    assert [r[0] for r in rows] == ["0", "1"]
    assert float(rows[0][1]) == pytest.approx(2.0, abs=1e-11)
    code, out = sfst("shortestdistance", "--queue=direct", str(tmp_path / "g.fst"))
    assert out.splitlines() == ["0 2", "1 1"]


def test_intersect(tmp_path):
    g = write(tmp_path / "g.fst", GEOMETRIC)
    short = write(tmp_path / "s.fst", "0 1 2 1\n0 2 1 1\n1 2 1 1\n2\n")
    code, out = sfst("intersect", g, short)
    assert code == 0
    m = parse_automaton(out)
    assert m.num_states == 3
    assert m.string_weight([1]) == 0.5 and m.string_weight([2, 1]) == 0.25


def test_randgen_deterministic(tutorial):
    args = ["randgen", f"--symbols={tutorial / 'words.syms'}", "--n=20", "--seed=7",
            str(tutorial / "katz2.fst")]
    first = sfst(*args)
    assert first[0] == 0 and first == sfst(*args)
    assert len(first[1].splitlines()) == 20


def test_normalize_local(tutorial):
    code, out = sfst("normalize", "--method=local", f"--symbols={tutorial / 'words.syms'}",
                     str(tutorial / "approx.cnt.fst"))
    assert code == 0 and out


@pytest.mark.parametrize("argv", [
    ["approx"],
    ["approx", "--bogus", "a", "b"],
    ["count", "--samples=0", "a", "b"],
    ["approx", "--epsilon=-1", "a", "b"],
    ["frobnicate"],
    ["ngram-prune", "m", "c"],
])
def test_usage_errors_exit_1(argv, capsys):
    code, out = sfst(*argv)
    assert code == 1 and out == ""
    assert "usage" in capsys.readouterr().err


@pytest.mark.parametrize("method", ["global", "phi"])
def test_unsupported_normalization_exit_1(tmp_path, capsys, method):
    code, _ = sfst("normalize", f"--method={method}", write(tmp_path / "c.fst", GEOMETRIC))
    assert code == 1
    assert "out of scope" in capsys.readouterr().err


def test_data_errors_exit_2(tmp_path, capsys):
    bad = write(tmp_path / "bad.fst", "0 1 2 0.5\n0 1 2 0.5\n1\n")
    assert sfst("trim", bad)[0] == 2
    assert "bad.fst" in capsys.readouterr().err
    assert sfst("trim", str(tmp_path / "missing.fst"))[0] == 2
    g = write(tmp_path / "g.fst", GEOMETRIC)
    no_a = write(tmp_path / "n.fst", "0 1 1 1\n0 0 3 1\n1\n")
    capsys.readouterr()
    code, out = sfst("count", g, no_a)
    assert code == 2 and out == ""
    assert "prefix [2] is rejected" in capsys.readouterr().err


def test_ngram_count_round_trip(tmp_path):
    code, text = sfst("ngram-count", "--order=2", TRAIN)
    assert code == 0 and text.startswith("# order 2\n")
    with pytest.warns(RuntimeWarning, match="degenerate"):
        code, model = sfst("ngram-make", write(tmp_path / "c.txt", text))
    assert code == 0
    assert model == (GOLDEN / "katz2.fst").read_text()


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "sfst.cli", "--version"],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("sfst ")
