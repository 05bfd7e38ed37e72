"""Command-line surface tests.

Each test drives `cli.main` in-process with an argv list and inspects
exit code, captured stdout/stderr, and any files written.  One test
goes through a real subprocess to make sure the module entry point is
wired up.
"""

import json
import subprocess
import sys

import pytest

from normfreq import cli, ngrams, reports
from normfreq.arith import LAMBDA, PHI, PRIMES, SIGMA, ArithEngine
from normfreq.errors import UnknownFunctionError
from normfreq.experiments import small_lambda_census
from normfreq.words import load_digits


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


# --- chain parsing ---


def test_parse_chain_tokens():
    spec = cli.parse_chain("phi.sigma")
    assert spec.chain == (PHI, SIGMA)
    assert cli.parse_chain("lambda").chain == (LAMBDA,)
    assert cli.parse_chain("id").chain == ()
    assert cli.parse_chain("").chain == ()
    assert cli.parse_chain(None).chain == ()


def test_parse_chain_id_is_transparent():
    assert cli.parse_chain("phi.id.sigma").chain == (PHI, SIGMA)


def test_parse_chain_gstar():
    (fn,) = cli.parse_chain("gstar:2,3").chain
    assert fn.primes == frozenset({2, 3})


def test_parse_chain_carries_domain():
    assert cli.parse_chain("phi", PRIMES).domain is PRIMES


@pytest.mark.parametrize("text", ["bogus", "phi..sigma", "gstar:", "gstar:4", "gstar:2;3", "Phi"])
def test_parse_chain_rejects_bad_tokens(text):
    with pytest.raises(UnknownFunctionError):
        cli.parse_chain(text)


# --- stream ---


def test_stream_naturals_prefix(capsys):
    code, out, _ = run(capsys, "stream", "--f", "id", "--domain", "naturals",
                       "--base", "10", "--digits", "17")
    assert code == 0
    assert out == "12345678910111213\n"


def test_stream_primes_prefix(capsys):
    code, out, _ = run(capsys, "stream", "--f", "id", "--domain", "primes",
                       "--base", "10", "--digits", "20")
    assert code == 0
    assert out == "23571113171923293137\n"


def test_stream_phi_prefix(capsys):
    # phi(1..7) = 1,1,2,2,4,2,6
    code, out, _ = run(capsys, "stream", "--f", "phi", "--digits", "7")
    assert (code, out) == (0, "1122426\n")


def test_stream_order_paper_is_least_significant_first(capsys):
    _, lsf_out, _ = run(capsys, "stream", "--f", "id", "--digits", "17", "--order", "lsf")
    _, paper_out, _ = run(capsys, "stream", "--f", "id", "--digits", "17", "--order", "paper")
    assert paper_out == lsf_out
    assert lsf_out == "12345678901112131\n"  # 10, 11, 12, 13 reversed


def test_stream_large_base_prints_dot_separated(capsys):
    code, out, _ = run(capsys, "stream", "--f", "id", "--base", "16", "--digits", "6")
    assert (code, out) == (0, "1.2.3.4.5.6\n")


def test_stream_dump_round_trips(tmp_path, capsys):
    path = tmp_path / "digits.nfdg"
    code, out, _ = run(capsys, "stream", "--f", "id", "--digits", "10",
                       "--dump", str(path))
    assert code == 0
    arr, g, order = load_digits(path)
    assert "".join(map(str, arr.tolist())) == out.strip()
    assert g == 10 and order.value == "msf"


# --- count ---


def test_count_phi_digit_frequencies(capsys):
    code, out, _ = run(capsys, "count", "--f", "phi", "--domain", "naturals",
                       "--base", "10", "--k", "1", "--digits", "7")
    assert code == 0
    payload = json.loads(out)
    assert payload["counts"] == {"1": 2, "2": 3, "4": 1, "6": 1}
    assert payload["windows"] == 7


def test_count_matches_library(capsys):
    code, out, _ = run(capsys, "count", "--f", "lambda.phi", "--domain", "primes",
                       "--base", "2", "--k", "2", "--digits", "300")
    assert code == 0
    spec = cli.parse_chain("lambda.phi", PRIMES)
    report = ngrams.count_stream(ArithEngine(), spec, 300, g=2, k=2)
    assert out == reports.canonical_json(report)


def test_count_report_file_equals_stdout(tmp_path, capsys):
    path = tmp_path / "census.json"
    code, out, _ = run(capsys, "count", "--f", "phi", "--k", "2", "--digits", "500",
                       "--report", str(path))
    assert code == 0 and out == ""
    stored = path.read_text()
    _, stdout_text, _ = run(capsys, "count", "--f", "phi", "--k", "2", "--digits", "500")
    assert stored == stdout_text


def test_count_reruns_are_byte_identical(tmp_path, capsys):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(capsys, "count", "--f", "sigma", "--base", "2", "--k", "3",
                   "--digits", "2000", "--report", str(path))[0] == 0
    assert a.read_bytes() == b.read_bytes()


def test_count_threads_do_not_change_bytes(tmp_path, capsys):
    one, eight = tmp_path / "t1.json", tmp_path / "t8.json"
    base = ["count", "--f", "phi", "--k", "2", "--digits", "5000"]
    assert cli.main(base + ["--threads", "1", "--report", str(one)]) == 0
    assert cli.main(base + ["--threads", "8", "--report", str(eight)]) == 0
    assert one.read_bytes() == eight.read_bytes()


def test_count_eps_adds_bad_count(capsys):
    code, out, _ = run(capsys, "count", "--f", "id", "--k", "1", "--digits", "9",
                       "--eps", "0.2")
    payload = json.loads(out)
    assert payload["eps"] == 0.2
    assert payload["bad_count"] == 9  # every one-digit value fails the strict test


# --- classify ---


def test_classify_strict_small_range(capsys):
    code, out, _ = run(capsys, "classify", "--eps", "0.2", "--k", "1", "--base", "10",
                       "--limit", "9")
    assert code == 0
    payload = json.loads(out)
    assert payload["kind"] == "classification-report"
    assert payload["bad_count"] == 9
    assert payload["bad_fraction"] == 1.0


def test_classify_matches_library(capsys):
    _, out, _ = run(capsys, "classify", "--eps", "0.05", "--k", "1", "--base", "2",
                    "--limit", "200")
    assert json.loads(out)["bad_count"] == ngrams.classify_range(0.05, 1, 2, 200)


# --- configuration file ---


def test_config_supplies_missing_flags(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# census setup\nf=phi\nbase=10\nk=1\ndigits=7\n")
    code, out, _ = run(capsys, "count", "--config", str(cfg))
    assert code == 0
    assert json.loads(out)["counts"] == {"1": 2, "2": 3, "4": 1, "6": 1}


def test_flags_beat_config(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("digits=7\nf=phi\n")
    code, out, _ = run(capsys, "count", "--config", str(cfg), "--digits", "3")
    assert code == 0
    assert json.loads(out)["N"] == 3


def test_config_foreign_keys_are_ignored(tmp_path, capsys):
    # one file can drive several subcommands; stream skips census keys
    cfg = tmp_path / "run.cfg"
    cfg.write_text("digits=7\nf=phi\nd=12\nexponent=2.0\nthreads=4\n")
    code, out, _ = run(capsys, "stream", "--config", str(cfg))
    assert (code, out) == (0, "1122426\n")


def test_config_without_equals_is_usage_error(tmp_path, capsys):
    cfg = tmp_path / "broken.cfg"
    cfg.write_text("digits\n")
    code, _, err = run(capsys, "count", "--config", str(cfg))
    assert code == 2
    assert "key=value" in err


def test_missing_config_file_is_usage_error(capsys):
    code, _, err = run(capsys, "count", "--config", "/nonexistent/run.cfg")
    assert code == 2


def test_runconfig_round_trip():
    rc = cli.RunConfig(f="phi.sigma", domain="primes", base=16, k=3, order="lsf",
                       digits=1234, eps=0.05, report="out.json")
    text = rc.format()
    assert cli.RunConfig.parse(text) == rc
    assert cli.RunConfig.parse(text).format() == text


def test_runconfig_defaults_round_trip():
    rc = cli.RunConfig()
    assert cli.RunConfig.parse(rc.format()) == rc


def test_runconfig_parse_skips_foreign_keys():
    rc = cli.RunConfig.parse("base=2\nset=squares\nthreads=8\n")
    assert rc.base == 2


# --- sieve cache and NF_CACHE_DIR ---


def test_sieve_writes_default_cache(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NF_CACHE_DIR", str(tmp_path))
    code, out, _ = run(capsys, "sieve", "--limit", "5000")
    assert code == 0
    assert (tmp_path / "spf.cache").exists()
    assert str(tmp_path / "spf.cache") in out


def test_sieve_without_destination_is_usage_error(monkeypatch, capsys):
    monkeypatch.delenv("NF_CACHE_DIR", raising=False)
    code, _, err = run(capsys, "sieve", "--limit", "100")
    assert code == 2
    assert "cache" in err


def test_sieve_capacity_exit_code(tmp_path, capsys):
    code, _, err = run(capsys, "sieve", "--limit", str(10**12),
                       "--cache", str(tmp_path / "huge.spf"))
    assert code == 3
    assert "budget" in err


def test_cache_hit_and_miss_censuses_agree(tmp_path, capsys):
    """Warm-started and cold engines must produce identical reports."""
    cache = tmp_path / "spf.cache"
    assert cli.main(["sieve", "--limit", "3000", "--cache", str(cache)]) == 0
    capsys.readouterr()
    hit, miss = tmp_path / "hit.json", tmp_path / "miss.json"
    common = ["experiment", "fps", "--limit", "2000"]
    assert cli.main(common + ["--cache", str(cache), "--report", str(hit)]) == 0
    assert cli.main(common + ["--report", str(miss)]) == 0
    assert hit.read_bytes() == miss.read_bytes()


def test_count_uses_env_cache(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("NF_CACHE_DIR", str(tmp_path))
    assert cli.main(["sieve", "--limit", "2000"]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "count", "--f", "phi", "--k", "1", "--digits", "7")
    assert code == 0
    assert json.loads(out)["counts"] == {"1": 2, "2": 3, "4": 1, "6": 1}


# --- experiments through the CLI ---


def test_experiment_fps_matches_library(capsys):
    code, out, _ = run(capsys, "experiment", "fps", "--limit", "1000")
    assert code == 0
    expected = small_lambda_census(ArithEngine(), [100, 1000])
    assert out == reports.canonical_json(expected)


def test_experiment_fps_custom_checkpoints(capsys):
    code, out, _ = run(capsys, "experiment", "fps", "--limit", "500",
                       "--checkpoints", "10,500")
    payload = json.loads(out)
    assert [r["x"] for r in payload["rows"]] == [10, 500]
    assert payload["rows"][0]["count"] == 3  # lambda < sqrt at n = 2, 6, 8


def test_experiment_divisor_needs_single_function(capsys):
    code, _, err = run(capsys, "experiment", "divisor", "--f", "phi.sigma",
                       "--d", "2", "--limit", "100")
    assert code == 2
    assert "exactly one function" in err


def test_experiment_omega_tail_has_no_verdict(capsys):
    _, out, _ = run(capsys, "experiment", "omega-tail", "--f", "phi", "--big-k", "1",
                    "--limit", "100")
    row = json.loads(out)["rows"][0]
    assert row["count"] == 95
    assert row["verdict"] is None


def test_experiment_small_value_chain(capsys):
    _, out, _ = run(capsys, "experiment", "small-value", "--f", "phi.phi",
                    "--limit", "10000")
    assert json.loads(out)["rows"][-1]["count"] == 5


def test_experiment_thin_preimage_parts(capsys):
    _, out, _ = run(capsys, "experiment", "thin-preimage", "--f", "phi",
                    "--set", "powers-of-two", "--limit", "1000")
    row = json.loads(out)["rows"][-1]
    assert row["count"] == 54
    assert row["parts"] == {"e1": 14, "e2": 40, "e3": 0}


def test_experiment_growth(capsys):
    _, out, _ = run(capsys, "experiment", "growth", "--f", "id", "--limit", "1000")
    payload = json.loads(out)
    assert payload["max_ratio"] == 1.0
    assert payload["passes"] is True


def test_experiment_non_normal_block(capsys):
    _, out, _ = run(capsys, "experiment", "non-normal", "--primes", "2", "--k", "3",
                    "--digits", "2000")
    payload = json.loads(out)
    assert payload["block"] == "1214121"
    assert payload["observed"] == payload["period_count"]


def test_experiment_extremal(capsys):
    _, out, _ = run(capsys, "experiment", "extremal", "--limit", "10000")
    payload = json.loads(out)
    assert (payload["argmin_phi"], payload["argmax_sigma"]) == (30, 12)


def test_experiment_domain_density_squares_miss_floor(capsys):
    _, out, _ = run(capsys, "experiment", "domain-density", "--set", "squares",
                    "--exponent", "2", "--limit", "10000")
    rows = json.loads(out)["rows"]
    assert rows[-1] == {"x": 10000, "count": 100, "floor": rows[-1]["floor"],
                        "passes": False}
    assert rows[-1]["floor"] > 100


def test_experiment_domain_density_primes(capsys):
    _, out, _ = run(capsys, "experiment", "domain-density", "--set", "primes",
                    "--exponent", "1", "--limit", "1000")
    rows = json.loads(out)["rows"]
    assert [r["count"] for r in rows] == [25, 168]
    assert all(r["passes"] for r in rows)


def test_experiment_unknown_set(capsys):
    code, _, err = run(capsys, "experiment", "domain-density", "--set", "evens",
                       "--limit", "100")
    assert code == 2
    assert "evens" in err


def test_experiment_threads_byte_identical(tmp_path, capsys):
    one, eight = tmp_path / "t1.json", tmp_path / "t8.json"
    base = ["experiment", "non-normal", "--primes", "2", "--k", "3", "--digits", "5000"]
    assert cli.main(base + ["--threads", "1", "--report", str(one)]) == 0
    assert cli.main(base + ["--threads", "8", "--report", str(eight)]) == 0
    assert one.read_bytes() == eight.read_bytes()


# --- report projection ---


@pytest.fixture()
def census_file(tmp_path):
    path = tmp_path / "fps.json"
    assert cli.main(["experiment", "fps", "--limit", "1000", "--report", str(path)]) == 0
    return path


def test_report_csv_projection(census_file, capsys):
    code, out, _ = run(capsys, "report", "--in", str(census_file), "--format", "csv")
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "x,count,bound,ratio,verdict"
    assert lines[1].startswith("100,17,")
    assert lines[2].startswith("1000,88,")


def test_report_json_reemits_same_bytes(census_file, capsys):
    code, out, _ = run(capsys, "report", "--in", str(census_file), "--format", "json")
    assert code == 0
    assert out == census_file.read_text()


def test_report_out_file(census_file, tmp_path, capsys):
    dest = tmp_path / "fps.csv"
    code, out, _ = run(capsys, "report", "--in", str(census_file),
                       "--format", "csv", "--out", str(dest))
    assert code == 0 and out == ""
    assert dest.read_text().startswith("x,count,bound,ratio,verdict\n")


def test_report_kgram_projection(tmp_path, capsys):
    path = tmp_path / "count.json"
    assert cli.main(["count", "--f", "phi", "--k", "1", "--digits", "7",
                     "--report", str(path)]) == 0
    capsys.readouterr()
    code, out, _ = run(capsys, "report", "--in", str(path))
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "word,count,complete,boundary,tail,freq"
    assert lines[1].startswith("1,2,2,0,0,")


def test_report_unknown_kind_is_usage_error(tmp_path, capsys):
    path = tmp_path / "odd.json"
    path.write_text('{"kind": "mystery-report"}\n')
    code, _, err = run(capsys, "report", "--in", str(path))
    assert code == 2
    assert "mystery-report" in err


def test_report_missing_file_is_usage_error(capsys):
    code, _, _ = run(capsys, "report", "--in", "/nonexistent/report.json")
    assert code == 2


# --- exit codes and wiring ---


def test_unknown_function_exits_2(capsys):
    code, _, err = run(capsys, "stream", "--f", "bogus", "--digits", "5")
    assert code == 2
    assert "bogus" in err


def test_missing_required_option_exits_2(capsys):
    code, _, err = run(capsys, "count", "--f", "phi")
    assert code == 2
    assert "--digits" in err


def test_no_subcommand_exits_2(capsys):
    assert run(capsys, )[0] == 2


def test_bad_flag_value_exits_2(capsys):
    assert run(capsys, "count", "--digits", "seven")[0] == 2


def test_help_exits_0(capsys):
    assert run(capsys, "--help")[0] == 0


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "normfreq.cli", "stream", "--f", "id", "--digits", "17"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == "12345678910111213\n"
