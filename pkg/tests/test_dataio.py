import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from stochgrowth.dataio import (
    SeriesSource,
    SynthSpec,
    check_contiguous_years,
    default_synth_spec,
    export_gdp_csv,
    export_income_csv,
    fetch_series,
    parse_gdp_csv,
    parse_income_csv,
    synth_generate,
    url_digest,
)
from stochgrowth.errors import FetchError, OfflineError, ParseError, ValidationError

URL = "https://example.org/series.csv"


# --- GDP CSV ----------------------------------------------------------------


def test_parse_gdp_two_points():
    g = parse_gdp_csv("date,value\n1994-01-01,28000\n1994-04-01,28200\n")
    assert len(g) == 2
    assert g.values.tolist() == [28000.0, 28200.0]
    assert g.frequency == "Q"


def test_quarter_notation():
    g = parse_gdp_csv("date,value\n1994-Q1,1\n1994-Q2,2\n")
    assert str(g.periods[0]) == "1994-01-01"
    assert str(g.periods[1]) == "1994-04-01"


@given(st.permutations(list(range(12))))
def test_shuffled_rows_sorted_and_round_trip(order):
    rows = [f"{1990 + i}-01-01,{1000 + 7 * i}" for i in range(12)]
    text = "date,value\n" + "\n".join(rows[i] for i in order) + "\n"
    g = parse_gdp_csv(text)
    assert np.all(np.diff(g.periods).astype(int) > 0)
    out = export_gdp_csv(g)
    assert export_gdp_csv(parse_gdp_csv(out)) == out


def test_gdp_errors_carry_line_numbers():
    with pytest.raises(ParseError) as err:
        parse_gdp_csv("date,value\n1994-01-01,1\n1994/02/01,2\n")
    assert err.value.line == 3
    with pytest.raises(ParseError):
        parse_gdp_csv("when,value\n1994-01-01,1\n")
    with pytest.raises(ValidationError):
        parse_gdp_csv("date,value\n1994-01-01,-5\n")
    with pytest.raises(ValidationError):
        parse_gdp_csv("date,value\n1994-01-01,5\n1994-01-01,6\n")


def test_annualize_keeps_complete_years():
    text = "date,value\n" + "\n".join(f"{1994 + i // 4}-Q{i % 4 + 1},{4 + i}" for i in range(10)) + "\n"
    a = parse_gdp_csv(text).annualize()
    assert a.years.tolist() == [1994, 1995]
    assert a.values.tolist() == [5.5, 9.5]


# --- income CSV -------------------------------------------------------------

INCOME = "year,bin_lower,bin_upper,count\n2000,0,10,5\n2000,10,25,7\n2000,25,,2\n"


def test_parse_income_single_year():
    (h,) = parse_income_csv(INCOME)
    assert h.year == 2000
    assert h.counts.tolist() == [5.0, 7.0, 2.0]
    assert np.isinf(h.upper[-1])
    out = export_income_csv([h])
    assert export_income_csv(parse_income_csv(out)) == out


def test_income_overlap_names_year():
    with pytest.raises(ValidationError) as err:
        parse_income_csv("year,bin_lower,bin_upper,count\n2001,0,10,1\n2001,5,15,1\n")
    assert "2001" in str(err.value)


def test_income_many_years_contiguous():
    rows = [f"{y},{lo},{hi},{c}" for y in range(1994, 2016) for lo, hi, c in [(0, 10, 3), (10, "", 1)]]
    hists = parse_income_csv("year,bin_lower,bin_upper,count\n" + "\n".join(rows))
    assert len(hists) == 22
    assert check_contiguous_years(hists) == list(range(1994, 2016))
    with pytest.raises(ValidationError):
        check_contiguous_years(hists[:3] + hists[4:])


# --- fetching ---------------------------------------------------------------


class Stub:
    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = 0

    def __call__(self, url, timeout):
        self.calls += 1
        r = self.responses.pop(0)
        if isinstance(r, Exception):
            raise r
        return r


def test_local_file_verbatim(tmp_path):
    p = tmp_path / "g.csv"
    p.write_bytes(b"date,value\n1994-01-01,1\n")
    assert fetch_series(SeriesSource("local-file", str(p))) == p.read_bytes()


def test_second_fetch_hits_cache(tmp_path):
    stub = Stub([(200, b"payload")])
    src = SeriesSource("remote-url", URL)
    assert fetch_series(src, cache_dir=tmp_path, transport=stub) == b"payload"
    assert fetch_series(src, cache_dir=tmp_path, transport=stub) == b"payload"
    assert stub.calls == 1
    meta = json.loads((tmp_path / f"{url_digest(URL)}.meta").read_text())
    assert meta["url"] == URL and meta["bytes"] == 7


def test_404_is_not_retried(tmp_path):
    stub = Stub([(404, b"")] * 3)
    with pytest.raises(FetchError) as err:
        fetch_series(SeriesSource("remote-url", URL), cache_dir=tmp_path, transport=stub, sleep=lambda s: None)
    assert err.value.status == 404
    assert stub.calls <= 3


def test_server_errors_retry_then_succeed(tmp_path):
    delays = []
    stub = Stub([(503, b""), OSError("reset"), (200, b"ok")])
    body = fetch_series(SeriesSource("remote-url", URL), cache_dir=tmp_path, transport=stub, sleep=delays.append)
    assert body == b"ok"
    assert stub.calls == 3
    assert delays == [0.5, 1.0]


def test_persistent_failure_stops_at_three(tmp_path):
    stub = Stub([(500, b"")] * 5)
    with pytest.raises(FetchError):
        fetch_series(SeriesSource("remote-url", URL), cache_dir=tmp_path, transport=stub, sleep=lambda s: None)
    assert stub.calls == 3


def test_offline_without_cache(tmp_path, monkeypatch):
    stub = Stub([])
    with pytest.raises(OfflineError):
        fetch_series(SeriesSource("remote-url", URL), cache_dir=tmp_path, offline=True, transport=stub)
    monkeypatch.setenv("STOCHGROWTH_OFFLINE", "1")
    with pytest.raises(OfflineError):
        fetch_series(SeriesSource("remote-url", URL), cache_dir=tmp_path, transport=stub)
    assert stub.calls == 0


def test_remote_requires_https():
    with pytest.raises(ValidationError):
        SeriesSource("remote-url", "http://example.org/x.csv")
    with pytest.raises(ValidationError):
        SeriesSource("ftp", "x")


# --- synthetic data ---------------------------------------------------------


def test_synth_zero_noise_linear_log_gdp():
    spec = default_synth_spec(seed=1, eps1_sd=0.0, eps2_scale=0.0, n_income=2000)
    data = synth_generate(spec)
    np.testing.assert_allclose(np.diff(np.log(data.gdp.values)), 0.02, atol=1e-12)


def test_synth_deterministic_outputs():
    spec = default_synth_spec(seed=9, n_income=5000)
    a, b = synth_generate(spec), synth_generate(spec)
    assert export_gdp_csv(a.gdp) == export_gdp_csv(b.gdp)
    assert export_income_csv(a.incomes) == export_income_csv(b.incomes)
    c = synth_generate(default_synth_spec(seed=10, n_income=5000))
    assert export_gdp_csv(a.gdp) != export_gdp_csv(c.gdp)


def test_synth_histograms_and_truth():
    data = synth_generate(default_synth_spec(seed=2, n_income=10_000))
    assert [h.year for h in data.incomes] == list(range(1994, 2016))
    assert all(h.counts.sum() == 10_000 for h in data.incomes)
    assert all(h.counts.size == 40 and np.isinf(h.upper[-1]) for h in data.incomes)
    again = SynthSpec.from_dict(data.truth)
    assert again.to_dict() == {k: v for k, v in data.truth.items() if k != "growth"}


def test_synth_spec_theta_length_checked():
    with pytest.raises(ValidationError):
        SynthSpec(default_synth_spec().laws, np.zeros(3))
