import json
import logging

import numpy as np
import pytest

from skillguard.exceptions import DuplicateSkillError, VersionMismatchError
from skillguard.graph import Skill
from skillguard.identity import (
    CorpusFetcher,
    Delta,
    MapperEntry,
    MapperTable,
    PageRecord,
    apply_delta,
    build_mapper_table,
    diff_tables,
    extract_domains,
    extract_links,
    find_backlink,
    load_corpus,
    with_neighbors,
)
from skillguard.graph import build_graph
from skillguard.io import write_canonical
from skillguard.phonetics import CostMatrix
from skillguard.urls import canonicalize_url, is_skill_page, root_domain

FITBIT_URL = "https://www.amazon.com/dp/B01DFKBXNA"


def fitbit(**kw):
    base = dict(
        id="fitbit",
        name="Fitbit",
        invocation="fit bit",
        amazon_url=FITBIT_URL,
        metadata_urls=("https://www.fitbit.com/privacy", "https://help.fitbit.com/x"),
        account_linking=True,
        phonemes=("F", "IH", "T", "B", "IH", "T"),
    )
    base.update(kw)
    return Skill(**base)


def link_page(url, target=FITBIT_URL, cert="c0", user_generated=False, text=None):
    body = text if text is not None else f'<html><a href="{target}">Alexa</a></html>'
    return PageRecord(url=url, body=body, cert_sha256=cert, user_generated=user_generated)


class TestUrls:
    @pytest.mark.parametrize(
        "raw, expected",
        [
            ("HTTPS://WWW.Amazon.COM/dp/B01DFKBXNA/", "https://www.amazon.com/dp/B01DFKBXNA"),
            ("https://www.amazon.com/dp/B01DFKBXNA?ref=x&utm_source=y#top",
             "https://www.amazon.com/dp/B01DFKBXNA"),
            ("https://a.com/p?id=3&tag=z", "https://a.com/p?id=3"),
            ("https://a.com/p?UTM_Medium=1&q=2", "https://a.com/p?q=2"),
        ],
    )
    def test_canonicalize(self, raw, expected):
        assert canonicalize_url(raw) == expected

    def test_path_case_preserved(self):
        assert canonicalize_url("https://a.com/Dp/X") != canonicalize_url("https://a.com/dp/x")

    def test_relative_rejected(self):
        with pytest.raises(ValueError):
            canonicalize_url("/dp/B01DFKBXNA")

    @pytest.mark.parametrize(
        "url, root",
        [
            ("https://help.fitbit.com/x", "fitbit.com"),
            ("https://www.bbc.co.uk/news", "bbc.co.uk"),
            ("https://s3.amazonaws.com/bucket/p.html", "amazonaws.com"),
            ("FOO.Example.ORG", "example.org"),
            ("https://10.0.0.1/x", ""),
        ],
    )
    def test_root_domain(self, url, root):
        assert root_domain(url) == root

    @pytest.mark.parametrize(
        "url, expected",
        [
            (FITBIT_URL, True),
            ("https://www.amazon.com/Fitbit-Inc/dp/B01DFKBXNA/ref=sr_1", True),
            ("https://alexa.amazon.com/spa/index.html#skills/dp/B01DFKBXNA", True),
            ("https://www.amazon.com/gp/cart", False),
            ("https://www.fitbit.com/dp/B01DFKBXNA", False),
        ],
    )
    def test_skill_page(self, url, expected):
        assert is_skill_page(url) is expected


class TestExtractDomains:
    def test_shared_root(self):
        assert extract_domains(fitbit()) == ["fitbit.com"]

    def test_empty(self):
        assert extract_domains(fitbit(metadata_urls=())) == []

    def test_cloud_hosting_denied(self):
        s = fitbit(metadata_urls=("https://s3.amazonaws.com/skill-assets/p.html",))
        assert extract_domains(s) == []

    def test_custom_denylist(self):
        assert extract_domains(fitbit(), denylist=frozenset({"fitbit.com"})) == []

    def test_order_and_dedup(self):
        s = fitbit(metadata_urls=("https://b.org/1", "https://A.com/2", "https://x.b.org/3"))
        assert extract_domains(s) == ["b.org", "a.com"]

    def test_unparseable_skipped_with_warning(self, caplog):
        s = fitbit(metadata_urls=("not a url at all", "http://[::1", "https://www.fitbit.com/"))
        with caplog.at_level(logging.WARNING):
            assert extract_domains(s) == ["fitbit.com"]
        assert "unparseable" in caplog.text


class TestFindBacklink:
    def test_direct_link(self):
        pages = [link_page("https://www.fitbit.com/alexa", cert="abc")]
        assert find_backlink(fitbit(), pages) == ("fitbit.com", "abc")

    def test_user_generated_ignored(self):
        pages = [link_page("https://community.fitbit.com/t/1", user_generated=True)]
        assert find_backlink(fitbit(), pages) is None

    def test_plain_text_is_not_a_link(self):
        pages = [link_page("https://www.fitbit.com/", text=f"<p>{FITBIT_URL}</p>")]
        assert find_backlink(fitbit(), pages) is None

    def test_canonicalized_match(self):
        target = "HTTPS://WWW.AMAZON.COM/dp/B01DFKBXNA/?ref=home&utm_source=x#reviews"
        assert find_backlink(fitbit(), [link_page("https://www.fitbit.com/", target=target)])

    def test_relative_href_resolved_against_page(self):
        page = link_page("https://www.fitbit.com/", target="/dp/B01DFKBXNA")
        assert find_backlink(fitbit(), [page]) is None
        assert extract_links(page) == {"https://www.fitbit.com/dp/B01DFKBXNA"}

    def test_different_listing(self):
        page = link_page("https://www.fitbit.com/", target="https://www.amazon.com/dp/B000000000")
        assert find_backlink(fitbit(), [page]) is None

    def test_foreign_domain_pages_ignored(self):
        page = link_page("https://www.phitbit.com/", cert="evil")
        assert find_backlink(fitbit(), [page]) is None

    def test_deterministic_first_page(self):
        s = fitbit(metadata_urls=("https://b.com/privacy", "https://a.com/terms"))
        pages = [
            link_page("https://a.com/x", cert="A"),
            link_page("https://b.com/z", cert="B2"),
            link_page("https://b.com/y", cert="B1"),
        ]
        assert find_backlink(s, pages) == ("b.com", "B1")
        assert find_backlink(s, list(reversed(pages))) == ("b.com", "B1")


class TestPageRecord:
    def test_domain_derived(self):
        assert PageRecord("https://x.fitbit.com/a").domain == "fitbit.com"

    def test_domain_mismatch(self):
        with pytest.raises(ValueError):
            PageRecord("https://x.fitbit.com/a", domain="phitbit.com")

    def test_corpus_manifest(self, tmp_path):
        (tmp_path / "pages").mkdir()
        (tmp_path / "pages" / "a.html").write_text(f'<a href="{FITBIT_URL}">x</a>')
        write_canonical(
            [{"url": "https://www.fitbit.com/", "domain": "fitbit.com", "path": "pages/a.html",
              "user_generated": False, "cert_sha256": "ff"}],
            tmp_path / "manifest.json",
        )
        pages = load_corpus(tmp_path / "manifest.json")
        assert find_backlink(fitbit(), pages) == ("fitbit.com", "ff")
        assert CorpusFetcher(pages).domain_certs() == {"fitbit.com": "ff"}


def three_skills():
    return [
        fitbit(),
        Skill("phitbit", "Phitbit", "phit bit", "https://www.amazon.com/dp/B0PHITBIT0",
              ("https://www.phitbit.net/privacy",), phonemes=("F", "IH", "T", "B", "IH", "T")),
        Skill("fitbid", "Fit Bid", "fit bid", "https://www.amazon.com/dp/B0FITBID00",
              ("https://s3.amazonaws.com/x/p.html",), phonemes=("F", "IH", "T", "B", "IH", "D")),
    ]


COSTS = CostMatrix.uniform(["F", "IH", "T", "B", "D"])


class TestBuildMapperTable:
    def test_one_identity_with_neighbors(self):
        pages = [link_page("https://www.fitbit.com/alexa", cert="fb")]
        table = build_mapper_table(three_skills(), COSTS, 400, pages)
        assert table.version == 1 and len(table) == 1
        entry = table["fitbit"]
        assert (entry.domain, entry.cert_sha256) == ("fitbit.com", "fb")
        assert entry.neighbors == (("phitbit", 0.0), ("fitbid", pytest.approx(1000 / 6)))

    def test_empty_corpus(self):
        assert len(build_mapper_table(three_skills(), COSTS, 400, [])) == 0

    def test_duplicate_ids(self):
        cat = three_skills()
        with pytest.raises(DuplicateSkillError):
            build_mapper_table(cat + cat[:1], COSTS, 400, [])

    def test_injection_resistance(self):
        pages = [link_page("https://www.fitbit.com/alexa", cert="fb")]
        base = build_mapper_table(three_skills(), COSTS, 400, pages)
        rng = np.random.default_rng(0)
        for k in range(50):
            target = three_skills()[int(rng.integers(3))]
            host = ["www.fitbit.com", "forum.phitbit.net", "community.fitbit.com"][k % 3]
            planted = link_page(f"https://{host}/t/{k}", target=target.amazon_url,
                                cert=f"evil{k}", user_generated=True)
            assert build_mapper_table(three_skills(), COSTS, 400, pages + [planted]).to_json() \
                == base.to_json()

    def test_deterministic_under_page_order(self):
        pages = [link_page("https://www.fitbit.com/b", cert="2"),
                 link_page("https://www.fitbit.com/a", cert="1")]
        a = build_mapper_table(three_skills(), COSTS, 400, pages)
        b = build_mapper_table(list(reversed(three_skills())), COSTS, 400, list(reversed(pages)))
        assert a.to_json() == b.to_json()
        assert a["fitbit"].cert_sha256 == "1"

    def test_with_neighbors(self):
        pages = [link_page("https://www.fitbit.com/alexa", cert="fb")]
        table = build_mapper_table(three_skills(), COSTS, 400, pages)
        graph = build_graph(three_skills(), COSTS, 0)
        assert with_neighbors(table, graph)["fitbit"].neighbors == (("phitbit", 0.0),)


def random_entry(rng, sid, n_skills=40):
    k = int(rng.integers(0, 12))
    others = rng.choice(n_skills, size=k, replace=False)
    nbrs = sorted(((f"S{int(o):03d}", round(float(rng.uniform(0, 400)), 6)) for o in others),
                  key=lambda t: (t[1], t[0]))
    dom = f"d{int(rng.integers(100))}.com"
    return MapperEntry(sid, f"https://www.amazon.com/dp/B0{sid:0>8}", dom,
                       f"{int(rng.integers(1 << 62)):064x}", tuple(nbrs))


def mutate(rng, table):
    entries = {e.skill_id: e for e in table.entries}
    for _ in range(int(rng.integers(1, 6))):
        op = rng.integers(3)
        sid = f"S{int(rng.integers(40)):03d}"
        if op == 0 and sid in entries:
            del entries[sid]
        else:
            entries[sid] = random_entry(rng, sid)
    return MapperTable(table.version + 1, table.threshold, tuple(entries.values()))


class TestDelta:
    def test_identical_tables(self):
        t = MapperTable(1, 400, (random_entry(np.random.default_rng(0), "S001"),))
        nxt = MapperTable(2, 400, t.entries)
        delta = diff_tables(t, nxt)
        assert not delta
        assert apply_delta(t, delta).to_json() == nxt.to_json()

    def test_one_changed(self):
        rng = np.random.default_rng(1)
        e = random_entry(rng, "S001")
        old = MapperTable(1, 400, (e, random_entry(rng, "S002")))
        changed = MapperEntry(e.skill_id, e.amazon_url, e.domain, e.cert_sha256, e.neighbors[:-1]
                              if e.neighbors else (("S009", 1.0),))
        new = MapperTable(2, 400, (changed, old.entries[1]))
        delta = diff_tables(old, new)
        assert [x.skill_id for x in delta.changed] == ["S001"]
        assert delta.added == () and delta.removed == ()

    def test_randomized_roundtrip(self):
        rng = np.random.default_rng(2)
        table = MapperTable(1, 400, tuple(random_entry(rng, f"S{k:03d}") for k in range(20)))
        for _ in range(100):
            new = mutate(rng, table)
            delta = Delta.from_dict(json.loads(diff_tables(table, new).to_json()))
            assert apply_delta(table, delta).to_json() == new.to_json()
            assert all(size <= 4096 for size in delta.entry_payload_sizes().values())
            table = new

    def test_version_checks(self):
        t1 = MapperTable(1, 400)
        with pytest.raises(VersionMismatchError):
            diff_tables(t1, MapperTable(3, 400))
        delta = diff_tables(t1, MapperTable(2, 400))
        with pytest.raises(VersionMismatchError):
            apply_delta(MapperTable(2, 400), delta)

    def test_table_rejects_duplicates(self):
        e = random_entry(np.random.default_rng(3), "S001")
        with pytest.raises(DuplicateSkillError):
            MapperTable(1, 400, (e, e))

    def test_table_file_shape(self):
        e = MapperEntry("a", "u", "d.com", "c", (("b", 12.5),))
        data = json.loads(MapperTable(1, 400, (e,)).to_json())
        assert set(data) == {"version", "threshold", "entries"}
        assert data["entries"][0]["neighbors"] == [["b", 12.5]]
        assert MapperTable(1, 400, (e,)).to_json().endswith("\n")
