"""Store resolution against an all-pairs union-find oracle."""

from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import entity
from corpora import planted_corpus, planted_groups
from oracles import o_partition, o_r2, plain
from sdgate.registry import default_registry
from sdgate.store import EntityStore, r2_pair


def store_partition(store):
    snap = store.snapshot()
    groups = {cid: {cid} for cid in snap.entities}
    for alias, target in snap.aliases.items():
        groups[target].add(alias)
    return sorted((frozenset(g) for g in groups.values()), key=lambda g: sorted(g))


def test_planted_corpus_matches_oracle_and_truth():
    corpus = planted_corpus()
    store = EntityStore(None)
    for ent in corpus:
        store.upsert([ent])
    assert len(store.snapshot()) == 40
    assert store_partition(store) == o_partition([plain(e) for e in corpus]) == planted_groups()


def test_planted_corpus_single_batch():
    store = EntityStore(None)
    store.upsert(planted_corpus(seed=11))
    assert store_partition(store) == planted_groups()


def test_pairwise_r2_agrees_with_oracle():
    corpus = planted_corpus()
    reg = default_registry()
    none = lambda _i: None  # noqa: E731
    for a in corpus:
        for b in corpus:
            if a is not b:
                assert r2_pair(a, b, reg, none, none) == o_r2(plain(a), plain(b)), (a.id, b.id)


# Type families where compatibility is transitive, so incremental resolution
# and connected components must coincide.
FAMILIES = [["Hotel", "LodgingBusiness"], ["Event"], ["TouristAttraction"]]
NAMES = {"sonne": ["Sonne", "SONNE", "sonne!"], "post": ["Hotel Post", "post, hotel", "POST HOTEL"],
         "alm": ["Alm", "alm."]}
PHONES = {"p1": ["+43 1 234", "+43-1-234", "+43 (1) 234"], "p2": ["+43 9 999", "+439999"]}


@st.composite
def corpora(draw):
    n = draw(st.integers(2, 12))
    out = []
    for i in range(n):
        family = draw(st.sampled_from(FAMILIES))
        props = {"name": draw(st.sampled_from(NAMES[draw(st.sampled_from(sorted(NAMES)))]))}
        if draw(st.booleans()):
            props["telephone"] = draw(st.sampled_from(PHONES[draw(st.sampled_from(sorted(PHONES)))]))
        out.append(entity(f"https://e.example/{i}", [draw(st.sampled_from(family))], props, t=float(i + 1)))
    return out


@settings(max_examples=150, deadline=None)
@given(corpora())
def test_random_corpora_match_oracle(corpus):
    store = EntityStore(None)
    for ent in corpus:
        store.upsert([ent])
    assert store_partition(store) == o_partition([plain(e) for e in corpus])
