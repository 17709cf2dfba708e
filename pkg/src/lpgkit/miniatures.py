"""Small seeded graphs shaped like the citation, academic and Twitter datasets.

They carry the same labels and property keys as their full-size namesakes
but are generated, not sampled, so they are only good for plumbing tests:
loaders, stats, schema inference and the CLI.
"""

from __future__ import annotations

import numpy as np

from .graph import Edge, PropertyGraph, Vertex

_WORDS = (
    "graph", "neural", "network", "label", "property", "query", "index", "learning",
    "sparse", "vector", "model", "database", "embedding", "cluster", "stream", "schema",
)


def _phrase(rng: np.random.Generator, k: int) -> str:
    return " ".join(rng.choice(_WORDS, size=k))


class _Builder:
    def __init__(self, directed: bool):
        self.graph = PropertyGraph(directed=directed)
        self._next_edge = 0

    def vertex(self, labels, props) -> int:
        vid = self.graph.n
        self.graph.add_vertex(Vertex(vid, labels, props))
        return vid

    def edge(self, src: int, dst: int, label: str, props=None) -> None:
        self.graph.add_edge(Edge(self._next_edge, src, dst, [label], props or {}))
        self._next_edge += 1


def citations_miniature(n_articles: int = 40, seed: int = 0) -> PropertyGraph:
    """Authors, articles and venues; articles may carry ``ncitations``."""
    rng = np.random.default_rng(seed)
    b = _Builder(directed=True)
    venues = [b.vertex(["venue"], {"name": [f"venue {i}"]}) for i in range(max(1, n_articles // 20))]
    authors = [b.vertex(["author"], {"name": [f"author {i}"]}) for i in range(max(2, n_articles * 3 // 2))]
    articles = []
    for i in range(n_articles):
        props = {
            "index": [f"{int(rng.integers(0, 2**63)):016x}{int(rng.integers(0, 2**63)):016x}"],
            "title": [_phrase(rng, 4)],
            "year": [int(rng.integers(1990, 2021))],
            "keywords": sorted({str(w) for w in rng.choice(_WORDS, size=3)}),
        }
        if rng.random() < 0.85:
            props["abstract"] = [_phrase(rng, 12)]
        if rng.random() < 0.72:
            props["ncitations"] = [int(rng.poisson(8))]
        art = b.vertex(["article"], props)
        articles.append(art)
        for a in rng.choice(authors, size=int(rng.integers(1, 4)), replace=False):
            b.edge(art, int(a), "author")
        b.edge(art, int(rng.choice(venues)), "venue")
        for cited in articles[:-1]:
            if rng.random() < 2.0 / max(1, len(articles)):
                b.edge(art, cited, "cited")
    return b.graph.freeze()


def makg_miniature(n_papers: int = 40, seed: int = 0) -> PropertyGraph:
    """Papers with a sub-type label, authors, affiliations, fields and journals."""
    rng = np.random.default_rng(seed)
    b = _Builder(directed=True)

    def entity(label: str, i: int) -> int:
        return b.vertex([label], {
            "rank": [int(rng.integers(1, 30000))],
            "name": [f"{label} {i}"],
            "papercount": [int(rng.integers(1, 500))],
            "citationcount": [int(rng.integers(0, 5000))],
            "created": ["2016-06-24"],
        })

    fields = [entity("fieldofstudy", i) for i in range(4)]
    journals = [entity("journal", i) for i in range(2)]
    affiliations = [entity("affiliation", i) for i in range(3)]
    authors = [entity("author", i) for i in range(n_papers)]
    for a in authors:
        b.edge(a, int(rng.choice(affiliations)), "memberof")
    subtypes = ("journalpaper", "conferencepaper", "book", "bookchapter", "patentdocument", "others")
    papers = []
    for i in range(n_papers):
        area = int(rng.integers(0, len(fields)))
        props = {
            "rank": [int(rng.integers(1, 30000))],
            "citationcount": [int(rng.integers(0, 300))],
            "created": ["2016-06-24"],
            "title": [_phrase(rng, 5)],
            "publicationdate": [f"{int(rng.integers(1990, 2021))}-01-01"],
            "referencecount": [int(rng.integers(0, 60))],
            "estimatedcitationcount": [float(rng.gamma(2.0, 10.0))],
            "area": [area],
            "fieldscores": [[float(x) for x in np.round(rng.dirichlet(np.ones(4)), 6)]],
            "openaccess": [bool(rng.random() < 0.3)],
        }
        if rng.random() < 0.5:
            props["publisher"] = [f"publisher {int(rng.integers(0, 3))}"]
        p = b.vertex(["paper", str(rng.choice(subtypes))], props)
        papers.append(p)
        b.edge(p, fields[area], "hasdiscipline")
        b.edge(authors[i], p, "creator")
        if rng.random() < 0.5:
            b.edge(p, int(rng.choice(journals)), "appearsinjournal")
        for cited in papers[:-1]:
            if rng.random() < 2.0 / len(papers):
                b.edge(p, cited, "cites")
    return b.graph.freeze()


def twitter_miniature(n_tweets: int = 60, seed: int = 0) -> PropertyGraph:
    """Tweets, users, troll users, hashtags, urls and sources."""
    rng = np.random.default_rng(seed)
    b = _Builder(directed=True)
    hashtags = [b.vertex(["hashtag"], {"tag": [w]}) for w in _WORDS[:5]]
    urls = [b.vertex(["url"], {"expandedurl": [f"https://example.org/{i}"]}) for i in range(4)]
    sources = [b.vertex(["source"], {"name": [s]}) for s in ("web", "android")]
    users = [b.vertex(["user"], {"userkey": [f"u{i}"]}) for i in range(4)]
    trolls = []
    for i in range(6):
        props = {"sourcename": [f"troll{i}"], "userkey": [f"t{i}"]}
        if rng.random() < 0.8:
            props.update({
                "lang": [str(rng.choice(["en", "ru", "de"]))],
                "verified": [bool(rng.random() < 0.1)],
                "followerscount": [int(rng.integers(0, 20000))],
                "friendscount": [int(rng.integers(0, 2000))],
                "statusescount": [int(rng.integers(0, 9000))],
                "description": [_phrase(rng, 6)],
            })
        trolls.append(b.vertex(["user", "trolluser"], props))
    tweets = []
    for i in range(n_tweets):
        props = {"createdat": [f"2016-{int(rng.integers(1, 13)):02d}-01"], "text": [_phrase(rng, 8)]}
        if rng.random() < 0.25:
            props.update({
                "favoritecount": [int(rng.integers(0, 50))],
                "retweetcount": [int(rng.poisson(3))],
                "retweeted": [bool(rng.random() < 0.5)],
            })
        t = b.vertex(["tweet"], props)
        tweets.append(t)
        b.edge(int(rng.choice(trolls)), t, "posted")
        b.edge(t, int(rng.choice(sources)), "postedvia")
        for h in rng.choice(hashtags, size=int(rng.integers(0, 3)), replace=False):
            b.edge(t, int(h), "hastag")
        if rng.random() < 0.3:
            b.edge(t, int(rng.choice(users)), "mentions")
        if rng.random() < 0.2:
            b.edge(t, int(rng.choice(urls)), "haslink")
        if len(tweets) > 1 and rng.random() < 0.1:
            b.edge(t, int(rng.choice(tweets[:-1])), "retweeted")
    return b.graph.freeze()


MINIATURES = {
    "citations": citations_miniature,
    "makg": makg_miniature,
    "twitter": twitter_miniature,
}
