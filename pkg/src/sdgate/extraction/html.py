from __future__ import annotations

from bs4 import BeautifulSoup, Tag


def parse_html(html: str | bytes | BeautifulSoup) -> BeautifulSoup:
    # html5lib applies the browser tree-construction algorithm, so broken
    # markup recovers the same way it would in a user agent.
    if isinstance(html, BeautifulSoup):
        return html
    return BeautifulSoup(html, "html5lib")


def text_content(el: Tag) -> str:
    return " ".join(el.get_text().split())


def describe(el: Tag) -> str:
    ident = el.get("id")
    return f"<{el.name}#{ident}>" if ident else f"<{el.name}>@{el.sourceline or '?'}"


def tokens(value) -> list[str]:
    if value is None:
        return []
    if isinstance(value, list):
        value = " ".join(value)
    return value.split()
