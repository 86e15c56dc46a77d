"""URL canonicalization and registrable-domain helpers shared by identity and counterpart."""

from __future__ import annotations

import re
from functools import lru_cache
from urllib.parse import parse_qsl, urlencode, urlsplit, urlunsplit

import tldextract

# Offline extractor: uses the public-suffix snapshot shipped with tldextract,
# never fetches a fresh list.
_EXTRACT = tldextract.TLDExtract(suffix_list_urls=(), cache_dir=None)
PSL_SNAPSHOT = f"tldextract-{tldextract.__version__}"

TRACKING_PARAMS = frozenset({"ref", "tag"})

# Shared hosting and the marketplace itself cannot vouch for a developer.
DEFAULT_DOMAIN_DENYLIST = frozenset(
    {
        "amazonaws.com",
        "cloudfront.net",
        "amazon.com",
        "azurewebsites.net",
        "blogspot.com",
        "cloudflare.net",
        "firebaseapp.com",
        "github.io",
        "githubusercontent.com",
        "google.com",
        "googleusercontent.com",
        "herokuapp.com",
        "netlify.app",
        "sites.google.com",
        "squarespace.com",
        "weebly.com",
        "wix.com",
        "wixsite.com",
        "wordpress.com",
    }
)

SKILL_PAGE_HOSTS = frozenset({"amazon.com", "www.amazon.com", "alexa.amazon.com"})
SKILL_PAGE_PATH = re.compile(r"(?:^|/)dp/[A-Z0-9]{10}(?:/|$)", re.IGNORECASE)


def _is_tracking(key: str) -> bool:
    key = key.lower()
    return key.startswith("utm_") or key in TRACKING_PARAMS


def canonicalize_url(url: str) -> str:
    """Lower-case scheme and host, drop fragment, tracking params and trailing slash."""
    parts = urlsplit(url.strip())
    if not parts.scheme or not parts.netloc:
        raise ValueError(f"not an absolute URL: {url!r}")
    query = urlencode([(k, v) for k, v in parse_qsl(parts.query, keep_blank_values=True)
                       if not _is_tracking(k)])
    path = parts.path.rstrip("/")
    return urlunsplit((parts.scheme.lower(), parts.netloc.lower(), path, query, ""))


@lru_cache(maxsize=65536)
def root_domain(url_or_host: str) -> str:
    """Registrable root domain (eTLD+1) of a URL or bare host name.

    Returns an empty string when no registrable domain exists (IP addresses,
    bare public suffixes, unparseable input).
    """
    text = url_or_host.strip()
    host = urlsplit(text).hostname if "://" in text else text.split("/")[0]
    if not host:
        return ""
    return _EXTRACT(host.lower()).top_domain_under_public_suffix


def is_skill_page(url: str, hosts=SKILL_PAGE_HOSTS) -> bool:
    """True for marketplace listing URLs such as ``amazon.com/<slug>/dp/<ASIN>``."""
    try:
        parts = urlsplit(url)
    except ValueError:
        return False
    if (parts.hostname or "") not in hosts:
        return False
    return bool(SKILL_PAGE_PATH.search(parts.path) or SKILL_PAGE_PATH.search(parts.fragment))
