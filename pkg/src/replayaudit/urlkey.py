"""SURT-style URL keys.

The key form is ``<reversed,host,labels>[:port])<path>[?<sorted query>]``.
Scheme, userinfo, fragment and the default ports (80 and 443, regardless of
scheme so that http/https variants collide) are dropped.

Percent-encoding is normalized: escapes use uppercase hex, escaped unreserved
characters are decoded, and characters that are not legal in a URL are
escaped. This is close to, but not identical with, the keys written by any
particular archive's CDX indexer.
"""
from __future__ import annotations

import re
import string
from urllib.parse import urlsplit

from .errors import InvalidUrl

_UNRESERVED = frozenset(string.ascii_letters + string.digits + "-._~")
_ALLOWED = _UNRESERVED | frozenset("!$&'()*+,;=:@/?")
_HEX = frozenset(string.hexdigits)
_HOST = re.compile(r"[a-z0-9._\-]+")


def _normalize_escapes(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        ch = text[i]
        if ch == "%" and i + 2 < len(text) and text[i + 1] in _HEX and text[i + 2] in _HEX:
            decoded = chr(int(text[i + 1:i + 3], 16))
            out.append(decoded if decoded in _UNRESERVED else "%" + text[i + 1:i + 3].upper())
            i += 3
            continue
        if ch in _ALLOWED:
            out.append(ch)
        else:
            out.extend(f"%{b:02X}" for b in ch.encode("utf-8", "surrogatepass"))
        i += 1
    return "".join(out)


def _host_key(url: str) -> str:
    try:
        parts = urlsplit(url.strip())
        port = parts.port
    except ValueError as exc:
        raise InvalidUrl(f"{url!r}: {exc}") from None
    if parts.scheme.lower() not in ("http", "https"):
        raise InvalidUrl(f"not an http(s) URL: {url!r}")
    host = (parts.hostname or "").rstrip(".")
    if not host:
        raise InvalidUrl(f"no host in {url!r}")
    if not _HOST.fullmatch(host):
        try:
            host = host.encode("idna").decode("ascii").lower()
        except UnicodeError:
            raise InvalidUrl(f"bad host in {url!r}") from None
        if not _HOST.fullmatch(host):
            raise InvalidUrl(f"bad host in {url!r}")
    key = ",".join(reversed(host.split(".")))
    if port is not None and port not in (80, 443):
        key += f":{port}"
    return key


def canonical_urlkey(url: str) -> str:
    """Return the SURT-style key for an absolute http(s) URL.

    >>> canonical_urlkey("https://WWW.CNN.com/")
    'com,cnn,www)/'
    >>> canonical_urlkey("http://www.cnn.com/?b=2&a=1")
    'com,cnn,www)/?a=1&b=2'
    """
    host = _host_key(url)
    parts = urlsplit(url.strip())
    path = _normalize_escapes(parts.path) or "/"
    if not path.startswith("/"):
        path = "/" + path
    params = sorted(_normalize_escapes(p) for p in parts.query.split("&") if p)
    key = f"{host}){path}"
    if params:
        key += "?" + "&".join(params)
    return key


def urlkey_to_url(key: str, scheme: str = "http") -> str:
    """Expand a key produced by :func:`canonical_urlkey` back into a URL."""
    host, sep, rest = key.partition(")")
    if not sep or not host:
        raise InvalidUrl(f"not a urlkey: {key!r}")
    name, _, port = host.partition(":")
    netloc = ".".join(reversed(name.split(",")))
    if port:
        netloc += ":" + port
    return f"{scheme}://{netloc}{rest}"


def same_resource(a: str, b: str) -> bool:
    try:
        return canonical_urlkey(a) == canonical_urlkey(b)
    except InvalidUrl:
        return False
