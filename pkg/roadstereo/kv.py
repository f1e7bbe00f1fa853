from __future__ import annotations

import re
from collections.abc import Iterable

from roadstereo.errors import FormatError

KV_RE = re.compile(r'^\s*(?P<key>[A-Za-z_][A-Za-z0-9_]*)\s*=\s*(?P<value>.*?)\s*$')


def parse_kv(s: str, *, source: str = '<string>') -> list[tuple[str, str]]:
    """parse flat `key = value` lines, `#` starts a comment

    keys may repeat, order is preserved
    """
    ret = []
    for lineno, line in enumerate(s.splitlines(), start=1):
        line = line.partition('#')[0]
        if not line.strip():
            continue
        match = KV_RE.match(line)
        if match is None:
            raise FormatError(f'{source}:{lineno}: expected key = value')
        ret.append((match['key'], match['value']))
    return ret


def format_kv(items: Iterable[tuple[str, object]]) -> str:
    return ''.join(f'{k} = {v}\n' for k, v in items)


def as_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise FormatError(f'{key}: expected a number, got {value!r}')


def as_int(key: str, value: str) -> int:
    try:
        return int(value)
    except ValueError:
        raise FormatError(f'{key}: expected an integer, got {value!r}')
