"""streamkit: a miniature composable data-pipeline library.

Deliberately small and regular: sources read files into lists, transforms
wrap any iterable lazily, terminals reduce an iterable to a value. Used by
the fixture benchmark so the whole pipeline can run offline.
"""

import json


# --- sources ---------------------------------------------------------------

def read_lines(path):
    """Read a text file into a list of lines without trailing newlines."""
    with open(path, encoding="utf-8") as fh:
        return [line.rstrip("\n") for line in fh]


def read_text(path):
    """Read a whole text file into one string."""
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def read_csv(path):
    """Read a comma-separated file into a list of field lists."""
    return [line.split(",") for line in read_lines(path) if line]


def read_jsonl(path):
    """Read a JSON-lines file into a list of parsed objects."""
    return [json.loads(line) for line in read_lines(path) if line.strip()]


# --- lazy transforms -------------------------------------------------------

class Mapper:
    """Apply a function to every item, lazily."""

    def __init__(self, items, fn):
        self.items = items
        self.fn = fn

    def __iter__(self):
        for item in self.items:
            yield self.fn(item)


class Filter:
    """Keep only items the predicate accepts."""

    def __init__(self, items, predicate):
        self.items = items
        self.predicate = predicate

    def __iter__(self):
        for item in self.items:
            if self.predicate(item):
                yield item


class Batcher:
    """Group items into fixed-size lists; the last batch may be short."""

    def __init__(self, items, size):
        if size < 1:
            raise ValueError("batch size must be >= 1")
        self.items = items
        self.size = size

    def __iter__(self):
        batch = []
        for item in self.items:
            batch.append(item)
            if len(batch) == self.size:
                yield batch
                batch = []
        if batch:
            yield batch


class Taker:
    """Stop after the first n items."""

    def __init__(self, items, n):
        self.items = items
        self.n = n

    def __iter__(self):
        remaining = self.n
        for item in self.items:
            if remaining <= 0:
                return
            yield item
            remaining -= 1


class Skipper:
    """Drop the first n items, then yield the rest."""

    def __init__(self, items, n):
        self.items = items
        self.n = n

    def __iter__(self):
        skipped = 0
        for item in self.items:
            if skipped < self.n:
                skipped += 1
                continue
            yield item


class Enumerator:
    """Pair every item with a running index as (index, item)."""

    def __init__(self, items, start=0):
        self.items = items
        self.start = start

    def __iter__(self):
        index = self.start
        for item in self.items:
            yield index, item
            index += 1


class Zipper:
    """Pair up two iterables; stops at the shorter one."""

    def __init__(self, first, second):
        self.first = first
        self.second = second

    def __iter__(self):
        return zip(iter(self.first), iter(self.second))


class Concater:
    """Yield everything from the first iterable, then the second."""

    def __init__(self, first, second):
        self.first = first
        self.second = second

    def __iter__(self):
        yield from self.first
        yield from self.second


class Cycler:
    """Repeat a materialized iterable a fixed number of times."""

    def __init__(self, items, times):
        self.items = list(items)
        self.times = times

    def __iter__(self):
        for _ in range(self.times):
            yield from self.items


class Sampler:
    """Keep every k-th item, starting with the first."""

    def __init__(self, items, every):
        if every < 1:
            raise ValueError("sampling interval must be >= 1")
        self.items = items
        self.every = every

    def __iter__(self):
        for i, item in enumerate(self.items):
            if i % self.every == 0:
                yield item


class Sorter:
    """Yield items in sorted order; materializes the input."""

    def __init__(self, items, key=None):
        self.items = items
        self.key = key

    def __iter__(self):
        return iter(sorted(self.items, key=self.key))


class Uniquer:
    """Drop duplicates while preserving first-seen order."""

    def __init__(self, items):
        self.items = items

    def __iter__(self):
        seen = set()
        for item in self.items:
            if item not in seen:
                seen.add(item)
                yield item


# --- helpers ---------------------------------------------------------------

def split_fields(line, sep=","):
    """Split one line into trimmed fields."""
    return [field.strip() for field in line.split(sep)]


def pick_field(rows, index):
    """Yield one positional field from every row."""
    for row in rows:
        yield row[index]


def parse_ints(items):
    """Parse every item as a base-10 integer, lazily."""
    for item in items:
        yield int(str(item).strip())


# --- terminals -------------------------------------------------------------

def collect(items):
    """Materialize any iterable into a list."""
    return list(items)


def count(items):
    """Count the items in an iterable."""
    return sum(1 for _ in items)


def sum_numbers(items):
    """Sum numeric items; 0 for an empty iterable."""
    total = 0
    for item in items:
        total += item
    return total


def join_strings(items, sep):
    """Join string items with a separator."""
    return sep.join(items)


def min_max(items):
    """Return (smallest, largest) of a non-empty iterable."""
    values = list(items)
    if not values:
        raise ValueError("min_max needs at least one item")
    return min(values), max(values)


def write_lines(path, items):
    """Write items as lines; returns how many were written."""
    values = [str(item) for item in items]
    with open(path, "w", encoding="utf-8") as fh:
        for value in values:
            fh.write(value + "\n")
    return len(values)


def write_text(path, text):
    """Write one string to a file; returns the character count."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return len(text)
