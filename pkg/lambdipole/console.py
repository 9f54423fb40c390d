"""
Console reporting helpers: stage banners, ✓/✗/⚠ status lines, tagged progress.

Everything is plain print(); warnings go to stderr so CSV on stdout stays clean.
"""

from __future__ import annotations

import sys

WIDTH = 60


def banner(title: str) -> None:
    print("\n" + "=" * WIDTH)
    print(title)
    print("=" * WIDTH)


def step(index: int, total: int, message: str) -> None:
    print(f"\n[{index}/{total}] {message}")


def info(tag: str, message: str) -> None:
    print(f"[{tag}] {message}")


def ok(message: str) -> None:
    print(f"✓ {message}")


def fail(message: str) -> None:
    print(f"✗ {message}")


def warn(message: str) -> None:
    print(f"  ⚠ Warning: {message}", file=sys.stderr)
