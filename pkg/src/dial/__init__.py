"""dial: a compiler toolchain for the DIAL diagram language.

Parse ``.dial`` sources, type-check the dataflow against the builtin task
and symbol registries, lint against the house style rules, lay out
deterministically, and render to SVG or TikZ.
"""

__version__ = "0.1.0"
