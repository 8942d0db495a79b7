"""Toolkit for building leaderboard-extraction instruction corpora from
LaTeX papers, driving a generation backend, and scoring the output."""

__version__ = "0.1.0"
