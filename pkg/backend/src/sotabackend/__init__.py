"""Training and serving for the leaderboard-extraction generation backend."""

__version__ = "0.1.0"
