"""Shared record of acceptance outcomes, printed at the end of the session."""

RESULTS: list[tuple[int, str, bool, str]] = []
