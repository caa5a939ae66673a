"""Duplication forensics for peer-review comments.

Detects copied and near-copied text across referee comments, assembles an
evidence graph of reviewer accounts, and ranks accounts for investigation.
"""

__version__ = "0.1.0"
