"""Harvest schema.org annotations from websites and republish them through an action-aware API."""

import logging

logging.getLogger("sdgate").addHandler(logging.NullHandler())

__version__ = "0.1.0"
