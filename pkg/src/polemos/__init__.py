"""polemos: controversy mapping from platform comments.

Pipeline: ingest comments from a video-platform API, clean them, sample for
human stance annotation, train and gate a 7-category stance classifier,
classify the corpus, and report counts, fortnight trends, lead changes, and
per-category like affinity.
"""

__version__ = "0.1.0"
