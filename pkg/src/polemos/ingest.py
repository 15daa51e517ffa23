"""Client for the video-platform data API: search, comment threads, quota.

The wire shape mirrors the platform's v3 JSON API (``search`` and
``commentThreads`` endpoints with ``pageToken`` pagination). The base URL is
configurable so the whole module runs against a local mock server in tests;
the API key comes from the ``PLATFORM_API_KEY`` environment variable.
"""
from __future__ import annotations

import logging
import os
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime

import requests

from .corpus import Comment, CorpusStore, VideoRef
from .errors import ApiError, CommentsDisabled, QuotaExceeded, TransientFailure
from .textutil import format_rfc3339, parse_rfc3339

logger = logging.getLogger(__name__)

SEARCH_PAGE_SIZE = 50
THREAD_PAGE_SIZE = 100


@dataclass(frozen=True)
class SearchQuery:
    term: str
    published_after: datetime
    published_before: datetime
    max_videos: int = 50

    def __post_init__(self):
        if not self.term:
            raise ValueError("query term must be non-empty")
        if self.published_after >= self.published_before:
            raise ValueError("published_after must precede published_before")
        if self.max_videos <= 0:
            raise ValueError("max_videos must be positive")


@dataclass
class QuotaBudget:
    units_total: int = 10_000
    units_spent: int = 0
    cost_per_search: int = 100
    cost_per_thread_page: int = 1

    def __post_init__(self):
        self._lock = threading.Lock()

    def can_afford(self, cost: int) -> bool:
        with self._lock:
            return self.units_spent + cost <= self.units_total

    def debit(self, cost: int) -> None:
        with self._lock:
            if self.units_spent + cost > self.units_total:
                raise QuotaExceeded(
                    f"budget exhausted: {self.units_spent}/{self.units_total} spent, next call costs {cost}"
                )
            self.units_spent += cost


@dataclass
class IngestReport:
    videos_found: int = 0
    videos_with_comments_disabled: int = 0
    comments_fetched: int = 0
    pages_fetched: int = 0  # comment-thread pages
    search_pages_fetched: int = 0
    quota_spent: int = 0
    errors: list[tuple[str, str]] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "videos_found": self.videos_found,
            "videos_with_comments_disabled": self.videos_with_comments_disabled,
            "comments_fetched": self.comments_fetched,
            "pages_fetched": self.pages_fetched,
            "search_pages_fetched": self.search_pages_fetched,
            "quota_spent": self.quota_spent,
            "errors": [list(e) for e in self.errors],
        }


class YouTubeClient:
    """Thin HTTP wrapper with bounded retries on transport errors and 5xx."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        session: requests.Session | None = None,
        retries: int = 3,
        backoff_base: float = 1.0,
        timeout: float = 30.0,
    ):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key if api_key is not None else os.environ.get("PLATFORM_API_KEY", "")
        self.session = session or requests.Session()
        self.retries = retries
        self.backoff_base = backoff_base
        self.timeout = timeout

    def _get(self, endpoint: str, params: dict) -> dict:
        url = f"{self.base_url}/{endpoint}"
        merged = dict(params)
        if self.api_key:
            merged["key"] = self.api_key
        attempt = 0
        while True:
            try:
                resp = self.session.get(url, params=merged, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                if attempt >= self.retries:
                    raise TransientFailure(f"{endpoint}: {exc}")
                self._sleep(attempt)
                attempt += 1
                continue
            if resp.status_code >= 500:
                if attempt >= self.retries:
                    raise TransientFailure(f"{endpoint}: HTTP {resp.status_code}")
                self._sleep(attempt)
                attempt += 1
                continue
            if resp.status_code == 403 and _reason(resp) == "commentsDisabled":
                raise CommentsDisabled(params.get("videoId", ""))
            if resp.status_code == 403 and _reason(resp) == "quotaExceeded":
                raise QuotaExceeded(f"{endpoint}: server-side quota exceeded")
            if resp.status_code >= 400:
                raise ApiError(f"{endpoint}: HTTP {resp.status_code}: {resp.text[:200]}")
            return resp.json()

    def _sleep(self, attempt: int) -> None:
        delay = self.backoff_base * (2 ** attempt)
        if delay > 0:
            time.sleep(delay)

    def search_page(self, query: SearchQuery, page_token: str | None, page_size: int) -> dict:
        params = {
            "part": "snippet",
            "type": "video",
            "q": query.term,
            "publishedAfter": format_rfc3339(query.published_after),
            "publishedBefore": format_rfc3339(query.published_before),
            "maxResults": page_size,
        }
        if page_token:
            params["pageToken"] = page_token
        return self._get("search", params)

    def comment_threads_page(self, video_id: str, page_token: str | None, page_size: int) -> dict:
        params = {
            "part": "snippet",
            "videoId": video_id,
            "maxResults": page_size,
            "textFormat": "plainText",
            "order": "time",
        }
        if page_token:
            params["pageToken"] = page_token
        return self._get("commentThreads", params)


def _reason(resp: requests.Response) -> str:
    try:
        payload = resp.json()
        return payload["error"]["errors"][0]["reason"]
    except Exception:
        return ""


def _video_from_item(item: dict, query: SearchQuery) -> VideoRef:
    vid = item["id"]["videoId"] if isinstance(item["id"], dict) else str(item["id"])
    snippet = item.get("snippet", {})
    return VideoRef(
        video_id=vid,
        title=snippet.get("title", ""),
        channel=snippet.get("channelTitle", ""),
        matched_query=query.term,
        published_at=parse_rfc3339(snippet.get("publishedAt", "1970-01-01T00:00:00Z")),
    )


def _comment_from_item(item: dict) -> Comment:
    snippet = item["snippet"]["topLevelComment"]["snippet"]
    return Comment(
        comment_id=str(item["id"]),
        author=str(snippet.get("authorDisplayName", "")),
        published_at=parse_rfc3339(snippet["publishedAt"]),
        like_count=int(snippet.get("likeCount", 0)),
        text=str(snippet.get("textDisplay", snippet.get("textOriginal", ""))),
        video_id=str(snippet.get("videoId", "")),
        is_public=bool(item["snippet"].get("isPublic", True)),
    )


def search_videos(
    query: SearchQuery,
    api: YouTubeClient,
    budget: QuotaBudget,
    page_size: int = SEARCH_PAGE_SIZE,
    pages_counter: list | None = None,
) -> list[VideoRef]:
    """Page through search results until max_videos or the tokens run out.

    Each page debits the search cost up front; an unaffordable page raises
    QuotaExceeded carrying the videos gathered so far.
    """
    videos: list[VideoRef] = []
    token: str | None = None
    while len(videos) < query.max_videos:
        try:
            budget.debit(budget.cost_per_search)
        except QuotaExceeded:
            raise QuotaExceeded(
                f"search for {query.term!r} needs {budget.cost_per_search} units",
                partial=videos,
            )
        if pages_counter is not None:
            pages_counter.append(1)
        page = api.search_page(query, token, min(page_size, query.max_videos - len(videos)))
        for item in page.get("items", []):
            videos.append(_video_from_item(item, query))
            if len(videos) >= query.max_videos:
                break
        token = page.get("nextPageToken")
        if not token:
            break
    return videos


def fetch_comment_threads(
    video_id: str,
    api: YouTubeClient,
    budget: QuotaBudget,
    page_size: int = THREAD_PAGE_SIZE,
    errors: list[tuple[str, str]] | None = None,
    pages_counter: list | None = None,
):
    """Yield all top-level comments for a video in API page order.

    Malformed items are rejected, recorded in ``errors``, and the stream
    continues. CommentsDisabled propagates to the caller; QuotaExceeded is
    raised with comments-so-far already yielded.
    """
    token: str | None = None
    while True:
        budget.debit(budget.cost_per_thread_page)
        if pages_counter is not None:
            pages_counter.append(1)
        page = api.comment_threads_page(video_id, token, page_size)
        for item in page.get("items", []):
            try:
                yield _comment_from_item(item)
            except (KeyError, ValueError, TypeError) as exc:
                if errors is not None:
                    errors.append((video_id, f"malformed_item: {exc}"))
                logger.warning("rejected malformed comment item on %s: %s", video_id, exc)
        token = page.get("nextPageToken")
        if not token:
            return


def ingest(
    queries: list[SearchQuery],
    api: YouTubeClient,
    store: CorpusStore,
    budget: QuotaBudget,
    videos_out: list[VideoRef] | None = None,
    concurrency: int = 4,
    allowlist: set[str] | None = None,
) -> IngestReport:
    """Search every query, dedupe videos across queries, fetch all comment
    threads, and append to the store. Exact counters; per-video errors are
    aggregated and only storage failure aborts. An allowlist, when given,
    restricts fetching to hand-curated video ids."""
    report = IngestReport()
    report_lock = threading.Lock()
    seen_videos: dict[str, VideoRef] = {}
    initial_spend = budget.units_spent

    search_pages: list = []
    for query in queries:
        try:
            found = search_videos(query, api, budget, pages_counter=search_pages)
        except QuotaExceeded as exc:
            found = list(exc.partial)
            report.errors.append(("", f"quota_exceeded_search: {query.term}"))
            logger.warning("search quota exhausted on %r", query.term)
        except (TransientFailure, ApiError) as exc:
            found = []
            report.errors.append(("", f"search_failed: {query.term}: {exc}"))
            logger.warning("search failed on %r: %s", query.term, exc)
        for video in found:
            if allowlist is not None and video.video_id not in allowlist:
                continue
            seen_videos.setdefault(video.video_id, video)
    report.search_pages_fetched = len(search_pages)
    report.videos_found = len(seen_videos)
    if videos_out is not None:
        videos_out.extend(seen_videos.values())

    def fetch_one(video: VideoRef) -> None:
        page_counter: list = []
        item_errors: list[tuple[str, str]] = []
        comments: list[Comment] = []
        disabled = False
        failed_kind = ""
        try:
            for comment in fetch_comment_threads(
                video.video_id, api, budget, errors=item_errors, pages_counter=page_counter
            ):
                comments.append(comment)
        except CommentsDisabled:
            disabled = True
        except QuotaExceeded:
            failed_kind = "quota_exceeded"
        except TransientFailure as exc:
            failed_kind = f"transient_failure: {exc}"
        except ApiError as exc:
            failed_kind = f"api_error: {exc}"
        accepted = store.append_comments(comments) if comments else 0
        with report_lock:
            report.pages_fetched += len(page_counter)
            report.comments_fetched += accepted
            report.errors.extend(item_errors)
            if disabled:
                report.videos_with_comments_disabled += 1
                report.errors.append((video.video_id, "comments_disabled"))
            if failed_kind:
                report.errors.append((video.video_id, failed_kind))

    videos = list(seen_videos.values())
    if concurrency <= 1 or len(videos) <= 1:
        for video in videos:
            fetch_one(video)
    else:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            list(pool.map(fetch_one, videos))

    report.quota_spent = budget.units_spent - initial_spend
    return report
