"""Deterministic synthetic fixtures: a desk-scale stand-in corpus.

Generates label-specific Spanish-flavored comments over a 93-day window,
videos, ground-truth labels, and canned mock-API fixtures, all seeded. The
``entangle_code0`` mode writes label-0 texts with the vocabulary of labels 2
and 5, which reproduces the class-collapse behavior downstream.

Run standalone to materialize a fixture directory:
``python -m polemos.synth --out DIR --seed 7``.
"""
from __future__ import annotations

import argparse
import json
import random
from dataclasses import dataclass, field
from datetime import timedelta
from pathlib import Path

from .corpus import Comment, DEFAULT_WINDOW, StudyWindow, VideoRef
from .textutil import format_rfc3339

QUERY_TERMS = ("Hamás español", "Israel español", "Gaza español", "Palestina español")

FILLERS = [
    "que", "de", "la", "el", "los", "en", "por", "para", "con", "es",
    "una", "ya", "pero", "esto", "eso",
]

EMOJIS = ["🙏", "😢", "❤️", "😡", "✌️", "😔"]

LEXICONS: dict[int, list[str]] = {
    0: [
        "hamas", "terroristas", "secuestraron", "rehenes", "cobardes", "milicianos",
        "liberen", "condeno", "extremistas", "radicales", "atentado", "fanáticos",
        "destruido", "escudos", "humanos", "túneles", "culpable", "banda", "criminales",
        "desarmen", "yihadistas", "asesinos", "infame", "masacraron",
    ],
    1: [
        "netanyahu", "sionistas", "genocidas", "bombardean", "ocupación", "colonos",
        "apartheid", "crímenes", "impunidad", "masacre", "hospitales", "denuncien",
        "bloqueo", "injusticia", "invasores", "opresión", "tribunal", "sanciones",
        "yanquis", "cómplices", "dictador", "vergüenza", "boicot", "ilegal",
    ],
    2: [
        "palestinos", "culpables", "votaron", "celebraban", "víctimas", "mienten",
        "propaganda", "fanatismo", "odian", "intolerantes", "adoctrinados", "atacan",
        "lloran", "mártires", "falsos", "engañan", "victimismo", "radicalizados",
        "aplaudían", "hipócritas", "provocaron", "merecen", "consecuencias", "eligieron",
    ],
    3: [
        "paz", "mundo", "guerra", "camino", "dios", "oremos", "ambos", "bandos",
        "inocentes", "sufren", "humanidad", "tristeza", "diálogo", "acuerdo",
        "esperanza", "hermanos", "civiles", "duele", "pobre", "gente", "señor",
        "bendiga", "todos", "amén",
    ],
    4: [
        "dólar", "economía", "elecciones", "fútbol", "partido", "presidente",
        "gasolina", "clima", "serie", "música", "canal", "noticiero", "presentadora",
        "ucrania", "rusia", "china", "petróleo", "inflación", "saludos", "méxico",
        "colombia", "argentina", "programa", "entrevista",
    ],
    5: [
        "israel", "defiende", "derecho", "defensa", "legítima", "bendiga",
        "democracia", "ejército", "idf", "protege", "ciudadanos", "soberanía",
        "apoyo", "firme", "valiente", "tecnología", "aliado", "shalom",
        "jerusalén", "pueblo", "elegido", "resistir", "seguridad", "fuerza",
    ],
    6: [
        "palestina", "libre", "viva", "gaza", "niños", "justicia", "equidad",
        "solidaridad", "resistencia", "dignidad", "libertad", "humanitaria",
        "refugiados", "franja", "alto", "fuego", "ayuda", "mundo", "despierta",
        "corazón", "fuerza", "hermanos", "inshallah", "🇵🇸",
    ],
}

PUNCT = ["", "!", "!!", ".", "...", "!"]

# Corpus share per label: unrelated and no-stance on top, then the
# pro-Palestinian plurality, mirroring the shape the write-up reports.
LABEL_WEIGHTS = {4: 0.26, 3: 0.20, 6: 0.15, 5: 0.11, 1: 0.10, 2: 0.10, 0: 0.08}

# Per-label volume profile over the seven fortnights: early spike and decay,
# with the anti-Israel category surging in the final (January) stretch.
DEFAULT_PROFILE = [2.3, 2.9, 1.7, 1.3, 1.1, 0.9, 0.8]
BIN_PROFILES = {
    1: [1.3, 1.6, 1.0, 0.9, 1.0, 1.0, 2.4],
    6: [2.6, 3.1, 1.8, 1.3, 1.0, 0.9, 0.55],
}

LIKE_MEANS = {0: 3.0, 1: 5.0, 2: 9.0, 3: 2.0, 4: 1.0, 5: 11.0, 6: 4.0}


@dataclass
class SynthConfig:
    seed: int = 20231007
    n_comments: int = 5000
    n_videos: int = 12
    comments_per_video: int | None = None  # exact mode; overrides n_comments
    window: StudyWindow = field(default_factory=lambda: DEFAULT_WINDOW)
    entangle_code0: bool = False
    dirt: bool = True
    disabled_videos: int = 0


@dataclass
class SynthData:
    videos: list[VideoRef]
    comments: list[Comment]  # enabled videos only, generation order
    truth: dict[str, int]
    queries: tuple[str, ...]
    disabled_video_ids: list[str]
    window: StudyWindow

    def by_video(self) -> dict[str, list[Comment]]:
        grouped: dict[str, list[Comment]] = {v.video_id: [] for v in self.videos}
        for comment in self.comments:
            grouped[comment.video_id].append(comment)
        return grouped


def _pick_label(rng: random.Random) -> int:
    roll = rng.random()
    acc = 0.0
    for code, weight in LABEL_WEIGHTS.items():
        acc += weight
        if roll < acc:
            return code
    return 4


def _free_text(rng: random.Random, code: int) -> str:
    lexicon = LEXICONS[code]
    words = rng.sample(lexicon, k=rng.randint(3, 7))
    for _ in range(rng.randint(0, 2)):
        words.insert(rng.randrange(len(words) + 1), rng.choice(FILLERS))
    text = " ".join(words)
    text = text[0].upper() + text[1:]
    text += rng.choice(PUNCT)
    if rng.random() < 0.15:
        text += " " + rng.choice(EMOJIS)
    return text


def _phrase_pool(rng: random.Random, code: int, atoms: int = 4, length: int = 5) -> list[str]:
    """Fixed phrases: a shared anchor word plus disjoint word groups.

    The anchor recurs in every phrase of the pool, so its feature weight
    reflects the pool's aggregate label counts; the remaining groups are
    disjoint high-multiplicity atoms. Both properties keep per-phrase label
    ratios close to their expectation, which is what lets the majority label
    win every phrase.
    """
    words = rng.sample(LEXICONS[code], k=atoms * length + 1)
    anchor = words[0]
    rest = words[1:]
    pool = []
    for i in range(atoms):
        group = rest[i * length : (i + 1) * length]
        text = " ".join([anchor] + group)
        pool.append(text[0].upper() + text[1:] + rng.choice(PUNCT))
    return pool


class _TextFactory:
    """Entangled mode reuses fixed label-2/5 phrases verbatim for labels 2,
    5 and 0, so the anti-Hamás class carries no wording of its own.

    Pooled phrases are emitted round-robin: per-phrase corpus counts stay
    even, keeping the 0-vs-source count ratio near its expectation wherever
    the annotation quota samples.
    """

    def __init__(self, rng: random.Random, entangled: bool):
        self.entangled = entangled
        if entangled:
            self.pools = {2: _phrase_pool(rng, 2), 5: _phrase_pool(rng, 5)}
            self.pools[0] = self.pools[2] + self.pools[5]
            self._cursor = {0: 0, 2: 0, 5: 0}

    def text(self, rng: random.Random, code: int) -> str:
        if self.entangled and code in (0, 2, 5):
            pool = self.pools[code]
            phrase = pool[self._cursor[code] % len(pool)]
            self._cursor[code] += 1
            return phrase
        return _free_text(rng, code)


def _timestamp(rng: random.Random, code: int, window: StudyWindow):
    profile = BIN_PROFILES.get(code, DEFAULT_PROFILE)
    total_days = (window.end - window.start).days
    n_bins = (total_days + 13) // 14
    weights = profile[:n_bins]
    bin_idx = rng.choices(range(len(weights)), weights=weights)[0]
    bin_start = window.start + timedelta(days=14 * bin_idx)
    bin_len = min(timedelta(days=14), window.end - bin_start)
    return bin_start + timedelta(seconds=rng.randrange(int(bin_len.total_seconds())))


def _likes(rng: random.Random, code: int) -> int:
    return min(int(rng.expovariate(1.0 / LIKE_MEANS[code])), 5000)


def make_corpus(cfg: SynthConfig) -> SynthData:
    rng = random.Random(cfg.seed)
    videos: list[VideoRef] = []
    for i in range(cfg.n_videos):
        videos.append(
            VideoRef(
                video_id=f"v{i:03d}",
                title=f"Cobertura del conflicto, parte {i + 1}",
                channel=rng.choice(["NoticiasYa", "MundoHoy", "CanalInforma", "PrensaLibre24"]),
                matched_query=QUERY_TERMS[i % len(QUERY_TERMS)],
                published_at=cfg.window.start + timedelta(days=rng.randrange(30)),
            )
        )
    disabled_ids = [v.video_id for v in videos[: cfg.disabled_videos]]
    enabled = [v for v in videos if v.video_id not in disabled_ids]

    comments: list[Comment] = []
    truth: dict[str, int] = {}
    factory = _TextFactory(rng, cfg.entangle_code0)
    serial = 0

    def next_id() -> str:
        nonlocal serial
        serial += 1
        return f"c{serial:06d}"

    if cfg.comments_per_video is not None:
        plan = [(video, cfg.comments_per_video) for video in enabled]
    else:
        base = cfg.n_comments // max(len(enabled), 1)
        plan = [(video, base + (1 if i < cfg.n_comments % len(enabled) else 0)) for i, video in enumerate(enabled)]

    for video, count in plan:
        for _ in range(count):
            code = _pick_label(rng)
            comment = Comment(
                comment_id=next_id(),
                author=f"user{rng.randrange(2500)}",
                published_at=_timestamp(rng, code, cfg.window),
                like_count=_likes(rng, code),
                text=factory.text(rng, code),
                video_id=video.video_id,
                is_public=True,
            )
            comments.append(comment)
            truth[comment.comment_id] = code

    if cfg.dirt and enabled:
        n = len(comments)
        dirty: list[Comment] = []
        for _ in range(max(1, n // 50)):  # empty texts
            dirty.append(
                Comment(next_id(), f"user{rng.randrange(2500)}",
                        _timestamp(rng, 3, cfg.window), 0, "",
                        rng.choice(enabled).video_id)
            )
        for _ in range(max(1, n // 50)):  # emoji-only, no referential text
            dirty.append(
                Comment(next_id(), f"user{rng.randrange(2500)}",
                        _timestamp(rng, 3, cfg.window), rng.randrange(3),
                        "".join(rng.choices(["😂", "🙏", "❤️", "🔥"], k=rng.randint(1, 4))),
                        rng.choice(enabled).video_id)
            )
        for _ in range(max(1, n // 70)):  # published before the window
            dirty.append(
                Comment(next_id(), f"user{rng.randrange(2500)}",
                        cfg.window.start - timedelta(days=rng.randint(1, 40), seconds=rng.randrange(86400)),
                        rng.randrange(5),
                        " ".join(rng.sample(LEXICONS[4], k=4)),
                        rng.choice(enabled).video_id)
            )
        for _ in range(max(1, n // 70)):  # cross-capture duplicates
            src = rng.choice(comments)
            dirty.append(
                Comment(next_id(), src.author, src.published_at, src.like_count,
                        src.text, src.video_id)
            )
        comments.extend(dirty)

    return SynthData(
        videos=videos,
        comments=comments,
        truth=truth,
        queries=QUERY_TERMS,
        disabled_video_ids=disabled_ids,
        window=cfg.window,
    )


# ---------------------------------------------------------------------------
# Fixture materialization


def _video_item(video: VideoRef) -> dict:
    return {
        "id": {"videoId": video.video_id},
        "snippet": {
            "title": video.title,
            "channelTitle": video.channel,
            "publishedAt": format_rfc3339(video.published_at),
        },
    }


def _comment_item(comment: Comment) -> dict:
    return {
        "id": comment.comment_id,
        "snippet": {
            "isPublic": comment.is_public,
            "topLevelComment": {
                "snippet": {
                    "authorDisplayName": comment.author,
                    "publishedAt": format_rfc3339(comment.published_at),
                    "likeCount": comment.like_count,
                    "textDisplay": comment.text,
                    "videoId": comment.video_id,
                }
            },
        },
    }


def write_mock_fixture(
    data: SynthData,
    out_dir: Path,
    thread_page_size: int = 100,
    search_page_size: int = 50,
) -> dict:
    """Write search.json + commentThreads.json; returns exact totals."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    # every video matches its own query term; every third video matches a
    # second term so cross-query dedup has something to do
    matches: dict[str, list[VideoRef]] = {term: [] for term in data.queries}
    for i, video in enumerate(data.videos):
        matches[data.queries[i % len(data.queries)]].append(video)
        if i % 3 == 0:
            matches[data.queries[(i + 1) % len(data.queries)]].append(video)

    search_entries: list[dict] = []
    search_pages: dict[str, int] = {}
    for qi, term in enumerate(data.queries):
        videos = matches[term]
        pages = [videos[i : i + search_page_size] for i in range(0, len(videos), search_page_size)] or [[]]
        search_pages[term] = len(pages)
        token = None
        for pi, page in enumerate(pages):
            response = {"items": [_video_item(v) for v in page]}
            if pi + 1 < len(pages):
                response["nextPageToken"] = f"s{qi}p{pi + 1}"
            search_entries.append(
                {"params": {"q": term, "pageToken": token}, "response": response}
            )
            token = f"s{qi}p{pi + 1}"

    by_video = data.by_video()
    thread_entries: list[dict] = []
    thread_pages = 0
    for video in data.videos:
        if video.video_id in data.disabled_video_ids:
            thread_entries.append(
                {
                    "params": {"videoId": video.video_id},
                    "status": 403,
                    "response": {"error": {"errors": [{"reason": "commentsDisabled"}]}},
                }
            )
            continue
        ordered = sorted(by_video[video.video_id], key=lambda c: (c.published_at, c.comment_id))
        pages = [ordered[i : i + thread_page_size] for i in range(0, len(ordered), thread_page_size)] or [[]]
        thread_pages += len(pages)
        token = None
        for pi, page in enumerate(pages):
            response = {"items": [_comment_item(c) for c in page]}
            if pi + 1 < len(pages):
                response["nextPageToken"] = f"{video.video_id}p{pi + 1}"
            thread_entries.append(
                {"params": {"videoId": video.video_id, "pageToken": token}, "response": response}
            )
            token = f"{video.video_id}p{pi + 1}"

    (out_dir / "search.json").write_text(
        json.dumps(search_entries, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )
    (out_dir / "commentThreads.json").write_text(
        json.dumps(thread_entries, ensure_ascii=False, indent=1) + "\n", encoding="utf-8"
    )

    return {
        "videos": len(data.videos),
        "disabled": list(data.disabled_video_ids),
        "comments": len(data.comments),
        "thread_pages": thread_pages,
        # a disabled video still costs one probe request before the 403
        "thread_requests": thread_pages + len(data.disabled_video_ids),
        "search_pages": search_pages,
    }


def write_truth(data: SynthData, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for cid, code in data.truth.items():
            f.write(json.dumps({"comment_id": cid, "code": code}) + "\n")


def load_truth(path: Path) -> dict[str, int]:
    truth: dict[str, int] = {}
    with Path(path).open("r", encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if line:
                rec = json.loads(line)
                truth[rec["comment_id"]] = int(rec["code"])
    return truth


def write_corpus_jsonl(data: SynthData, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as f:
        for comment in data.comments:
            f.write(json.dumps(comment.to_record(), ensure_ascii=False) + "\n")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Generate a synthetic fixture directory")
    parser.add_argument("--out", required=True)
    parser.add_argument("--seed", type=int, default=20231007)
    parser.add_argument("--comments", type=int, default=5000)
    parser.add_argument("--videos", type=int, default=12)
    parser.add_argument("--disabled", type=int, default=0)
    parser.add_argument("--entangle-code0", action="store_true")
    args = parser.parse_args(argv)
    cfg = SynthConfig(
        seed=args.seed,
        n_comments=args.comments,
        n_videos=args.videos,
        disabled_videos=args.disabled,
        entangle_code0=args.entangle_code0,
    )
    data = make_corpus(cfg)
    out = Path(args.out)
    manifest = write_mock_fixture(data, out / "mock_api")
    write_truth(data, out / "truth.jsonl")
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    print(json.dumps(manifest, indent=2))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
