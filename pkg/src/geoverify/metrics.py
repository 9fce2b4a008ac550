"""Surface-similarity metrics over scripts and rendered images.

Code metrics operate on the command/identifier/number/delimiter token stream.
Edit distance and the weighted-overlap score run on a *normalized* stream
(whitespace is gone after tokenization; numbers are canonicalized to their
shortest round-trip decimal), so pure reformatting never costs similarity.
Image metrics follow the usual 8-bit conventions; PSNR is capped at 99 dB so
identical images do not produce infinities in aggregate tables.
"""

from __future__ import annotations

import math
import subprocess
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .ggb.parser import HEAD_ARITY
from .ggb.predicates import PREDICATE_ARITY
from .render import RasterImage

PSNR_CAP_DB = 99.0
COMMAND_WEIGHT = 3.0

COMMAND_VOCAB = frozenset(HEAD_ARITY) | frozenset(PREDICATE_ARITY)


class DimensionMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Token:
    kind: str  # COMMAND | IDENT | NUMBER | DELIM
    text: str


@dataclass(frozen=True)
class CodeSimReport:
    bleu: float
    rouge_l: float
    chrf: float
    edit_distance: int
    ruby: float

    def scaled(self) -> dict[str, float]:
        """x100 presentation used in evaluation tables."""
        return {
            "bleu": round(self.bleu * 100, 2),
            "rouge_l": round(self.rouge_l * 100, 2),
            "chrf": round(self.chrf * 100, 2),
            "edit_distance": float(self.edit_distance),
            "ruby": round(self.ruby * 100, 2),
        }


@dataclass(frozen=True)
class ImageSimReport:
    psnr_db: float
    ssim: float
    perceptual: float | None = None


_NUMBER_RE = None


def tokenize_ggb(source: str) -> list[Token]:
    """Maximal-munch tokenization; whitespace discarded, unknown bytes become DELIMs."""
    tokens: list[Token] = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isalpha() or ch == "_":
            j = i + 1
            while j < n and (source[j].isalnum() or source[j] in "_'"):
                j += 1
            word = source[i:j]
            kind = "COMMAND" if word in COMMAND_VOCAB else "IDENT"
            tokens.append(Token(kind, word))
            i = j
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and source[i + 1].isdigit()):
            j = i
            seen_dot = False
            while j < n and (source[j].isdigit() or (source[j] == "." and not seen_dot)):
                if source[j] == ".":
                    seen_dot = True
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    while k < n and source[k].isdigit():
                        k += 1
                    j = k
            tokens.append(Token("NUMBER", source[i:j]))
            i = j
            continue
        tokens.append(Token("DELIM", ch))
        i += 1
    return tokens


def _canonical_number(text: str) -> str:
    try:
        return repr(float(text))
    except ValueError:
        return text


def normalize_tokens(tokens: Sequence[Token]) -> list[Token]:
    return [
        Token(t.kind, _canonical_number(t.text)) if t.kind == "NUMBER" else t
        for t in tokens
    ]


def _ngrams(seq: Sequence, n: int) -> list[tuple]:
    return [tuple(seq[i : i + n]) for i in range(len(seq) - n + 1)]


def _clipped_matches(cand: list[tuple], ref: list[tuple]) -> int:
    counts: dict[tuple, int] = {}
    for g in ref:
        counts[g] = counts.get(g, 0) + 1
    hits = 0
    for g in cand:
        if counts.get(g, 0) > 0:
            counts[g] -= 1
            hits += 1
    return hits


def bleu(candidate: Sequence[str], reference: Sequence[str], max_n: int = 4) -> float:
    """Geometric mean of n-gram precisions with brevity penalty.

    The order range adapts to short scripts (n up to the shorter length) so
    identical inputs always score 1.0.
    """
    if not candidate or not reference:
        return 1.0 if list(candidate) == list(reference) else 0.0
    top = max(1, min(max_n, len(candidate), len(reference)))
    log_sum = 0.0
    for n in range(1, top + 1):
        cand_ngrams = _ngrams(candidate, n)
        ref_ngrams = _ngrams(reference, n)
        if not cand_ngrams:
            return 0.0
        p = _clipped_matches(cand_ngrams, ref_ngrams) / len(cand_ngrams)
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    bp = 1.0 if len(candidate) >= len(reference) else math.exp(1.0 - len(reference) / len(candidate))
    return bp * math.exp(log_sum / top)


def _lcs_length(a: Sequence, b: Sequence) -> int:
    if not a or not b:
        return 0
    prev = [0] * (len(b) + 1)
    for x in a:
        cur = [0]
        for j, y in enumerate(b, start=1):
            cur.append(prev[j - 1] + 1 if x == y else max(prev[j], cur[j - 1]))
        prev = cur
    return prev[-1]


def rouge_l(candidate: Sequence[str], reference: Sequence[str]) -> float:
    """LCS-based F1 over tokens."""
    if not candidate and not reference:
        return 1.0
    if not candidate or not reference:
        return 0.0
    lcs = _lcs_length(candidate, reference)
    if lcs == 0:
        return 0.0
    p = lcs / len(candidate)
    r = lcs / len(reference)
    return 2.0 * p * r / (p + r)


def chrf(candidate: str, reference: str, max_n: int = 6, beta: float = 2.0) -> float:
    """Character n-gram F-score (whitespace removed, n averaged over 1..max_n).

    The F-beta score favors recall, which breaks symmetry under argument swap,
    so the two directions are averaged; on equal-length inputs this equals the
    plain one-directional score.
    """
    return (_chrf_directed(candidate, reference, max_n, beta)
            + _chrf_directed(reference, candidate, max_n, beta)) / 2.0


def _chrf_directed(candidate: str, reference: str, max_n: int, beta: float) -> float:
    cand = "".join(candidate.split())
    ref = "".join(reference.split())
    if not cand and not ref:
        return 1.0
    if not cand or not ref:
        return 0.0
    precisions, recalls = [], []
    for n in range(1, max_n + 1):
        cand_ngrams = _ngrams(cand, n)
        ref_ngrams = _ngrams(ref, n)
        if not cand_ngrams and not ref_ngrams:
            continue
        hits = _clipped_matches(cand_ngrams, ref_ngrams)
        precisions.append(hits / len(cand_ngrams) if cand_ngrams else 0.0)
        recalls.append(hits / len(ref_ngrams) if ref_ngrams else 0.0)
    p = sum(precisions) / len(precisions)
    r = sum(recalls) / len(recalls)
    if p + r == 0.0:
        return 0.0
    b2 = beta * beta
    return (1.0 + b2) * p * r / (b2 * p + r)


def token_edit_distance(a: Sequence[str], b: Sequence[str]) -> int:
    """Levenshtein distance over token strings."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, start=1):
        cur = [i]
        for j, y in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (x != y)))
        prev = cur
    return prev[-1]


def ruby(cand_tokens: Sequence[Token], ref_tokens: Sequence[Token],
         command_weight: float = COMMAND_WEIGHT) -> float:
    """Weighted token-overlap score on normalized streams.

    Dice-style: 2 * weight(multiset intersection) / (weight(a) + weight(b)),
    with construction commands weighted ``command_weight`` times other tokens.
    """
    def weight(t: Token) -> float:
        return command_weight if t.kind == "COMMAND" else 1.0

    a = [(t.kind, t.text) for t in normalize_tokens(cand_tokens)]
    b = [(t.kind, t.text) for t in normalize_tokens(ref_tokens)]
    if not a and not b:
        return 1.0
    counts: dict[tuple, int] = {}
    for key in b:
        counts[key] = counts.get(key, 0) + 1
    inter = 0.0
    for key in a:
        if counts.get(key, 0) > 0:
            counts[key] -= 1
            inter += command_weight if key[0] == "COMMAND" else 1.0
    wa = sum(weight(Token(*k)) for k in a)
    wb = sum(weight(Token(*k)) for k in b)
    if wa + wb == 0.0:
        return 1.0
    return 2.0 * inter / (wa + wb)


def code_similarity(candidate: str, reference: str) -> CodeSimReport:
    """All code-similarity metrics between a candidate script and a reference."""
    cand_tokens = tokenize_ggb(candidate)
    ref_tokens = tokenize_ggb(reference)
    cand_texts = [t.text for t in cand_tokens]
    ref_texts = [t.text for t in ref_tokens]
    norm_cand = [t.text for t in normalize_tokens(cand_tokens)]
    norm_ref = [t.text for t in normalize_tokens(ref_tokens)]
    return CodeSimReport(
        bleu=bleu(cand_texts, ref_texts),
        rouge_l=rouge_l(cand_texts, ref_texts),
        chrf=chrf(candidate, reference),
        edit_distance=token_edit_distance(norm_cand, norm_ref),
        ruby=ruby(cand_tokens, ref_tokens),
    )


def _as_float_gray(img: RasterImage) -> np.ndarray:
    buf = img.buffer.astype(np.float64)
    if img.channels == 3:
        buf = buf.mean(axis=2)
    return buf


def psnr(candidate: RasterImage, reference: RasterImage, cap_db: float = PSNR_CAP_DB) -> float:
    """Peak signal-to-noise ratio over 8-bit intensities, capped."""
    if (candidate.width, candidate.height) != (reference.width, reference.height):
        raise DimensionMismatch("images must have equal dimensions")
    a = _as_float_gray(candidate)
    b = _as_float_gray(reference)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return cap_db
    return min(10.0 * math.log10(255.0**2 / mse), cap_db)


def ssim(candidate: RasterImage, reference: RasterImage, window: int = 8) -> float:
    """Mean structural similarity over sliding uniform windows."""
    if (candidate.width, candidate.height) != (reference.width, reference.height):
        raise DimensionMismatch("images must have equal dimensions")
    a = _as_float_gray(candidate)
    b = _as_float_gray(reference)
    win = min(window, a.shape[0], a.shape[1])
    c1 = (0.01 * 255.0) ** 2
    c2 = (0.03 * 255.0) ** 2
    wa = np.lib.stride_tricks.sliding_window_view(a, (win, win))
    wb = np.lib.stride_tricks.sliding_window_view(b, (win, win))
    mu_a = wa.mean(axis=(2, 3))
    mu_b = wb.mean(axis=(2, 3))
    var_a = wa.var(axis=(2, 3))
    var_b = wb.var(axis=(2, 3))
    cov = (wa * wb).mean(axis=(2, 3)) - mu_a * mu_b
    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


class ExternalPerceptualScorer:
    """Client for an external perceptual-metric process.

    Protocol: one request line ``<png-path> <png-path>``, one response line
    containing a float in [0, 1] (lower means more similar).
    """

    def __init__(self, command: list[str]):
        self.command = command

    def score(self, candidate_path: str, reference_path: str) -> float:
        proc = subprocess.run(
            self.command,
            input=f"{candidate_path} {reference_path}\n",
            capture_output=True,
            text=True,
            timeout=60,
        )
        if proc.returncode != 0:
            raise RuntimeError(f"perceptual scorer failed: {proc.stderr.strip()}")
        return float(proc.stdout.strip().splitlines()[0])


def image_similarity(
    candidate: RasterImage,
    reference: RasterImage,
    perceptual: float | None = None,
) -> ImageSimReport:
    """PSNR and SSIM; the perceptual slot is filled by the caller's external scorer."""
    return ImageSimReport(
        psnr_db=psnr(candidate, reference),
        ssim=ssim(candidate, reference),
        perceptual=perceptual,
    )


def resize_bilinear(img: RasterImage, width: int, height: int) -> RasterImage:
    """Documented resize policy for dimension mismatches: bilinear via Pillow."""
    from PIL import Image

    mode = "L" if img.channels == 1 else "RGB"
    pil = Image.fromarray(img.buffer, mode=mode).resize((width, height), Image.BILINEAR)
    arr = np.asarray(pil).copy()
    return RasterImage(width=width, height=height, channels=img.channels, buffer=arr)
