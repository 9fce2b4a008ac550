import numpy as np
import pytest
from hypothesis import given, strategies as st

from geoverify import metrics
from geoverify.render import RasterImage


class TestTokenize:
    def test_point_assignment(self):
        kinds = [(t.kind, t.text) for t in metrics.tokenize_ggb("A=(1.5, 2)")]
        assert kinds == [("IDENT", "A"), ("DELIM", "="), ("DELIM", "("),
                         ("NUMBER", "1.5"), ("DELIM", ","), ("NUMBER", "2"),
                         ("DELIM", ")")]

    def test_command_recognized(self):
        kinds = [(t.kind, t.text) for t in metrics.tokenize_ggb("Segment(A,B)")]
        assert kinds[0] == ("COMMAND", "Segment")

    def test_empty(self):
        assert metrics.tokenize_ggb("") == []

    def test_unknown_bytes_become_delims(self):
        tokens = metrics.tokenize_ggb("A§B")
        assert [t.kind for t in tokens] == ["IDENT", "DELIM", "IDENT"]

    def test_scientific_notation(self):
        tokens = metrics.tokenize_ggb("1.5e-3")
        assert [(t.kind, t.text) for t in tokens] == [("NUMBER", "1.5e-3")]


IDENTICAL = "A=(0,0)\nB=(4,0)\ns=Segment(A,B)"


class TestCodeSimilarity:
    def test_identity_maxima(self):
        report = metrics.code_similarity(IDENTICAL, IDENTICAL)
        assert report.bleu == 1.0
        assert report.rouge_l == 1.0
        assert report.chrf == 1.0
        assert report.edit_distance == 0
        assert report.ruby == 1.0

    def test_token_disjoint_bleu_zero(self):
        assert metrics.code_similarity("Qq Ww", "Zz Xx").bleu == 0.0

    def test_ruby_normalization_fixture(self):
        report = metrics.code_similarity("A = (1.50, 2)", "A=(1.5,2)")
        assert report.ruby == 1.0
        assert report.edit_distance == 0

    def test_chrf_hand_oracle(self):
        # all n-grams enumerated by hand for n <= 3:
        # 1-grams: {a,b,c} vs {a,b,d} -> P=R=2/3
        # 2-grams: {ab,bc} vs {ab,bd} -> P=R=1/2
        # 3-grams: {abc} vs {abd}     -> P=R=0
        # mean P = mean R = (2/3 + 1/2 + 0)/3 = 7/18; F-beta(2) = P = 7/18
        assert metrics.chrf("abc", "abd", max_n=3) == pytest.approx(7.0 / 18.0, abs=1e-9)

    def test_chrf_ignores_whitespace(self):
        assert metrics.chrf("a b c", "abc") == 1.0

    def test_bleu_brevity_penalty(self):
        short = "A = ( 0"
        long = "A = ( 0 , 1 )"
        cand = [t.text for t in metrics.tokenize_ggb(short)]
        ref = [t.text for t in metrics.tokenize_ggb(long)]
        assert metrics.bleu(cand, ref) < 1.0

    def test_edit_distance_values(self):
        assert metrics.token_edit_distance(list("abc"), list("abd")) == 1
        assert metrics.token_edit_distance([], list("ab")) == 2

    def test_rouge_l_subsequence(self):
        # LCS("a b c d", "a c d e") = 3 -> P = 3/4, R = 3/4, F1 = 3/4
        assert metrics.rouge_l(list("abcd"), list("acde")) == pytest.approx(0.75)

    def test_ruby_command_weighting(self):
        # one shared COMMAND outweighs one shared IDENT under 3x weighting
        with_cmd = metrics.code_similarity("Segment(A,B)", "Segment(C,D)")
        without_cmd = metrics.code_similarity("Foo(A,B)", "Bar(C,D)")
        assert with_cmd.ruby > without_cmd.ruby


class TestSimilarityProperties:
    @given(st.text(alphabet="abcXY(),=123", max_size=20),
           st.text(alphabet="abcXY(),=123", max_size=20))
    def test_chrf_symmetric(self, a, b):
        assert metrics.chrf(a, b) == pytest.approx(metrics.chrf(b, a), abs=1e-12)

    @given(st.lists(st.sampled_from("abcd"), max_size=12),
           st.lists(st.sampled_from("abcd"), max_size=12))
    def test_edit_distance_symmetric(self, a, b):
        assert metrics.token_edit_distance(a, b) == metrics.token_edit_distance(b, a)

    @given(st.lists(st.sampled_from("abc"), max_size=8),
           st.lists(st.sampled_from("abc"), max_size=8),
           st.lists(st.sampled_from("abc"), max_size=8))
    def test_edit_distance_triangle_inequality(self, a, b, c):
        ab = metrics.token_edit_distance(a, b)
        bc = metrics.token_edit_distance(b, c)
        ac = metrics.token_edit_distance(a, c)
        assert ac <= ab + bc

    @given(st.text(alphabet="AB=(),1234 \n", min_size=1, max_size=40))
    def test_ruby_whitespace_invariance(self, source):
        spaced = source.replace("(", " ( ").replace(",", " , ")
        r1 = metrics.code_similarity(source, source).ruby
        r2 = metrics.code_similarity(spaced, source).ruby
        assert r1 == r2 == 1.0 or metrics.tokenize_ggb(source) == []

    def test_ruby_numeric_reformat_invariance(self):
        assert metrics.code_similarity("A=(2.0, 0.50)", "A=(2, .5)").ruby == 1.0


def _img(arr) -> RasterImage:
    buf = np.asarray(arr, dtype=np.uint8)
    return RasterImage(buf.shape[1], buf.shape[0], 1, buf)


def _ssim_oracle(a: np.ndarray, b: np.ndarray, win: int = 8) -> float:
    """Direct formula evaluation over sliding windows (independent loop code)."""
    a = a.astype(np.float64)
    b = b.astype(np.float64)
    c1 = (0.01 * 255) ** 2
    c2 = (0.03 * 255) ** 2
    values = []
    for i in range(a.shape[0] - win + 1):
        for j in range(a.shape[1] - win + 1):
            wa = a[i : i + win, j : j + win]
            wb = b[i : i + win, j : j + win]
            mu_a, mu_b = wa.mean(), wb.mean()
            var_a, var_b = wa.var(), wb.var()
            cov = ((wa - mu_a) * (wb - mu_b)).mean()
            values.append(((2 * mu_a * mu_b + c1) * (2 * cov + c2))
                          / ((mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)))
    return float(np.mean(values))


class TestImageSimilarity:
    def test_psnr_identical_capped(self):
        img = _img(np.full((8, 8), 37))
        assert metrics.psnr(img, img) == 99.0

    def test_psnr_black_white_zero_db(self):
        black = _img(np.zeros((8, 8)))
        white = _img(np.full((8, 8), 255))
        assert metrics.psnr(black, white) == 0.0

    def test_ssim_identical(self):
        rng = np.random.default_rng(3)
        img = _img(rng.integers(0, 256, size=(16, 16)))
        assert metrics.ssim(img, img) == pytest.approx(1.0)

    def test_ssim_matches_formula_oracle(self):
        rng = np.random.default_rng(5)
        base = rng.integers(0, 256, size=(12, 12)).astype(np.uint8)
        # half-inverted checkerboard against the original
        other = base.copy()
        other[:6, :] = 255 - other[:6, :]
        got = metrics.ssim(_img(base), _img(other))
        want = _ssim_oracle(base, other)
        assert got == pytest.approx(want, abs=1e-9)

    def test_ssim_symmetric(self):
        rng = np.random.default_rng(11)
        a = _img(rng.integers(0, 256, size=(16, 16)))
        b = _img(rng.integers(0, 256, size=(16, 16)))
        assert metrics.ssim(a, b) == pytest.approx(metrics.ssim(b, a), abs=1e-12)

    def test_psnr_symmetric(self):
        rng = np.random.default_rng(13)
        a = _img(rng.integers(0, 256, size=(16, 16)))
        b = _img(rng.integers(0, 256, size=(16, 16)))
        assert metrics.psnr(a, b) == pytest.approx(metrics.psnr(b, a), abs=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(metrics.DimensionMismatch):
            metrics.psnr(_img(np.zeros((4, 4))), _img(np.zeros((5, 5))))
        with pytest.raises(metrics.DimensionMismatch):
            metrics.ssim(_img(np.zeros((4, 4))), _img(np.zeros((5, 5))))

    def test_image_similarity_report(self):
        img = _img(np.zeros((8, 8)))
        report = metrics.image_similarity(img, img)
        assert report.psnr_db == 99.0
        assert report.ssim == pytest.approx(1.0)
        assert report.perceptual is None

    def test_resize_bilinear(self):
        img = _img(np.arange(64).reshape(8, 8) * 4)
        resized = metrics.resize_bilinear(img, 4, 4)
        assert (resized.width, resized.height) == (4, 4)


def test_external_perceptual_scorer_protocol():
    scorer = metrics.ExternalPerceptualScorer(
        ["python3", "-c",
         "import sys; line = sys.stdin.readline(); print(0.25 if line.strip() else 1.0)"])
    assert scorer.score("a.png", "b.png") == 0.25
