"""Surface similarity between scripts and between rendered images.

Code metrics work on the command/identifier/number token stream; the
normalized variants ignore whitespace and numeric formatting entirely.  Image
metrics follow the usual 8-bit conventions.
"""

from geoverify.ggb import execute_program, parse_program
from geoverify.metrics import code_similarity, image_similarity
from geoverify.render import fit_viewport, render_state

REFERENCE = """A=(0,0)
B=(4,0)
s=Segment(A,B)
c=Circle(A, 2.5)
"""

CANDIDATES = {
    "identical": REFERENCE,
    "reformatted": "A = (0.0, 0)\nB = (4.00, 0)\ns = Segment(A, B)\nc = Circle(A, 2.50)\n",
    "renamed": "P=(0,0)\nQ=(4,0)\nseg=Segment(P,Q)\nk=Circle(P, 2.5)\n",
    "different": "X=(1,1)\nf=FunctionGraph(x^2, -2, 2)\n",
}


def main() -> None:
    print(f"{'candidate':>12} | {'bleu':>6} {'rougeL':>6} {'chrf':>6} "
          f"{'edit':>4} {'ruby':>6}")
    for name, source in CANDIDATES.items():
        r = code_similarity(source, REFERENCE)
        print(f"{name:>12} | {r.bleu:6.3f} {r.rouge_l:6.3f} {r.chrf:6.3f} "
              f"{r.edit_distance:4d} {r.ruby:6.3f}")

    ref_state = execute_program(parse_program(REFERENCE))
    ref_img = render_state(ref_state, fit_viewport(ref_state, 256, 256))
    print(f"\n{'candidate':>12} | {'psnr_db':>8} {'ssim':>6}")
    for name, source in CANDIDATES.items():
        try:
            state = execute_program(parse_program(source))
            img = render_state(state, fit_viewport(state, 256, 256))
            r = image_similarity(img, ref_img)
            print(f"{name:>12} | {r.psnr_db:8.2f} {r.ssim:6.3f}")
        except Exception as exc:  # noqa: BLE001 - demo robustness
            print(f"{name:>12} | render failed: {exc}")


if __name__ == "__main__":
    main()
