"""
Example demonstrating the video container, its binary file format, and
the pixel-space quality metrics.
"""

import tempfile
from pathlib import Path

import numpy as np

from replan import Video, load_video, pixel_l2, psnr, save_video, ssim, video_mse


def run_example():
    # Step 1: build a clip. Videos are float32, values in [0, 1],
    # shaped (frames, height, width); the array is frozen on construction.
    rng = np.random.default_rng(7)
    base = np.zeros((8, 32, 32), dtype=np.float32)
    for t in range(8):
        base[t, 10:20, 2 + 3 * t : 8 + 3 * t] = 0.9  # a block sweeping right
    clip = Video(base)
    print("clip:", clip.length, "frames of", clip.height, "x", clip.width)

    # Step 2: write it to disk and read it back. The container is a small
    # binary header (magic, version, dims) followed by raw float32 frames.
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "sweep.isev"
        save_video(clip, path)
        print("file size:", path.stat().st_size, "bytes")
        again = load_video(path)
        print("round trip bit-exact:", np.array_equal(clip.pixels, again.pixels))

    # Step 3: compare the clip against noisier and noisier copies.
    # psnr falls and ssim decays toward 0 as the degradation grows.
    print("\nnoise    mse        l2      psnr     ssim")
    for noise in (0.01, 0.05, 0.1, 0.3):
        bent = np.clip(base + rng.normal(0, noise, base.shape), 0, 1)
        other = Video(bent.astype(np.float32))
        print(
            f"{noise:5.2f} {video_mse(clip, other):9.5f} "
            f"{pixel_l2(clip, other):8.3f} {psnr(clip, other):8.3f} "
            f"{ssim(clip, other):8.4f}"
        )

    # Identical clips are the fixed points of both metrics.
    print("\nself psnr:", psnr(clip, clip), " self ssim:", ssim(clip, clip))


if __name__ == "__main__":
    run_example()
