"""Procedural generation of aligned face-like test images.

Stands in for a real aligned face corpus: every image shares the same rough
layout (head ellipse, eyes, nose, mouth) so position priors are meaningful,
while per-identity jitter of positions, sizes, tones, and texture provides
the variation the hallucination pipeline needs.
"""

from __future__ import annotations

import numpy as np


def _smoothstep(x: np.ndarray) -> np.ndarray:
    t = np.clip(x, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t)


def _inside(field: np.ndarray, edge: float) -> np.ndarray:
    """Soft indicator of field <= 1 with a transition band of width edge."""
    return _smoothstep((1.0 - field) / edge + 0.5)


def _ellipse(yy, xx, cy, cx, ry, rx) -> np.ndarray:
    return np.sqrt(((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2)


def _blob(yy, xx, cy, cx, ry, rx) -> np.ndarray:
    return np.exp(-0.5 * (((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2))


def _texture(rng: np.random.Generator, yy, xx, waves: int, freq_lo: float, freq_hi: float) -> np.ndarray:
    """Smooth random field from a fixed number of 2D cosine waves."""
    out = np.zeros_like(yy)
    for _ in range(waves):
        fy = rng.uniform(freq_lo, freq_hi)
        fx = rng.uniform(freq_lo, freq_hi)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        amp = rng.uniform(0.5, 1.0)
        out += amp * np.cos(2.0 * np.pi * (fy * yy + fx * xx) + phase)
    return out / waves


def _render_face(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    yy, xx = np.meshgrid(
        np.linspace(0.0, 1.0, height), np.linspace(0.0, 1.0, width), indexing="ij"
    )
    edge = 2.0 / min(height, width)  # feature transitions about two pixels wide

    img = rng.uniform(0.08, 0.25) + 0.05 * yy  # backdrop with a gentle gradient

    # head
    cy = 0.52 + rng.uniform(-0.035, 0.035)
    cx = 0.50 + rng.uniform(-0.035, 0.035)
    ry = 0.40 + rng.uniform(-0.05, 0.05)
    rx = 0.33 + rng.uniform(-0.05, 0.05)
    head = _inside(_ellipse(yy, xx, cy, cx, ry, rx), 6.0 * edge)
    skin = rng.uniform(0.50, 0.85)
    img = img * (1.0 - head) + head * skin

    # hair cap over the upper part of the head
    brow_line = cy - 0.55 * ry + rng.uniform(-0.03, 0.03)
    hair = head * _smoothstep((brow_line - yy) / (4.0 * edge) + 0.5)
    hair_tone = rng.uniform(0.05, 0.30)
    img = img * (1.0 - hair) + hair * hair_tone

    # eyes with pupils
    eye_y = cy - 0.18 * ry + rng.uniform(-0.02, 0.02)
    eye_dx = 0.42 * rx + rng.uniform(-0.02, 0.02)
    eye_ry = 0.030 + rng.uniform(-0.010, 0.010)
    eye_rx = 0.055 + rng.uniform(-0.014, 0.014)
    eye_depth = rng.uniform(0.25, 0.50)
    for side in (-1.0, 1.0):
        ex = cx + side * eye_dx + rng.uniform(-0.01, 0.01)
        socket = _inside(_ellipse(yy, xx, eye_y, ex, eye_ry, eye_rx), 4.0 * edge)
        img -= eye_depth * socket * head
        pupil = _inside(_ellipse(yy, xx, eye_y, ex, eye_ry * 0.6, eye_rx * 0.35), 4.0 * edge)
        img -= 0.15 * pupil * head
        brow = _inside(
            _ellipse(yy, xx, eye_y - 2.2 * eye_ry, ex, eye_ry * 0.45, eye_rx * 1.1),
            4.0 * edge,
        )
        img -= rng.uniform(0.08, 0.28) * brow * head

    # nose: bright ridge with dark nostril dots at its base
    nose_y = cy + 0.08 * ry + rng.uniform(-0.02, 0.02)
    ridge = _blob(yy, xx, nose_y - 0.05, cx, 0.10, 0.020 + rng.uniform(-0.007, 0.007))
    img += rng.uniform(0.06, 0.14) * ridge * head
    for side in (-1.0, 1.0):
        nostril = _inside(
            _ellipse(yy, xx, nose_y + 0.035, cx + side * 0.035, 0.012, 0.016), 4.0 * edge
        )
        img -= 0.18 * nostril * head

    # mouth bar
    mouth_y = cy + 0.42 * ry + rng.uniform(-0.025, 0.025)
    mouth_rx = 0.11 + rng.uniform(-0.035, 0.035)
    mouth = _inside(_ellipse(yy, xx, mouth_y, cx, 0.020, mouth_rx), 4.0 * edge)
    img -= rng.uniform(0.18, 0.40) * mouth * head

    # lateral shading plus identity-specific texture inside the face
    shade = 1.0 - 0.12 * np.abs(xx - cx) / max(rx, 1e-6)
    img = img * (head * shade + (1.0 - head))
    img += 0.050 * _texture(rng, yy, xx, 6, 1.0, 5.0) * head
    img += 0.025 * _texture(rng, yy, xx, 8, 5.0, 16.0) * head

    return np.clip(img, 0.0, 1.0)


def synth_faces(count: int, seed: int, height: int = 120, width: int = 100) -> np.ndarray:
    """Generate `count` aligned face-like grayscale images in [0, 1].

    The same seed reproduces the corpus bit for bit; per-identity parameters
    are jittered from independent child streams of the seed.
    """
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    if height < 16 or width < 16:
        raise ValueError(f"dims too small for a face layout: {height}x{width}")
    streams = np.random.SeedSequence(seed).spawn(count)
    faces = np.empty((count, height, width), dtype=np.float64)
    for i, stream in enumerate(streams):
        faces[i] = _render_face(np.random.default_rng(stream), height, width)
    return faces
