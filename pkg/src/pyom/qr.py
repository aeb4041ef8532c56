"""QR rendering for printed notes (OpenCV objdetect backend).

Error-correction level M; the QR carries the ``PYOM1:`` text transport form.
"""

from __future__ import annotations

from pathlib import Path

import cv2
import numpy as np

_SCALE = 8
_QUIET_ZONE = 4  # modules of white border


def render_qr(text: str, path: Path | str) -> None:
    params = cv2.QRCodeEncoder_Params()
    params.correction_level = cv2.QRCODE_ENCODER_CORRECT_LEVEL_M
    encoder = cv2.QRCodeEncoder.create(params)
    modules = encoder.encode(text)
    pad = _QUIET_ZONE
    bordered = np.pad(modules, pad, constant_values=255)
    image = cv2.resize(bordered, None, fx=_SCALE, fy=_SCALE, interpolation=cv2.INTER_NEAREST)
    if not cv2.imwrite(str(path), image):
        raise OSError(f"failed to write QR image to {path}")


def decode_qr(path: Path | str) -> str:
    image = cv2.imread(str(path), cv2.IMREAD_GRAYSCALE)
    if image is None:
        raise OSError(f"cannot read image {path}")
    text, *_ = cv2.QRCodeDetector().detectAndDecode(image)
    if not text:
        raise ValueError(f"no QR code decoded from {path}")
    return text
