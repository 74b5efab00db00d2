"""
File reading and writing for images, masks, latent dumps and corpora.
"""

import concurrent.futures
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import DiffPaintError, ImageReadError
from .field import as_field
from .types import Field, FilePath, MaskField

logger = logging.getLogger(__name__)

LATENT_MAGIC = b"CFSF"
IMAGE_SUFFIXES = (".ppm", ".pgm", ".pnm")
MASK_THRESHOLD = 128


def _open_pnm(file_path: FilePath) -> Image.Image:
    file_path = Path(file_path)
    if not file_path.exists():
        raise ImageReadError(f"File not found: {file_path}", str(file_path))
    try:
        img = Image.open(file_path)
        img.load()
    except Exception as e:
        raise ImageReadError(f"Failed to decode image: {e}", str(file_path), e) from e
    return img


def read_image(file_path: FilePath) -> Field:
    """
    Read an 8-bit PGM (1 channel) or PPM (3 channels) image into [0, 1].

    Args:
        file_path: Path to the image file

    Returns:
        Field: (h, w, c) values v / 255

    Raises:
        ImageReadError: If the file is missing or not a supported image
    """
    img = _open_pnm(file_path)
    if img.mode not in ("L", "RGB"):
        img = img.convert("RGB" if "A" in img.mode or img.mode == "P" else "L")
    data = np.asarray(img, dtype=np.float64) / 255.0
    return as_field(data)


def write_image(x: Field, file_path: FilePath) -> None:
    """Write a 1- or 3-channel field as binary PGM/PPM: round(clamp(v) * 255)."""
    channels = x.shape[2]
    if channels not in (1, 3):
        raise ImageReadError(
            f"Cannot write {channels}-channel field as PGM/PPM", str(file_path)
        )
    data = np.round(np.clip(x, 0.0, 1.0) * 255.0).astype(np.uint8)
    img = Image.fromarray(data[:, :, 0] if channels == 1 else data)
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    img.save(file_path, format="PPM")


def read_mask(file_path: FilePath) -> MaskField:
    """Read a PGM mask; pixels >= 128 are known."""
    img = _open_pnm(file_path).convert("L")
    return np.asarray(img) >= MASK_THRESHOLD


def write_mask(m: MaskField, file_path: FilePath) -> None:
    """Write a mask as PGM with known pixels 255 and missing pixels 0."""
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(m.astype(np.uint8) * 255).save(file_path, format="PPM")


def write_latent(x: Field, file_path: FilePath) -> None:
    """Dump a field as CFSF: magic, u32 h, w, c, then little-endian f32 data."""
    h, w, c = x.shape
    header = LATENT_MAGIC + np.array([h, w, c], dtype="<u4").tobytes()
    Path(file_path).parent.mkdir(parents=True, exist_ok=True)
    Path(file_path).write_bytes(header + x.astype("<f4").tobytes())


def read_latent(file_path: FilePath) -> Field:
    """Read a CFSF latent dump written by write_latent."""
    file_path = Path(file_path)
    if not file_path.exists():
        raise ImageReadError(f"File not found: {file_path}", str(file_path))
    raw = file_path.read_bytes()
    if len(raw) < 16 or raw[:4] != LATENT_MAGIC:
        raise ImageReadError("Not a CFSF latent file", str(file_path))
    h, w, c = (int(v) for v in np.frombuffer(raw[4:16], dtype="<u4"))
    payload = np.frombuffer(raw[16:], dtype="<f4")
    if payload.size != h * w * c:
        raise ImageReadError(
            f"Latent payload has {payload.size} values, header says {h * w * c}",
            str(file_path),
        )
    return payload.reshape(h, w, c).astype(np.float64)


@dataclass
class CorpusItem:
    """An image and its mask, paired by filename stem."""

    stem: str
    image: Field
    mask: MaskField


def _image_files(folder: Path) -> dict[str, Path]:
    return {
        p.stem: p
        for p in sorted(folder.iterdir())
        if p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES
    }


def load_corpus(
    image_dir: FilePath,
    mask_dir: FilePath,
    *,
    max_workers: int | None = None,
    skip_errors: bool = True,
) -> tuple[list[CorpusItem], dict[str, Exception]]:
    """
    Load all image/mask pairs from two folders in parallel.

    Args:
        image_dir: Folder with PGM/PPM images (also the ground truth)
        mask_dir: Folder with PGM masks named like their images
        max_workers: Maximum # of workers (default: None / TPE default)
        skip_errors: If True, collect failed items; if False, raise on 1st error

    Returns:
        Items sorted by stem, and a dict of per-stem errors

    Raises:
        ImageReadError: If a folder doesn't exist / if skip_errors=False and any
        item fails to load
    """
    folders = {"image": Path(image_dir), "mask": Path(mask_dir)}
    for name, folder in folders.items():
        if not folder.is_dir():
            raise ImageReadError(
                f"{name.title()} folder not found: {folder}", str(folder)
            )

    images = _image_files(folders["image"])
    masks = _image_files(folders["mask"])

    def load_pair(stem: str) -> CorpusItem:
        if stem not in masks:
            raise ImageReadError(f"No mask for image '{stem}'", str(images[stem]))
        image = read_image(images[stem])
        mask = read_mask(masks[stem])
        if mask.shape != image.shape[:2]:
            raise ImageReadError(
                f"Mask {mask.shape} does not match image {image.shape[:2]}",
                str(masks[stem]),
            )
        return CorpusItem(stem, image, mask)

    items: dict[str, CorpusItem] = {}
    errors: dict[str, Exception] = {}

    with concurrent.futures.ThreadPoolExecutor(max_workers=max_workers) as executor:
        future_to_stem = {executor.submit(load_pair, stem): stem for stem in images}
        for future in concurrent.futures.as_completed(future_to_stem):
            stem = future_to_stem[future]
            try:
                items[stem] = future.result()
            except DiffPaintError as e:
                if not skip_errors:
                    raise ImageReadError(
                        f"Failed to load corpus item '{stem}': {e}", stem, e
                    ) from e
                errors[stem] = e

    if errors:
        logger.warning(
            "Failed to load %d corpus item(s): %s", len(errors), sorted(errors)
        )

    ordered = [items[stem] for stem in sorted(items)]
    return ordered, dict(sorted(errors.items()))
