"""PDS product retrieval with a local file cache.

URLs are built directly from a per-mission base URL plus the product id; the
shipped bases point at the public imaging archive and are configuration, not
contract. Cached products are never re-downloaded unless forced.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Union

import requests

from .errors import FetchError, ProductNotFoundError

# Image/label filename suffixes per mission product family.
_SUFFIXES = {
    "curiosity": (".IMG", ".LBL"),
    "perseverance": (".png", ".xml"),
}

DEFAULT_BASE_URLS = {
    "curiosity": ("https://planetarydata.jpl.nasa.gov/img/data/msl/"
                  "MSLMST_0001/DATA"),
    "perseverance": ("https://planetarydata.jpl.nasa.gov/img/data/mars2020/"
                     "mars2020_mastcamz_ops_calibrated/data"),
}

_CHUNK = 1 << 16


def _download(url: str, dest: Path, timeout: float) -> None:
    try:
        response = requests.get(url, stream=True, timeout=timeout)
    except requests.RequestException as exc:
        raise FetchError(f"request failed: {exc}", url=url) from exc
    if response.status_code == 404:
        raise ProductNotFoundError(f"product not found at {url}", url=url,
                                   status=404)
    if response.status_code != 200:
        raise FetchError(f"HTTP {response.status_code} fetching {url}",
                         url=url, status=response.status_code)
    tmp = dest.with_suffix(dest.suffix + ".part")
    size = 0
    with open(tmp, "wb") as handle:
        for chunk in response.iter_content(_CHUNK):
            handle.write(chunk)
            size += len(chunk)
    if size == 0:
        tmp.unlink(missing_ok=True)
        raise FetchError(f"empty response body from {url}", url=url,
                         status=response.status_code)
    tmp.replace(dest)


def fetch_product(product_id: str, mission: str, cache_dir: Union[str, Path],
                  base_url: Optional[str] = None, force: bool = False,
                  timeout: float = 60.0):
    """Fetch (image, label) for a product id, returning their cached paths.

    A warm cache performs no network traffic; ``force`` re-downloads and
    overwrites. 404 responses raise :class:`ProductNotFoundError` carrying
    the attempted URL.
    """
    if mission not in _SUFFIXES:
        raise ValueError(f"unknown mission {mission!r}")
    if not product_id:
        raise ValueError("product_id must be non-empty")
    base = (base_url or DEFAULT_BASE_URLS[mission]).rstrip("/")
    image_suffix, label_suffix = _SUFFIXES[mission]

    product_dir = Path(cache_dir).expanduser() / mission / product_id
    product_dir.mkdir(parents=True, exist_ok=True)
    image_path = product_dir / f"{product_id}{image_suffix}"
    label_path = product_dir / f"{product_id}{label_suffix}"

    for path, suffix in ((image_path, image_suffix), (label_path, label_suffix)):
        cached = path.is_file() and path.stat().st_size > 0
        if cached and not force:
            continue
        _download(f"{base}/{product_id}{suffix}", path, timeout)
    return image_path, label_path
