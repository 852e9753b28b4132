import hashlib
from typing import Iterable


def format_real(x: float) -> str:
    # 17 significant digits round-trip every double
    return format(float(x), ".17g")


def format_reals(values: Iterable[float], sep: str = ",") -> str:
    return sep.join(format_real(v) for v in values)


def sha256_file(path, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()
