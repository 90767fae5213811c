"""Dataset creation: derive encrypted and compressed variants of raw files,
chunk them into power-of-two size classes, and emit a labeled manifest.

Encryption variants are raw CTR ciphertext (no container framing), with keys
and nonces derived deterministically from the seed. Compression variants are
the full output of the named compressor, container headers included, so the
first chunk of a compressed variant carries magic bytes; a `drop_first_chunk`
flag removes those chunks for sensitivity analysis.

Filetypes are assigned by subdirectory convention (img/, pdf/, txt/, mp3/,
video/, bin/), not content sniffing.
"""

from __future__ import annotations

import bz2
import gzip
import hashlib
import io
import shutil
import subprocess
import tempfile
import warnings
import zipfile
from dataclasses import dataclass, field, replace
from pathlib import Path
from random import Random

from .classifier import COMPRESSED, ENCRYPTED

KIND_ENCRYPT = "Encrypt"
KIND_COMPRESS = "Compress"

_METHOD_KINDS = {
    "AES-128": KIND_ENCRYPT,
    "AES-192": KIND_ENCRYPT,
    "AES-256": KIND_ENCRYPT,
    "CAMELLIA-128": KIND_ENCRYPT,
    "CAMELLIA-192": KIND_ENCRYPT,
    "CAMELLIA-256": KIND_ENCRYPT,
    "ZIP": KIND_COMPRESS,
    "RAR": KIND_COMPRESS,
    "BZIP2": KIND_COMPRESS,
    "GZIP": KIND_COMPRESS,
}

ALL_METHODS = tuple(_METHOD_KINDS)

SIZE_CLASSES = (1024, 2048, 4096, 8192, 16384, 32768, 65536)

FILETYPES = ("IMG", "PDF", "TXT", "MP3", "VIDEO", "BIN")

_FILETYPE_DIRS = {ft: ft.lower() for ft in FILETYPES}

_MANIFEST_MAGIC = "#hedge-manifest"
_MANIFEST_COLUMNS = (
    "chunk_id",
    "source_file",
    "filetype",
    "kind",
    "method",
    "size_class",
    "chunk_index",
    "locator",
    "content_digest",
)


@dataclass(frozen=True)
class Transform:
    kind: str
    method: str

    def __post_init__(self):
        expected = _METHOD_KINDS.get(self.method)
        if expected is None:
            raise ValueError(f"unknown transform method: {self.method!r}")
        if self.kind != expected:
            raise ValueError(f"method {self.method} has kind {expected}, not {self.kind}")


def transform_for(method: str) -> Transform:
    kind = _METHOD_KINDS.get(method)
    if kind is None:
        raise ValueError(f"unknown transform method: {method!r}")
    return Transform(kind, method)


@dataclass(frozen=True)
class ChunkRecord:
    chunk_id: str
    source_file: str
    filetype: str
    transform: Transform
    size_class: int
    chunk_index: int
    locator: str
    content_digest: str

    @property
    def label(self) -> str:
        return ENCRYPTED if self.transform.kind == KIND_ENCRYPT else COMPRESSED


@dataclass(frozen=True)
class GeneratorConfig:
    methods: tuple = ALL_METHODS
    sizes: tuple = SIZE_CLASSES
    storage: str = "packed"
    drop_first_chunk: bool = False
    out_dir: str | None = None
    skipped: tuple = ()

    def __post_init__(self):
        if self.storage not in ("packed", "files"):
            raise ValueError(f"storage must be 'packed' or 'files', got {self.storage!r}")
        if any(s <= 0 for s in self.sizes):
            raise ValueError("size classes must be positive")
        for m in self.methods:
            transform_for(m)


@dataclass(frozen=True)
class DatasetManifest:
    records: tuple
    seed: int
    generator_config: GeneratorConfig
    root: Path | None = field(default=None, compare=False)

    def filter(self, size_class=None, label=None, filetype=None) -> tuple:
        out = []
        for r in self.records:
            if size_class is not None and r.size_class != size_class:
                continue
            if label is not None and r.label != label:
                continue
            if filetype is not None and r.filetype != filetype:
                continue
            out.append(r)
        return tuple(out)

    def label_counts(self, size_class) -> tuple:
        enc = comp = 0
        for r in self.records:
            if r.size_class != size_class:
                continue
            if r.label == ENCRYPTED:
                enc += 1
            else:
                comp += 1
        return enc, comp

    @property
    def size_classes(self) -> tuple:
        return tuple(sorted({r.size_class for r in self.records}))


class _Unavailable(Exception):
    pass


def _derive_material(key_seed: int, label: str, method: str, purpose: str, nbytes: int) -> bytes:
    digest = hashlib.sha256(f"{key_seed}|{label}|{method}|{purpose}".encode()).digest()
    return digest[:nbytes]


def _encrypt(data: bytes, label: str, method: str, key_seed: int) -> bytes:
    from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

    family, _, bits = method.partition("-")
    key = _derive_material(key_seed, label, method, "key", int(bits) // 8)
    nonce = _derive_material(key_seed, label, method, "nonce", 16)
    if family == "AES":
        algo = algorithms.AES(key)
    else:
        try:
            try:
                from cryptography.hazmat.decrepit.ciphers.algorithms import Camellia
            except ImportError:
                Camellia = algorithms.Camellia
            algo = Camellia(key)
        except Exception as exc:
            raise _Unavailable(str(exc))
    try:
        enc = Cipher(algo, modes.CTR(nonce)).encryptor()
        return enc.update(data) + enc.finalize()
    except Exception as exc:
        raise _Unavailable(str(exc))


def _compress_zip(data: bytes) -> bytes:
    buf = io.BytesIO()
    with zipfile.ZipFile(buf, "w", compression=zipfile.ZIP_DEFLATED) as zf:
        # fixed date and explicit compress_type keep the archive byte-stable;
        # a bare ZipInfo would default to STORED regardless of the file-level mode
        zi = zipfile.ZipInfo("data", date_time=(1980, 1, 1, 0, 0, 0))
        zi.compress_type = zipfile.ZIP_DEFLATED
        zi.external_attr = 0o600 << 16
        zf.writestr(zi, data)
    return buf.getvalue()


def _compress_rar(data: bytes) -> bytes:
    exe = shutil.which("rar")
    if exe is None:
        raise _Unavailable("no rar executable on PATH")
    with tempfile.TemporaryDirectory() as tmp:
        src = Path(tmp) / "data"
        archive = Path(tmp) / "data.rar"
        src.write_bytes(data)
        proc = subprocess.run(
            [exe, "a", "-ep", "-idq", "-m3", str(archive), str(src)],
            capture_output=True,
        )
        if proc.returncode != 0 or not archive.exists():
            raise _Unavailable(f"rar failed: {proc.stderr.decode(errors='replace').strip()}")
        return archive.read_bytes()


def _compress(data: bytes, method: str) -> bytes:
    if method == "ZIP":
        return _compress_zip(data)
    if method == "GZIP":
        return gzip.compress(data, compresslevel=6, mtime=0)
    if method == "BZIP2":
        # 100 KB blocks: more table resets per chunk, closer to the byte
        # statistics real container-rich files show under bzip2
        return bz2.compress(data, 1)
    if method == "RAR":
        return _compress_rar(data)
    raise ValueError(f"unknown compression method: {method!r}")


def _variant_label(file) -> str:
    parts = Path(file).parts
    return "/".join(parts[-2:]) if len(parts) >= 2 else parts[-1]


def create_variants(file, methods, key_seed: int) -> dict:
    """Produce one byte sequence per method; unavailable methods are skipped
    with a warning rather than failing the run."""
    data = Path(file).read_bytes()
    if not data:
        raise ValueError(f"{file}: file is empty")
    label = _variant_label(file)
    variants = {}
    for m in methods:
        t = transform_for(m) if isinstance(m, str) else m
        try:
            if t.kind == KIND_ENCRYPT:
                variants[t.method] = _encrypt(data, label, t.method, key_seed)
            else:
                variants[t.method] = _compress(data, t.method)
        except _Unavailable as exc:
            warnings.warn(f"{t.method} unavailable ({exc}); skipping", stacklevel=2)
    return variants


def split_file(variant: bytes, sizes) -> dict:
    """Consecutive non-overlapping chunks from offset 0 per size class; the
    trailing partial chunk is discarded, never padded."""
    if any(s <= 0 for s in sizes):
        raise ValueError("sizes must all be positive")
    out = {}
    for s in sizes:
        n = len(variant) // s
        out[s] = [variant[i * s : (i + 1) * s] for i in range(n)]
    return out


def _probe_available(methods, key_seed: int) -> tuple:
    """Resolve the usable method subset once, so every file sees the same set."""
    usable, skipped = [], []
    probe = b"\x00" * 64
    for m in methods:
        t = transform_for(m)
        try:
            if t.kind == KIND_ENCRYPT:
                _encrypt(probe, "probe", t.method, key_seed)
            elif t.method == "RAR" and shutil.which("rar") is None:
                raise _Unavailable("no rar executable on PATH")
            usable.append(t.method)
        except _Unavailable as exc:
            warnings.warn(f"{t.method} unavailable ({exc}); generating without it", stacklevel=3)
            skipped.append(t.method)
    return tuple(usable), tuple(skipped)


def generate_dataset(raw_dir, config: GeneratorConfig, seed: int) -> DatasetManifest:
    """Apply create_variants and split_file to every raw file, write chunk
    payloads and manifest.tsv under config.out_dir, and return the manifest.

    Category sizes are equalized by truncating each filetype to the minimum
    file count. In packed storage each variant's bytes are written once and
    chunk locators are (offset, length) views into that region.
    """
    if config.out_dir is None:
        raise ValueError("config.out_dir is required")
    raw = Path(raw_dir)
    by_type = {}
    missing = []
    for ft in FILETYPES:
        d = raw / _FILETYPE_DIRS[ft]
        files = sorted(p for p in d.iterdir() if p.is_file()) if d.is_dir() else []
        if not files:
            missing.append(ft)
        by_type[ft] = files
    if missing:
        raise ValueError(f"raw directory missing filetype categories: {', '.join(missing)}")
    min_count = min(len(v) for v in by_type.values())
    for ft in FILETYPES:
        by_type[ft] = by_type[ft][:min_count]

    usable, skipped = _probe_available(config.methods, seed)
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    records = []
    packed = config.storage == "packed"
    pack_file = open(out / "payloads.bin", "wb") if packed else None
    chunk_dir = out / "chunks"
    offset = 0
    try:
        for ft in FILETYPES:
            for path in by_type[ft]:
                rel = f"{_FILETYPE_DIRS[ft]}/{path.name}"
                variants = create_variants(path, usable, seed)
                for method in usable:
                    variant = variants.get(method)
                    if variant is None:
                        continue
                    t = transform_for(method)
                    base = offset
                    if packed:
                        pack_file.write(variant)
                        offset += len(variant)
                    for size in config.sizes:
                        n = len(variant) // size
                        start = 1 if (config.drop_first_chunk and t.kind == KIND_COMPRESS) else 0
                        for i in range(start, n):
                            payload = variant[i * size : (i + 1) * size]
                            digest = hashlib.sha256(payload).hexdigest()
                            if packed:
                                locator = f"{base + i * size}:{size}"
                            else:
                                sub = chunk_dir / digest[:2]
                                sub.mkdir(parents=True, exist_ok=True)
                                target = sub / digest
                                if not target.exists():
                                    target.write_bytes(payload)
                                locator = f"chunks/{digest[:2]}/{digest}"
                            records.append(
                                ChunkRecord(
                                    chunk_id=f"{rel}|{method}|{size}|{i}",
                                    source_file=rel,
                                    filetype=ft,
                                    transform=t,
                                    size_class=size,
                                    chunk_index=i,
                                    locator=locator,
                                    content_digest=digest,
                                )
                            )
    finally:
        if pack_file is not None:
            pack_file.close()

    records.sort(key=lambda r: r.chunk_id)
    manifest = DatasetManifest(
        records=tuple(records),
        seed=seed,
        generator_config=replace(config, methods=usable, skipped=skipped, out_dir=str(out)),
        root=out,
    )
    save_manifest(manifest, out / "manifest.tsv")
    return manifest


def balance_sample(manifest: DatasetManifest, per_label_count: int, size_class: int, seed: int) -> DatasetManifest:
    """Seed-deterministic uniform subset with exactly per_label_count chunks
    of each label in the given size class."""
    enc = sorted(manifest.filter(size_class=size_class, label=ENCRYPTED), key=lambda r: r.chunk_id)
    comp = sorted(manifest.filter(size_class=size_class, label=COMPRESSED), key=lambda r: r.chunk_id)
    if len(enc) < per_label_count or len(comp) < per_label_count:
        raise ValueError(
            f"size {size_class}: requested {per_label_count} chunks per label, "
            f"available encrypted={len(enc)} compressed={len(comp)}"
        )
    rng = Random(seed)
    chosen = rng.sample(enc, per_label_count) + rng.sample(comp, per_label_count)
    chosen.sort(key=lambda r: r.chunk_id)
    return DatasetManifest(
        records=tuple(chosen),
        seed=manifest.seed,
        generator_config=manifest.generator_config,
        root=manifest.root,
    )


class PayloadReader:
    """Digest-verified payload access for both storage layouts."""

    def __init__(self, manifest: DatasetManifest):
        if manifest.root is None:
            raise ValueError("manifest has no root directory; load it from disk or pass root")
        self._root = Path(manifest.root)
        self._packed = manifest.generator_config.storage == "packed"
        self._handle = None

    def __enter__(self):
        if self._packed:
            self._handle = open(self._root / "payloads.bin", "rb")
        return self

    def __exit__(self, *exc):
        if self._handle is not None:
            self._handle.close()
            self._handle = None
        return False

    def load(self, record: ChunkRecord) -> bytes:
        if self._packed:
            off, _, length = record.locator.partition(":")
            if self._handle is None:
                raise ValueError("reader used outside its context")
            self._handle.seek(int(off))
            payload = self._handle.read(int(length))
        else:
            payload = (self._root / record.locator).read_bytes()
        if len(payload) != record.size_class:
            raise ValueError(
                f"chunk {record.chunk_id}: payload length {len(payload)} != size class {record.size_class}"
            )
        digest = hashlib.sha256(payload).hexdigest()
        if digest != record.content_digest:
            raise ValueError(f"chunk {record.chunk_id}: content digest mismatch")
        return payload


def load_payload(manifest: DatasetManifest, record: ChunkRecord) -> bytes:
    with PayloadReader(manifest) as reader:
        return reader.load(record)


def save_manifest(manifest: DatasetManifest, path) -> None:
    cfg = manifest.generator_config
    header = "\t".join(
        [
            f"{_MANIFEST_MAGIC} version=1",
            f"seed={manifest.seed}",
            f"methods={','.join(cfg.methods)}",
            f"sizes={','.join(str(s) for s in cfg.sizes)}",
            f"storage={cfg.storage}",
            f"drop_first_chunk={int(cfg.drop_first_chunk)}",
            f"skipped={','.join(cfg.skipped)}",
        ]
    )
    lines = [header, "\t".join(_MANIFEST_COLUMNS)]
    for r in manifest.records:
        lines.append(
            "\t".join(
                [
                    r.chunk_id,
                    r.source_file,
                    r.filetype,
                    r.transform.kind,
                    r.transform.method,
                    str(r.size_class),
                    str(r.chunk_index),
                    r.locator,
                    r.content_digest,
                ]
            )
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_header(line: str, path) -> dict:
    fields = line.rstrip("\n").split("\t")
    if not fields or not fields[0].startswith(_MANIFEST_MAGIC):
        raise ValueError(f"{path}: not a manifest file (missing {_MANIFEST_MAGIC} header)")
    out = {}
    for item in fields[1:]:
        key, sep, value = item.partition("=")
        if sep:
            out[key] = value
    return out


def load_manifest(path) -> DatasetManifest:
    path = Path(path)
    with open(path, "r", encoding="utf-8") as fh:
        header = _parse_header(fh.readline(), path)
        columns = tuple(fh.readline().rstrip("\n").split("\t"))
        if columns != _MANIFEST_COLUMNS:
            raise ValueError(f"{path}: unexpected manifest columns {columns!r}")
        records = []
        for lineno, line in enumerate(fh, 3):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != len(_MANIFEST_COLUMNS):
                raise ValueError(f"{path}: malformed record at line {lineno}")
            records.append(
                ChunkRecord(
                    chunk_id=parts[0],
                    source_file=parts[1],
                    filetype=parts[2],
                    transform=Transform(parts[3], parts[4]),
                    size_class=int(parts[5]),
                    chunk_index=int(parts[6]),
                    locator=parts[7],
                    content_digest=parts[8],
                )
            )
    def _split(v):
        return tuple(x for x in v.split(",") if x)

    config = GeneratorConfig(
        methods=_split(header.get("methods", "")) or ALL_METHODS,
        sizes=tuple(int(s) for s in _split(header.get("sizes", ""))) or SIZE_CLASSES,
        storage=header.get("storage", "packed"),
        drop_first_chunk=header.get("drop_first_chunk", "0") == "1",
        out_dir=str(path.parent),
        skipped=_split(header.get("skipped", "")),
    )
    return DatasetManifest(
        records=tuple(records),
        seed=int(header.get("seed", "0")),
        generator_config=config,
        root=path.parent,
    )
