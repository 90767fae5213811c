"""Synthetic raw-file generators for the six benchmark filetypes.

Each generator mimics the byte-level statistics that matter to the
classifier rather than producing decodable media: text has word structure
and ~4.3 bits/byte entropy, binaries mix opcode runs with zero padding and
address tables, media files carry framing plus high-entropy payloads with a
small byte-value bias. The bias levels are the tuning knobs that set how
detectable the compressed variants are at large chunk sizes.
"""

from __future__ import annotations

import zlib
from pathlib import Path

import numpy as np

from .seeding import derive_seed

_SYLLABLES = (
    "ta ri mon ver sel da lor ken mi ra vel tor ne sa li do gar eth um ba "
    "cor fin hal pre sto an der wel os tri lun mar tis ple nor vi ser qua"
).split()


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def _build_vocabulary(n_words: int = 600) -> list:
    rng = _rng(derive_seed("synth", "vocabulary"))
    words = []
    seen = set()
    while len(words) < n_words:
        k = int(rng.integers(1, 4))
        w = "".join(_SYLLABLES[int(i)] for i in rng.integers(0, len(_SYLLABLES), k))
        if w not in seen:
            seen.add(w)
            words.append(w)
    return words


_VOCAB = _build_vocabulary()
_ZIPF_P = 1.0 / (np.arange(len(_VOCAB)) + 2.7)
_ZIPF_P /= _ZIPF_P.sum()


def _fresh_sentence(rng: np.random.Generator) -> str:
    n = int(rng.integers(6, 14))
    idx = rng.choice(len(_VOCAB), size=n, p=_ZIPF_P)
    words = [_VOCAB[int(i)] for i in idx]
    if n > 8 and rng.random() < 0.5:
        words[int(rng.integers(3, n - 2))] += ","
    return " ".join(words).capitalize() + "."


def _table_block(rng: np.random.Generator) -> str:
    """Log-style rows with incrementing timestamps and counters."""
    rows = int(rng.integers(18, 60))
    t = int(rng.integers(10_000, 80_000))
    ident = int(rng.integers(1000, 9000))
    lines = []
    for _ in range(rows):
        t += int(rng.integers(1, 30))
        ident += 1
        val = rng.random() * 10
        word = _VOCAB[int(rng.choice(len(_VOCAB), p=_ZIPF_P))]
        lines.append(f"  {t:08d}  {ident:06d}  {val:8.4f}  {word:<12s}  ok")
    return "\n".join(lines) + "\n\n"


def gen_txt(seed: int, size: int) -> bytes:
    """Pseudo-prose: zipf-weighted vocabulary with phrase reuse, section
    headers, and occasional log-style tables. The reuse and the aligned
    numeric tables are what give the deflate stream of real documents its
    long back-references and skewed literal distribution."""
    rng = _rng(seed)
    out = []
    total = 0
    sentences = []
    line_len = 0
    paragraph_left = int(rng.integers(4, 9))
    section = 1
    while total < size:
        if paragraph_left <= 0:
            if rng.random() < 0.30:
                piece = "\n\n" + _table_block(rng)
                out.append(piece)
                total += len(piece)
            piece = f"\n\n{section}. {_fresh_sentence(rng)}\n\n"
            section += 1
            paragraph_left = int(rng.integers(4, 9))
            line_len = 0
        elif sentences and rng.random() < 0.38:
            k = min(len(sentences), 64)
            weights = 1.0 / (np.arange(k) + 1.5)
            pick = int(rng.choice(k, p=weights / weights.sum()))
            piece = sentences[-1 - pick] + " "
            paragraph_left -= 1
        else:
            s = _fresh_sentence(rng)
            sentences.append(s)
            piece = s + " "
            paragraph_left -= 1
        line_len += len(piece)
        if line_len > 76:
            piece = piece.rstrip() + "\n"
            line_len = 0
        out.append(piece)
        total += len(piece)
    return "".join(out).encode("ascii")[:size]


def _biased_bytes(rng: np.random.Generator, n: int, eps: float) -> np.ndarray:
    """Uniform bytes, except a fraction eps is redrawn from the low half.

    Per-value probabilities become (1-eps)/256 + eps/128 below 128 and
    (1-eps)/256 above, a bias the chi-square test resolves at 64 KB but
    not at 1 KB once it has passed through a compressor.
    """
    data = rng.integers(0, 256, n, dtype=np.uint8)
    mask = rng.random(n) < eps
    k = int(mask.sum())
    if k:
        data[mask] = rng.integers(0, 128, k, dtype=np.uint8)
    return data


def gen_bin(seed: int, size: int) -> bytes:
    """Executable-like: opcode runs, zero padding, address tables, symbol
    strings, and a small high-entropy data section."""
    rng = _rng(seed)
    alphabet = rng.choice(256, size=12, replace=False).astype(np.uint8)
    weights = 1.0 / (np.arange(12) + 1.5)
    weights /= weights.sum()
    segments = []
    total = 0
    while total < size:
        kind = rng.choice(5, p=[0.48, 0.22, 0.12, 0.10, 0.08])
        length = int(rng.integers(512, 8192))
        if kind == 0:
            ops = alphabet[rng.choice(12, size=length // 2, p=weights)]
            operands = rng.integers(0, 256, length // 2, dtype=np.uint8)
            small = rng.random(length // 2) < 0.55
            operands[small] = rng.choice(
                np.array([0, 1, 2, 4, 8, 16, 32, 0xC0, 0xE8, 0xFF], dtype=np.uint8),
                size=int(small.sum()),
            )
            seg = np.empty(2 * (length // 2), dtype=np.uint8)
            seg[0::2] = ops
            seg[1::2] = operands
        elif kind == 1:
            seg = np.zeros(length, dtype=np.uint8)
            nops = rng.random(length) < 0.01
            seg[nops] = 0x90
        elif kind == 2:
            base = int(rng.integers(0x400000, 0x800000))
            stride = int(rng.choice(np.array([4, 8, 16, 24])))
            addrs = base + np.arange(length // 4, dtype=np.uint32) * stride
            seg = addrs.astype("<u4").view(np.uint8)
        elif kind == 3:
            names = []
            n = 0
            while n < length:
                name = f"_sym_{int(rng.integers(0, 0xFFFF)):04x}_{int(rng.integers(0, 0xFF)):02x}\x00"
                names.append(name)
                n += len(name)
            seg = np.frombuffer("".join(names).encode("ascii")[:length], dtype=np.uint8)
        else:
            seg = rng.integers(0, 256, length, dtype=np.uint8)
        segments.append(seg)
        total += len(seg)
    return np.concatenate(segments).tobytes()[:size]


def gen_pdf(seed: int, size: int) -> bytes:
    """Document-like: ASCII object scaffolding around deflate-compressed
    content streams, with a fixed-width cross-reference table."""
    rng = _rng(seed)
    parts = [b"%PDF-1.5\n%\xe2\xe3\xcf\xd3\n"]
    total = len(parts[0])
    obj = 1
    offsets = []
    while total < size:
        offsets.append(total)
        if rng.random() < 0.55:
            raw = gen_txt(int(rng.integers(0, 2**32)), int(rng.integers(800, 6000)))
            stream = zlib.compress(raw, 6)
            head = f"{obj} 0 obj\n<< /Length {len(stream)} /Filter /FlateDecode >>\nstream\n".encode()
            piece = head + stream + b"\nendstream\nendobj\n"
        else:
            ops = []
            for _ in range(int(rng.integers(20, 90))):
                x, y = rng.integers(0, 612, 2)
                ops.append(f"{int(x)} {int(y)} m {int(x) + 10} {int(y) + 12} l S")
            body = "\n".join(ops)
            piece = (
                f"{obj} 0 obj\n<< /Type /Page /MediaBox [0 0 612 792] >>\n"
                f"stream\n{body}\nendstream\nendobj\n"
            ).encode()
        parts.append(piece)
        total += len(piece)
        obj += 1
    xref = ["xref", f"0 {obj}", "0000000000 65535 f "]
    xref += [f"{off:010d} 00000 n " for off in offsets]
    xref.append(f"trailer\n<< /Size {obj} >>\nstartxref\n{offsets[0]}\n%%EOF\n")
    parts.append("\n".join(xref).encode("ascii"))
    return b"".join(parts)[:size]


def gen_mp3(seed: int, size: int, eps: float = 0.14) -> bytes:
    """Audio-like: frame headers and near-zero side info around biased
    high-entropy main data, with occasional metadata tags."""
    rng = _rng(seed)
    parts = [b"ID3\x03\x00\x00\x00\x00\x00\x40" + bytes(54)]
    total = len(parts[0])
    while total < size:
        if rng.random() < 0.004:
            tag = gen_txt(int(rng.integers(0, 2**32)), int(rng.integers(60, 200)))
            piece = b"TXXX\x00\x00" + tag
        else:
            header = bytes([0xFF, 0xFB, 0x90, int(rng.integers(0, 4)) * 64])
            side = np.zeros(32, dtype=np.uint8)
            side[rng.random(32) < 0.3] = rng.integers(0, 64)
            main = _biased_bytes(rng, 381, eps)
            piece = header + side.tobytes() + main.tobytes()
        parts.append(piece)
        total += len(piece)
    return b"".join(parts)[:size]


def gen_img(seed: int, size: int, eps: float = 0.14) -> bytes:
    """Image-like: marker segments and coding tables, then a long biased
    entropy-coded scan with byte stuffing and restart markers."""
    rng = _rng(seed)
    q = (np.clip(np.arange(64) * 2 + rng.integers(2, 16), 1, 255)).astype(np.uint8)
    header = (
        b"\xff\xd8\xff\xe0\x00\x10JFIF\x00\x01\x01\x01\x00H\x00H\x00\x00"
        + b"\xff\xdb\x00\x43\x00"
        + q.tobytes()
        + b"\xff\xc0\x00\x11\x08\x02\x00\x03\x00\x03\x01\x22\x00\x02\x11\x01\x03\x11\x01"
        + b"\xff\xc4\x00\x1f\x00"
        + bytes(range(1, 30))
        + b"\xff\xda\x00\x0c\x03\x01\x00\x02\x11\x03\x11\x00\x3f\x00"
    )
    parts = [header]
    total = len(header)
    block = 0
    while total < size:
        scan = _biased_bytes(rng, 4096, eps)
        stuffed = []
        ff = np.flatnonzero(scan == 0xFF)
        prev = 0
        raw = scan.tobytes()
        for i in ff:
            stuffed.append(raw[prev : i + 1] + b"\x00")
            prev = i + 1
        stuffed.append(raw[prev:])
        piece = b"".join(stuffed) + bytes([0xFF, 0xD0 + (block % 8)])
        block += 1
        parts.append(piece)
        total += len(piece)
    parts.append(b"\xff\xd9")
    return b"".join(parts)[:size]


def gen_video(seed: int, size: int, eps: float = 0.22) -> bytes:
    """Transport-stream-like: 188-byte packets with sync bytes, incrementing
    continuity counters, periodic table packets, and biased payloads."""
    rng = _rng(seed)
    n_packets = size // 188 + 2
    parts = []
    counter = 0
    for p in range(n_packets):
        if p % 40 == 0:
            body = b"\x47\x40\x00\x10\x00" + bytes(12) + b"\xff" * 171
        elif p % 20 == 0:
            pcr = int(rng.integers(0, 2**33)).to_bytes(6, "big")
            stuffing = b"\xff" * 100
            payload = _biased_bytes(rng, 188 - 4 - 2 - 6 - 100, eps).tobytes()
            body = bytes([0x47, 0x01, 0x00, 0x30 | (counter % 16), 107, 0x10]) + pcr + stuffing + payload
            counter += 1
        else:
            payload = _biased_bytes(rng, 184, eps).tobytes()
            body = bytes([0x47, 0x01, 0x00, 0x10 | (counter % 16)]) + payload
            counter += 1
        parts.append(body)
    return b"".join(parts)[:size]


_GENERATORS = {
    "IMG": gen_img,
    "PDF": gen_pdf,
    "TXT": gen_txt,
    "MP3": gen_mp3,
    "VIDEO": gen_video,
    "BIN": gen_bin,
}

_EXTENSIONS = {
    "IMG": "jpg",
    "PDF": "pdf",
    "TXT": "txt",
    "MP3": "mp3",
    "VIDEO": "ts",
    "BIN": "bin",
}

# highly compressible categories get larger raw files so the compressed
# variants still yield comparable chunk counts per size class
_SIZE_MULTIPLIERS = {
    "IMG": 1.0,
    "PDF": 1.35,
    "TXT": 3.5,
    "MP3": 1.0,
    "VIDEO": 1.0,
    "BIN": 1.8,
}


def generate_raw_tree(dest, files_per_type: int, bytes_per_file: int, seed: int) -> Path:
    """Write a six-category raw tree (img/ pdf/ txt/ mp3/ video/ bin/) with
    equal file counts, deterministically from the seed."""
    dest = Path(dest)
    for ft, gen in _GENERATORS.items():
        d = dest / ft.lower()
        d.mkdir(parents=True, exist_ok=True)
        for i in range(files_per_type):
            n = int(bytes_per_file * _SIZE_MULTIPLIERS[ft])
            data = gen(derive_seed(seed, "raw", ft, i), n)
            (d / f"{ft.lower()}_{i:03d}.{_EXTENSIONS[ft]}").write_bytes(data)
    return dest
