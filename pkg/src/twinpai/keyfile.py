"""Text key files: one ``name=value`` record per line.

Key material is lowercase hex without prefix; ``params.*`` fields are decimal.
Files holding secrets are created with mode 0600 where the platform allows.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, fields
from pathlib import Path

from .errors import KeyFileError
from .fastpai import PrivateKey, PublicKey, SecurityParams, keygen
from .modmath import RandomSource
from .threshold import PartialKey, SplitParams, split_key

PUBLIC_FILE = "public.key"
MASTER_FILE = "master.key"
SHARE_FILES = {1: "s0.key", 2: "s1.key"}


def _params_records(params: SecurityParams) -> dict[str, str]:
    return {f"params.{f.name}": str(getattr(params, f.name)) for f in fields(params)}


def _public_records(params: SecurityParams, pk: PublicKey) -> dict[str, str]:
    return {**_params_records(params), "pk.N": f"{pk.N:x}", "pk.h": f"{pk.h:x}"}


def write_key_file(path: str | Path, records: dict[str, str], private: bool = False) -> None:
    path = Path(path)
    text = "".join(f"{k}={v}\n" for k, v in records.items())
    if private:
        fd = os.open(path, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        try:
            os.chmod(path, 0o600)
        except OSError:
            pass
    else:
        path.write_text(text)


def read_key_file(path: str | Path) -> dict[str, str]:
    records = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise KeyFileError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        name, sep, value = line.partition("=")
        if not sep:
            raise KeyFileError(f"{path}:{lineno}: expected name=value")
        records[name.strip()] = value.strip()
    return records


def _hex(records: dict[str, str], name: str, path) -> int:
    try:
        return int(records[name], 16)
    except KeyError:
        raise KeyFileError(f"{path}: missing field {name}") from None
    except ValueError:
        raise KeyFileError(f"{path}: field {name} is not hex") from None


def _params(records: dict[str, str], path) -> SecurityParams:
    kwargs = {}
    for f in fields(SecurityParams):
        try:
            kwargs[f.name] = int(records[f"params.{f.name}"])
        except KeyError:
            raise KeyFileError(f"{path}: missing field params.{f.name}") from None
        except ValueError:
            raise KeyFileError(f"{path}: params.{f.name} is not decimal") from None
    return SecurityParams(**kwargs)


def load_public(path: str | Path) -> tuple[SecurityParams, PublicKey]:
    records = read_key_file(path)
    params = _params(records, path)
    return params, PublicKey(_hex(records, "pk.N", path), _hex(records, "pk.h", path), params.l_len)


def load_master(path: str | Path) -> tuple[SecurityParams, PublicKey, PrivateKey]:
    params, pk = load_public(path)
    alpha = _hex(read_key_file(path), "sk.alpha", path)
    return params, pk, PrivateKey(alpha, pk.N)


def load_share(path: str | Path) -> tuple[SecurityParams, PublicKey, PartialKey]:
    params, pk = load_public(path)
    records = read_key_file(path)
    share = PartialKey(_hex(records, "share.index", path), _hex(records, "share.value", path), pk.N)
    return params, pk, share


@dataclass
class KeySet:
    """Everything the data owner produces. Loaded sets may lack some parts."""

    params: SecurityParams
    pk: PublicKey
    sk: PrivateKey | None = None
    share1: PartialKey | None = None
    share2: PartialKey | None = None

    @classmethod
    def generate(
        cls, params: SecurityParams, rs: RandomSource, split: SplitParams | None = None
    ) -> "KeySet":
        pk, sk = keygen(params, rs)
        k1, k2 = split_key(sk, pk, split or SplitParams(params.sigma), rs)
        return cls(params, pk, sk, k1, k2)

    def require(self, *parts: str) -> None:
        missing = [p for p in parts if getattr(self, p) is None]
        if missing:
            names = {"sk": MASTER_FILE, "share1": SHARE_FILES[1], "share2": SHARE_FILES[2]}
            raise KeyFileError("missing key material: " + ", ".join(names[p] for p in missing))


def load_keyset(key_dir: str | Path) -> KeySet:
    """Load whatever of master.key, s0.key and s1.key is present in ``key_dir``."""
    key_dir = Path(key_dir)
    if not key_dir.is_dir():
        raise KeyFileError(f"{key_dir} is not a directory")
    loaders = {
        MASTER_FILE: load_master,
        SHARE_FILES[1]: load_share,
        SHARE_FILES[2]: load_share,
        PUBLIC_FILE: load_public,
    }
    found = {name: load(key_dir / name) for name, load in loaders.items() if (key_dir / name).exists()}
    if not found:
        raise KeyFileError(f"no key files in {key_dir}")
    params, pk = next(iter(found.values()))[:2]
    for name, loaded in found.items():
        if loaded[1].N != pk.N or loaded[0] != params:
            raise KeyFileError(f"{name} belongs to a different key")
    ks = KeySet(params, pk)
    if MASTER_FILE in found:
        ks.sk = found[MASTER_FILE][2]
    for index, name in SHARE_FILES.items():
        if name in found:
            share = found[name][2]
            if share.index != index:
                raise KeyFileError(f"{name} holds share {share.index}, expected {index}")
            setattr(ks, f"share{index}", share)
    return ks


def write_keyset(
    out_dir: str | Path,
    params: SecurityParams,
    pk: PublicKey,
    sk: PrivateKey,
    shares: tuple[PartialKey, PartialKey],
) -> dict[str, Path]:
    """Write public.key, master.key, s0.key and s1.key into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    public = _public_records(params, pk)
    paths = {"public": out / PUBLIC_FILE, "master": out / MASTER_FILE}
    write_key_file(paths["public"], public)
    write_key_file(paths["master"], {**public, "sk.alpha": f"{sk.alpha:x}"}, private=True)
    for share in shares:
        name = SHARE_FILES[share.index]
        paths[name] = out / name
        write_key_file(
            paths[name],
            {**public, "share.index": f"{share.index:x}", "share.value": f"{share.share:x}"},
            private=True,
        )
    return paths
