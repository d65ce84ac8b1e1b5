"""On-disk corpus layout: A/<name>.png, B/<name>.png, label/<name>.png.

Multi-class labels live in per-category subdirectories (label/<category>/
<name>.png, 255 = changed). The synthetic corpus writer emits the same
layout plus a manifest that fully reproduces the scenes.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .backends.scene import SyntheticScene
from .errors import DatasetError
from .raster import BitMask, load_image_png, load_mask_png, save_image_png, save_mask_png


@dataclass
class DatasetPair:
    name: str
    t1_path: Path
    t2_path: Path
    labels: dict[str, Path]  # category -> mask path; flat layout uses "change"


def scan_dataset(root: str | Path) -> list[DatasetPair]:
    root = Path(root)
    a_dir, b_dir, label_dir = root / "A", root / "B", root / "label"
    for d in (a_dir, b_dir, label_dir):
        if not d.is_dir():
            raise DatasetError(f"missing dataset directory {d}")

    names = sorted(p.stem for p in a_dir.glob("*.png"))
    if not names:
        raise DatasetError(f"no pairs found under {a_dir}")

    categories = sorted(p.name for p in label_dir.iterdir() if p.is_dir())
    pairs = []
    for name in names:
        t2 = b_dir / f"{name}.png"
        if not t2.exists():
            raise DatasetError(f"pair {name}: missing {t2}")
        if categories:
            labels = {}
            for cat in categories:
                mask_path = label_dir / cat / f"{name}.png"
                if mask_path.exists():
                    labels[cat] = mask_path
            if not labels:
                raise DatasetError(f"pair {name}: no label masks under {label_dir}")
        else:
            mask_path = label_dir / f"{name}.png"
            if not mask_path.exists():
                raise DatasetError(f"pair {name}: missing {mask_path}")
            labels = {"change": mask_path}
        pairs.append(DatasetPair(name=name, t1_path=a_dir / f"{name}.png", t2_path=t2, labels=labels))
    return pairs


def scan_label_dir(root: str | Path) -> dict[tuple[str, str], Path]:
    """Map (category, pair name) -> mask path for a label-layout directory.

    Flat PNGs are reported under the pseudo-category "change".
    """
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"not a directory: {root}")
    out: dict[tuple[str, str], Path] = {}
    for p in sorted(root.glob("*.png")):
        out[("change", p.stem)] = p
    for sub in sorted(d for d in root.iterdir() if d.is_dir()):
        for p in sorted(sub.glob("*.png")):
            out[(sub.name, p.stem)] = p
    if not out:
        raise DatasetError(f"no mask PNGs under {root}")
    return out


def load_mask(path: Path) -> BitMask:
    try:
        return load_mask_png(path)
    except OSError as exc:
        raise DatasetError(f"cannot read mask {path}: {exc}") from exc


def pair_name(index: int) -> str:
    return f"pair_{index:03d}"


def write_corpus(scenes: list[SyntheticScene], out_dir: str | Path, seed: Optional[int] = None) -> None:
    """Render scenes into the dataset layout; same scenes -> identical bytes."""
    out = Path(out_dir)
    (out / "A").mkdir(parents=True, exist_ok=True)
    (out / "B").mkdir(parents=True, exist_ok=True)
    (out / "label").mkdir(parents=True, exist_ok=True)

    manifest = {"seed": seed, "count": len(scenes), "scenes": []}
    for index, scene in enumerate(scenes):
        name = pair_name(index)
        t1, t2 = scene.render()
        save_image_png(t1, out / "A" / f"{name}.png")
        save_image_png(t2, out / "B" / f"{name}.png")
        for category in scene.categories():
            cat_dir = out / "label" / category
            cat_dir.mkdir(exist_ok=True)
            save_mask_png(scene.change_truth(category), cat_dir / f"{name}.png")
        manifest["scenes"].append({"name": name, **scene.to_dict()})

    with open(out / "manifest.json", "w", encoding="utf-8") as fp:
        json.dump(manifest, fp, indent=2, sort_keys=True)


def load_pair_images(pair: DatasetPair):
    try:
        return load_image_png(pair.t1_path), load_image_png(pair.t2_path)
    except OSError as exc:
        raise DatasetError(f"cannot read pair {pair.name}: {exc}") from exc
