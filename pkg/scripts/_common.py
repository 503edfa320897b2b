import argparse
from pathlib import Path


def parser(description: str, trials: int | None = None) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--out-dir", default="results", help="directory for CSV output")
    p.add_argument("--seed", type=int, default=0)
    if trials is not None:
        p.add_argument("--trials", type=int, default=trials)
    return p


def write(out_dir: str, name: str, text: str) -> Path:
    path = Path(out_dir)
    path.mkdir(parents=True, exist_ok=True)
    path = path / name
    path.write_text(text, encoding="utf-8")
    print(f"wrote {path}")
    return path
