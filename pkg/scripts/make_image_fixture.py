#!/usr/bin/env python3
"""Generate the committed image-set fixture for dimension statistics.

Image sizes are chosen by hand so the expected histogram can be frozen in
the tests: ratios land in the 50/100/130/200 bins plus the overflow bin, and
the 224x224 / 225x225 pair pins the "larger than 224" boundary.
"""

from pathlib import Path

from PIL import Image

FIXTURE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "imageset"

SIZES = {
    "site_a": {"01.jpg": (224, 224), "02.jpg": (225, 225),
               "03.jpg": (100, 50), "04.jpg": (50, 100)},
    "site_b": {"01.jpg": (320, 240), "02.jpg": (640, 160)},
}

MANIFEST = """site_id,url,label,split,language,screenshot_path,text_path
site_a,http://a.test,alpha,test,,,
site_b,http://b.test,beta,test,,,
site_c,http://c.test,alpha,test,,,
"""


def main():
    for site, files in SIZES.items():
        d = FIXTURE / "images" / site
        d.mkdir(parents=True, exist_ok=True)
        for name, (w, h) in files.items():
            Image.new("L", (w, h), color=90).save(d / name, format="JPEG", quality=50)
    # one unreadable file and one empty site directory
    (FIXTURE / "images" / "site_b" / "03.jpg").write_bytes(b"not a jpeg")
    (FIXTURE / "images" / "site_c").mkdir(parents=True, exist_ok=True)
    (FIXTURE / "manifest.csv").write_text(MANIFEST)
    print("wrote fixture under", FIXTURE)


if __name__ == "__main__":
    main()
