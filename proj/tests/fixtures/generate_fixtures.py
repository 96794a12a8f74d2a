#!/usr/bin/env python3
"""Regenerates the checked-in test fixtures. Deterministic; stdlib only.

    python3 tests/fixtures/generate_fixtures.py
"""
import hashlib
import json
import math
import random
from pathlib import Path

HERE = Path(__file__).resolve().parent
ROOT = HERE.parent.parent
rng = random.Random(20161103)


def closed(ring):
    return ring + [ring[0]]


# Rough outlines, [lon, lat]. IT carries a hole where VA sits; FJ crosses the antimeridian.
VA_RING = [[12.44, 41.89], [12.46, 41.89], [12.46, 41.91], [12.44, 41.91]]
COUNTRIES = {
    "AE": [[[[51.0, 22.5], [56.5, 22.5], [56.5, 26.0], [54.0, 24.5], [51.0, 24.0]]]],
    "DE": [[[[7.0, 47.0], [15.0, 47.0], [15.0, 55.0], [9.0, 55.0], [7.0, 51.0]]]],
    "EG": [[[[25.0, 22.0], [35.0, 22.0], [35.0, 31.5], [25.0, 31.5]]]],
    "FJ": [[[[177.0, -20.0], [-178.0, -20.0], [-178.0, -15.0], [177.0, -15.0]]]],
    "FR": [[[[-4.0, 43.0], [3.0, 42.0], [7.0, 43.5], [7.0, 51.0], [2.5, 51.0], [-4.0, 48.5]]]],
    "IT": [[[[7.0, 44.0], [11.5, 41.0], [16.0, 37.0], [18.5, 40.0], [13.5, 46.5], [7.0, 47.0]], VA_RING[::-1]]],
    "NZ": [[[[166.0, -47.0], [179.0, -47.0], [179.0, -34.0], [172.0, -34.0]]]],
    "SD": [[[[22.0, 9.0], [38.0, 9.0], [38.0, 22.0], [22.0, 22.0]]]],
    "US": [
        [[[-125.0, 25.0], [-67.0, 25.0], [-67.0, 49.0], [-125.0, 49.0]]],
        [[[-160.0, 18.0], [-154.0, 18.0], [-154.0, 23.0], [-160.0, 23.0]]],
    ],
    "VA": [[VA_RING]],
}

# Sampling boxes (lat_min, lat_max, lon_min, lon_max) that sit inside each outline.
INSIDE = {
    "AE": (22.8, 23.9, 51.5, 56.0),
    "DE": (48.0, 54.0, 9.5, 14.5),
    "EG": (22.5, 31.0, 25.5, 34.5),
    "FJ": (-19.5, -15.5, 177.5, 181.5),
    "FR": (44.0, 49.5, 0.0, 6.5),
    "IT": (44.5, 46.0, 8.0, 12.0),
    "NZ": (-46.0, -35.0, 173.5, 178.5),
    "SD": (9.5, 21.5, 22.5, 37.5),
    "US": (26.0, 48.0, -120.0, -70.0),
    "VA": (41.895, 41.905, 12.445, 12.455),
}
WEIGHTS = {"US": 120, "IT": 80, "FR": 70, "DE": 60, "EG": 45, "AE": 40, "NZ": 35, "SD": 18, "FJ": 12, "VA": 8}
OCEAN = [(0.0, -30.0), (-40.0, -10.0), (35.0, -40.0), (-60.0, 60.0)]

SIZES = [(960, 720), (720, 960), (800, 600), (700, 700), (640, 480), (480, 640), (320, 240), (900, 600)]
SOURCES = ["flickr", "mapillary", "unsplash"]


def record_id(source, native):
    return hashlib.blake2b(source.encode() + b"\0" + native.encode(), digest_size=16).hexdigest()


def write_lines(name, rows):
    (HERE / name).write_text("".join(r + "\n" for r in rows))


def boundaries():
    feats = []
    for code, polys in COUNTRIES.items():
        polys = [[closed(r) for r in p] for p in polys]
        geom = {"type": "Polygon", "coordinates": polys[0]} if len(polys) == 1 else {
            "type": "MultiPolygon", "coordinates": polys}
        feats.append({"type": "Feature", "properties": {"code": code}, "geometry": geom})
    (HERE / "boundaries.geojson").write_text(json.dumps({"type": "FeatureCollection", "features": feats}, indent=1) + "\n")


def cities():
    rows = ["# name\tcountry_code\tlat\tlon\tpopulation"]
    names = ["Springfield", "Riverside", "Fairview", "Franklin", "Greenville", "Bristol", "Clinton", "Salem",
             "Madison", "Georgetown", "Arlington", "Ashland", "Dover", "Milton", "Newport", "Oxford", "Burlington",
             "Jackson", "Kingston", "Lebanon", "Marion", "Mount Vernon", "Auburn", "Dayton", "Lexington"]
    codes = list(INSIDE)
    for i in range(50):
        code = codes[i % len(codes)]
        lat0, lat1, lon0, lon1 = INSIDE[code]
        lat, lon = rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)
        if lon >= 180:
            lon -= 360
        pop = rng.randint(50, 999) if i % 4 == 1 and i < 48 else rng.randint(1000, 2_000_000)
        rows.append(f"{names[i % len(names)]}\t{code}\t{lat:.5f}\t{lon:.5f}\t{pop}")
    write_lines("cities.tsv", rows)


def keywords():
    write_lines("keywords.txt", ["# fixture keywords", "church", "street", "market", "bridge", "square", "tower",
                                 "station", "harbour"])


def taxonomy():
    by_super = {"urban": [], "natural": [], "indoor": []}
    for line in (ROOT / "data" / "scene_taxonomy.tsv").read_text().splitlines():
        if not line or line.startswith("#"):
            continue
        cid, name, sup = line.split("\t")
        by_super[sup].append((int(cid), name))
    black = set()
    for line in (ROOT / "data" / "scene_blacklist.txt").read_text().splitlines():
        line = line.strip()
        if line and not line.startswith("#"):
            black.add(line)
    urban_ok = [c for c, n in by_super["urban"] if n not in black]
    urban_black = [c for c, n in by_super["urban"] if n in black]
    other = [c for c, _ in by_super["natural"] + by_super["indoor"]]
    return urban_ok, urban_black, other


def top5(kind, urban_ok, urban_black, other):
    # kind: urban | rural | boundary | blacklisted
    if kind == "boundary":
        cats = rng.sample(urban_ok, 2) + rng.sample(other, 3)
        probs = [0.3, 0.2, 0.25, 0.1, 0.05]  # urban sum exactly 0.5
        pairs = sorted(zip(cats, probs), key=lambda p: -p[1])
        return [[c, p] for c, p in pairs]
    if kind == "blacklisted":
        cats = [rng.choice(urban_black)] + rng.sample(urban_ok, 4)
        raw = [0.62, 0.12, 0.08, 0.05, 0.03]
    elif kind == "urban":
        cats = rng.sample(urban_ok, 4) + rng.sample(other, 1)
        rng.shuffle(cats)
        raw = sorted((rng.uniform(0.02, 0.5) for _ in range(5)), reverse=True)
        s = sum(raw) / rng.uniform(0.8, 0.98)
        raw = [x / s for x in raw]
        # make sure the urban mass clears the cut
        if sum(p for c, p in zip(cats, raw) if c in set(urban_ok)) <= 0.55:
            cats = rng.sample(urban_ok, 5)
    else:
        cats = rng.sample(other, 4) + rng.sample(urban_ok, 1)
        raw = sorted((rng.uniform(0.02, 0.5) for _ in range(5)), reverse=True)
        s = sum(raw) / rng.uniform(0.8, 0.98)
        raw = [x / s for x in raw]
    return [[c, round(p, 6)] for c, p in zip(cats, raw)]


def manifest_and_evidence():
    urban_ok, urban_black, other = taxonomy()
    codes, weights = zip(*WEIGHTS.items())
    records, scene, faces = [], [], []
    n = 500
    for i in range(n):
        native = f"fx{i:04d}"
        source = SOURCES[i % 3]
        if i % 50 == 49:
            lat, lon = OCEAN[(i // 50) % len(OCEAN)]
        else:
            code = rng.choices(codes, weights)[0]
            lat0, lat1, lon0, lon1 = INSIDE[code]
            lat, lon = rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)
            if lon >= 180:
                lon -= 360
        w, h = SIZES[i % len(SIZES)]
        rec = {"id": record_id(source, native), "source": source, "lat": round(lat, 6), "lon": round(lon, 6),
               "width": w, "height": h, "path": f"{native}.jpg", "status": "raw"}
        u = rng.random()
        if u < 0.06:
            pass  # no capture date
        elif u < 0.14:
            rec["captured_at"] = f"{rng.randint(2004, 2011)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        else:
            rec["captured_at"] = f"{rng.randint(2012, 2019)}-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"
        rec["is_color"] = rng.random() >= 0.05
        records.append(rec)

        if i % 97 == 13:
            continue  # no evidence yet: lands in the needs-evidence queue
        if i == 222:
            scene.append({"id": rec["id"], "error": "truncated JPEG"})
            continue
        r = rng.random()
        kind = "urban" if r < 0.72 else "rural" if r < 0.88 else "blacklisted" if r < 0.95 else "boundary"
        scene.append({"id": rec["id"], "scene_top5": top5(kind, urban_ok, urban_black, other)})
        boxes = []
        fr = rng.random()
        if fr < 0.12:
            for _ in range(rng.randint(1, 3)):
                bw, bh = rng.uniform(20, w / 4), rng.uniform(20, h / 4)
                boxes.append([round(rng.uniform(0, w - bw), 2), round(rng.uniform(0, h - bh), 2), round(bw, 2),
                              round(bh, 2)])
        elif fr < 0.18:
            bw, bh = w * 0.45, h * 0.5  # one large face
            boxes.append([round(w * 0.2, 2), round(h * 0.1, 2), round(bw, 2), round(bh, 2)])
        faces.append({"id": rec["id"], "faces": boxes})

    write_lines("manifest.jsonl", ["# format: geocurate-manifest", "# origin: synthetic fixture"] +
                [json.dumps(r, sort_keys=True, separators=(",", ":")) for r in records])
    write_lines("evidence_scene.jsonl", [json.dumps(r, separators=(",", ":")) for r in scene])
    write_lines("evidence_faces.jsonl", [json.dumps(r, separators=(",", ":")) for r in faces])


def softmax(xs):
    m = max(xs)
    e = [math.exp(x - m) for x in xs]
    s = sum(e)
    return [v / s for v in e]


def predictions(k=7, n=140):
    five = [json.dumps({"header": {"num_classes": k, "layout": "five_crop", "scores": "probabilities",
                                   "crop_order": ["UL", "UR", "LL", "LR", "C"]}})]
    single = [json.dumps({"header": {"num_classes": k, "layout": "single", "scores": "probabilities",
                                     "strategy": "resize224"}})]
    for i in range(n):
        truth = i % k
        base = [rng.gauss(0, 1) for _ in range(k)]
        base[truth] += 1.6
        crops = []
        for c in range(5):
            bump = 0.6 if c == 4 else 0.0
            logits = [b + rng.gauss(0, 1.1) for b in base]
            logits[truth] += bump
            crops.append([round(p, 12) for p in softmax(logits)])
        five.append(json.dumps({"id": f"p{i:03d}", "true_class": truth, "scores": crops}))
        logits = [b + rng.gauss(0, 1.3) for b in base]
        single.append(json.dumps({"id": f"p{i:03d}", "true_class": truth,
                                  "scores": [round(p, 12) for p in softmax(logits)]}))
    write_lines("predictions_five_crop.jsonl", five)
    write_lines("predictions_resize224.jsonl", single)

    # GPS baseline: ranked coordinate guesses; class ids follow grouping_k7.tsv.
    members = {0: ["AE"], 1: ["DE"], 2: ["EG", "SD"], 3: ["FJ", "NZ"], 4: ["FR"], 5: ["IT", "VA"], 6: ["US"]}
    gps = [json.dumps({"header": {"num_classes": k, "layout": "gps", "method": "GPS baseline"}})]
    for i in range(60):
        truth = i % k
        hyps = []
        for j in range(3):
            cls = truth if rng.random() < (0.55 if j == 0 else 0.3) else rng.randrange(k)
            code = rng.choice(members[cls])
            lat0, lat1, lon0, lon1 = INSIDE[code]
            lat, lon = rng.uniform(lat0, lat1), rng.uniform(lon0, lon1)
            if lon >= 180:
                lon -= 360
            hyps.append([round(lat, 5), round(lon, 5)])
        if i % 20 == 7:
            hyps = [[0.0, -30.0]]  # open ocean: no class
        gps.append(json.dumps({"id": f"g{i:03d}", "true_class": truth, "gps": hyps}))
    write_lines("predictions_gps.jsonl", gps)


def grouping():
    write_lines("grouping_k7.tsv", [
        "# version: fixture-k7",
        "AE 0 AE", "DE 1 DE", "EG 2 EG+SD", "SD 2 EG+SD", "FJ 3 FJ+NZ", "NZ 3 FJ+NZ", "FR 4 FR",
        "IT 5 IT+VA", "VA 5 IT+VA", "US 6 US"])


def config():
    (HERE / "pipeline.yaml").write_text("""\
paths:
  cities: cities.tsv
  keywords: keywords.txt
  boundaries: boundaries.geojson
  taxonomy: ../../data/scene_taxonomy.tsv
  blacklist: ../../data/scene_blacklist.txt
  grouping: grouping_k7.tsv
thresholds:
  urban: 0.5
  blacklist: 0.5
  face: 0.10
  cutoff_year: 2012
  grey_channel_diff: 8
  grey_fraction: 0.995
  fallback_km: 25
  min_population: 1000
split:
  ratios: "0.96,0.02,0.02"
  seed: 7
fusion: average
classes: 7
bbox_half_width_km: 10
""")


if __name__ == "__main__":
    boundaries()
    cities()
    keywords()
    manifest_and_evidence()
    predictions()
    grouping()
    config()
