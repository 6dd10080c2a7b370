#!/usr/bin/env python3
"""Convert pretrained PyTorch weights into glanet array files.

  convert_weights.py vgg16 out/vgg16.glaf            # torchvision ImageNet VGG16 features
  convert_weights.py dino out/dino_vits16.glaf       # DINO ViT-S/16 (torch.hub)
  convert_weights.py state_dict in.pth out.glaf --heads 6

Downloads go through torchvision / torch.hub and need network access.
"""
import argparse
import json
import os
import struct

import torch

MAGIC = b"GLANETAF"
DTYPES = {torch.float32: 1, torch.float64: 2, torch.int64: 3, torch.uint8: 4}


def write_array_file(path, arrays, metadata):
    meta = json.dumps(metadata, sort_keys=True).encode()
    tmp = path + ".tmp"
    with open(tmp, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<IQ", 1, len(meta)))
        f.write(meta)
        f.write(struct.pack("<Q", len(arrays)))
        for name in sorted(arrays):
            t = arrays[name].detach().cpu().contiguous()
            if t.dtype not in DTYPES:
                t = t.float()
            raw = t.numpy().tobytes()
            key = name.encode()
            f.write(struct.pack("<I", len(key)))
            f.write(key)
            f.write(struct.pack("<BB", DTYPES[t.dtype], t.dim()))
            f.write(struct.pack("<%dq" % t.dim(), *t.shape))
            f.write(struct.pack("<Q", len(raw)))
            f.write(raw)
    os.replace(tmp, path)


def vgg16():
    import torchvision

    model = torchvision.models.vgg16(weights=torchvision.models.VGG16_Weights.IMAGENET1K_V1)
    keep = {k: v for k, v in model.state_dict().items() if k.startswith("features.")}
    return keep, {"source": "torchvision vgg16 IMAGENET1K_V1"}


def dino():
    model = torch.hub.load("facebookresearch/dino:main", "dino_vits16")
    return model.state_dict(), {"source": "dino_vits16", "num_heads": 6}


def main():
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("kind", choices=["vgg16", "dino", "state_dict"])
    p.add_argument("args", nargs="+", help="[input.pth] output.glaf")
    p.add_argument("--heads", type=int, default=None, help="attention heads (ViT state dicts)")
    a = p.parse_args()

    if a.kind == "state_dict":
        if len(a.args) != 2:
            p.error("state_dict needs an input and an output path")
        sd = torch.load(a.args[0], map_location="cpu")
        sd = sd.get("state_dict", sd) if isinstance(sd, dict) else sd
        arrays, meta = sd, {"source": os.path.basename(a.args[0])}
    else:
        arrays, meta = vgg16() if a.kind == "vgg16" else dino()
    if a.heads is not None:
        meta["num_heads"] = a.heads
    write_array_file(a.args[-1], arrays, meta)
    print("wrote %d arrays to %s" % (len(arrays), a.args[-1]))


if __name__ == "__main__":
    main()
