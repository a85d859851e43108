"""Export pretrained torchvision classifiers to safetensors for camq.

Writes <out_dir>/<arch>.safetensors with the model's state_dict (batch-norm
step counters dropped). Downloads weights through torchvision on first use.

usage: export_weights.py OUT_DIR [ARCH ...]
"""
import argparse
from pathlib import Path

import torchvision.models as tvm
from safetensors.torch import save_file

WEIGHTS = {
    "vgg16": "VGG16_Weights.IMAGENET1K_V1",
    "resnet50": "ResNet50_Weights.IMAGENET1K_V1",
    "densenet121": "DenseNet121_Weights.IMAGENET1K_V1",
    "mobilenet_v2": "MobileNet_V2_Weights.IMAGENET1K_V1",
    "squeezenet1_0": "SqueezeNet1_0_Weights.IMAGENET1K_V1",
    "efficientnet_b0": "EfficientNet_B0_Weights.IMAGENET1K_V1",
}


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("out_dir", type=Path)
    parser.add_argument("archs", nargs="*", default=list(WEIGHTS))
    args = parser.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    for arch in args.archs:
        if arch not in WEIGHTS:
            parser.error(f"unknown architecture {arch}")
        model = getattr(tvm, arch)(weights=WEIGHTS[arch]).eval()
        state = {k: v.detach().contiguous() for k, v in model.state_dict().items()
                 if not k.endswith("num_batches_tracked")}
        path = args.out_dir / f"{arch}.safetensors"
        save_file(state, str(path))
        print(f"{arch}: {len(state)} tensors -> {path}")


if __name__ == "__main__":
    main()
