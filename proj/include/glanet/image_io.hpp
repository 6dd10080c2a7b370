#pragma once

#include <filesystem>
#include <optional>
#include <vector>

#include <torch/types.h>

namespace gla {

// Decodes a PNG/JPEG file to an RGB float tensor [3,H,W] in [0,1]; nullopt if undecodable.
std::optional<torch::Tensor> decode_image(const std::filesystem::path& path);

// Writes an image tensor [3,H,W] with values in [-1,1] as 8-bit PNG.
void write_png(const std::filesystem::path& path, const torch::Tensor& image);

// Renders an attention map [H,W] in [0,1] as a false-colour image [3,H,W] in [-1,1].
torch::Tensor attention_to_image(const torch::Tensor& attention);

// Blends the false-colour attention over the image.
torch::Tensor attention_overlay(const torch::Tensor& image, const torch::Tensor& attention, double alpha = 0.5);

// Side-by-side panel of equally sized [3,H,W] images.
torch::Tensor hconcat(const std::vector<torch::Tensor>& panels);

bool has_image_extension(const std::filesystem::path& path);

}  // namespace gla
