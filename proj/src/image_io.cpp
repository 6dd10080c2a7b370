#include "glanet/image_io.hpp"

#include <algorithm>
#include <cctype>
#include <string>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <torch/torch.h>

#include "glanet/errors.hpp"

namespace gla {

namespace {

// [3,H,W] in [-1,1] -> HxW BGR uint8.
cv::Mat to_bgr8(const torch::Tensor& image) {
  if (image.dim() != 3 || image.size(0) != 3) throw ConfigError("expected an image tensor [3,H,W]");
  auto hwc = ((image.detach().to(torch::kFloat32).cpu().clamp(-1, 1) + 1) * 127.5)
                 .round()
                 .to(torch::kUInt8)
                 .flip({0})
                 .permute({1, 2, 0})
                 .contiguous();
  cv::Mat mat(static_cast<int>(hwc.size(0)), static_cast<int>(hwc.size(1)), CV_8UC3, hwc.data_ptr<std::uint8_t>());
  return mat.clone();
}

torch::Tensor from_bgr8(const cv::Mat& bgr) {
  auto t = torch::from_blob(bgr.data, {bgr.rows, bgr.cols, 3}, torch::kUInt8).clone();
  return t.permute({2, 0, 1}).flip({0}).to(torch::kFloat32).div(255.0).contiguous();
}

}  // namespace

bool has_image_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg";
}

std::optional<torch::Tensor> decode_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) return std::nullopt;
  return from_bgr8(bgr);
}

void write_png(const std::filesystem::path& path, const torch::Tensor& image) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  if (!cv::imwrite(path.string(), to_bgr8(image))) throw DataError("failed to write " + path.string());
}

torch::Tensor attention_to_image(const torch::Tensor& attention) {
  auto gray = (attention.detach().to(torch::kFloat32).cpu().clamp(0, 1) * 255).round().to(torch::kUInt8).contiguous();
  cv::Mat g(static_cast<int>(gray.size(0)), static_cast<int>(gray.size(1)), CV_8UC1, gray.data_ptr<std::uint8_t>());
  cv::Mat colour;
  cv::applyColorMap(g, colour, cv::COLORMAP_JET);
  return from_bgr8(colour) * 2 - 1;
}

torch::Tensor attention_overlay(const torch::Tensor& image, const torch::Tensor& attention, double alpha) {
  return (1 - alpha) * image.detach().to(torch::kFloat32).cpu() + alpha * attention_to_image(attention);
}

torch::Tensor hconcat(const std::vector<torch::Tensor>& panels) {
  std::vector<torch::Tensor> cpu;
  cpu.reserve(panels.size());
  for (const auto& p : panels) cpu.push_back(p.detach().to(torch::kFloat32).cpu());
  return torch::cat(cpu, 2);
}

}  // namespace gla
