#include "glanet/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <iostream>
#include <numeric>
#include <random>

#include <torch/torch.h>

#include "glanet/errors.hpp"
#include "glanet/image_io.hpp"
#include "glanet/rng.hpp"

namespace gla {

namespace F = torch::nn::functional;

DomainDataset::DomainDataset(Domain domain, std::vector<ImageSample> samples, std::uint64_t seed)
    : domain_(domain), samples_(std::move(samples)), seed_(seed) {
  if (samples_.empty()) throw DataError("dataset for domain " + std::string(to_string(domain)) + " is empty");
  const auto res = samples_.front().pixels.size(1);
  for (const auto& s : samples_) {
    if (s.pixels.dim() != 3 || s.pixels.size(0) != 3 || s.pixels.size(1) != res || s.pixels.size(2) != res)
      throw ConfigError("sample " + s.source + " does not match the dataset shape [3," + std::to_string(res) + "," +
                        std::to_string(res) + "]");
  }
}

std::int64_t DomainDataset::resolution() const { return samples_.front().pixels.size(1); }

std::vector<std::size_t> DomainDataset::order(std::int64_t epoch) const {
  std::vector<std::size_t> idx(samples_.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(seed_, {stream::kDataOrder, static_cast<std::uint64_t>(epoch)}));
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

torch::Tensor DomainDataset::stacked() const {
  std::vector<torch::Tensor> all;
  all.reserve(samples_.size());
  for (const auto& s : samples_) all.push_back(s.pixels);
  return torch::stack(all);
}

std::vector<UnpairedStep> unpaired_schedule(const DomainDataset& source, const DomainDataset& target,
                                            std::int64_t epoch) {
  const auto order = source.order(epoch);
  std::mt19937_64 rng(derive_seed(source.seed(), {stream::kPairing, target.seed(), static_cast<std::uint64_t>(epoch)}));
  std::uniform_int_distribution<std::size_t> pick(0, target.size() - 1);
  std::vector<UnpairedStep> steps;
  steps.reserve(order.size());
  for (auto i : order) steps.push_back({i, pick(rng)});
  return steps;
}

torch::Tensor normalize_image(const torch::Tensor& rgb01, std::int64_t resolution) {
  auto x = rgb01.to(torch::kFloat32).unsqueeze(0);
  if (x.size(2) != resolution || x.size(3) != resolution) {
    x = F::interpolate(x, F::InterpolateFuncOptions()
                              .size(std::vector<std::int64_t>{resolution, resolution})
                              .mode(torch::kBilinear)
                              .align_corners(false));
  }
  return (x.squeeze(0) * 2 - 1).clamp(-1, 1).contiguous();
}

DomainDataset load_folder(const std::filesystem::path& dir, std::int64_t resolution, std::uint64_t seed,
                          Domain domain) {
  if (!std::filesystem::is_directory(dir)) throw DataError("not a directory: " + dir.string());
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir))
    if (entry.is_regular_file() && has_image_extension(entry.path())) files.push_back(entry.path());
  std::sort(files.begin(), files.end());
  if (files.empty()) throw DataError("no images found in " + dir.string());

  std::vector<ImageSample> samples;
  for (const auto& f : files) {
    auto img = decode_image(f);
    if (!img) {
      std::cerr << "warning: skipping undecodable image " << f.string() << '\n';
      continue;
    }
    samples.push_back({normalize_image(*img, resolution), f.string()});
  }
  if (samples.empty()) throw DataError("no images found in " + dir.string() + " (all files undecodable)");
  return DomainDataset(domain, std::move(samples), seed);
}

namespace {

using Rgb = std::array<float, 3>;

struct Painter {
  std::mt19937_64 rng;

  float uniform(float lo, float hi) { return std::uniform_real_distribution<float>(lo, hi)(rng); }

  Rgb jitter(const Rgb& base, float amount) {
    Rgb c{};
    for (int k = 0; k < 3; ++k) c[k] = std::clamp(base[k] + uniform(-amount, amount), 0.0f, 1.0f);
    return c;
  }
};

enum class Shape { Circle, Square };
enum class Fill { Solid, Striped };

struct Style {
  Rgb background;
  Rgb foreground;
  Rgb stripe;
  Shape shape;
  Fill fill;
};

// Renders one sample in [0,1].
torch::Tensor render(const Style& style, std::int64_t res, Painter& p) {
  const Rgb bg = p.jitter(style.background, 0.05f);
  const Rgb fg = p.jitter(style.foreground, 0.05f);
  const Rgb alt = p.jitter(style.stripe, 0.05f);
  const float r = p.uniform(res / 8.0f, res / 4.0f);
  const float cx = p.uniform(r, res - r);
  const float cy = p.uniform(r, res - r);
  const auto period = std::max<std::int64_t>(2, res / 16);

  auto img = torch::empty({3, res, res});
  auto a = img.accessor<float, 3>();
  for (std::int64_t y = 0; y < res; ++y) {
    for (std::int64_t x = 0; x < res; ++x) {
      const float dx = x + 0.5f - cx;
      const float dy = y + 0.5f - cy;
      const bool inside = style.shape == Shape::Circle ? dx * dx + dy * dy <= r * r
                                                       : std::abs(dx) <= r && std::abs(dy) <= r;
      const Rgb* c = &bg;
      if (inside) c = (style.fill == Fill::Striped && (y / period) % 2 == 1) ? &alt : &fg;
      for (int k = 0; k < 3; ++k) a[k][y][x] = (*c)[k];
    }
  }
  return img;
}

std::pair<Style, Style> motif_styles(Motif motif) {
  switch (motif) {
    case Motif::CirclesToSquares:
      return {Style{{0.12f, 0.16f, 0.42f}, {0.92f, 0.52f, 0.18f}, {0.92f, 0.52f, 0.18f}, Shape::Circle, Fill::Solid},
              Style{{0.86f, 0.86f, 0.76f}, {0.18f, 0.66f, 0.30f}, {0.18f, 0.66f, 0.30f}, Shape::Square, Fill::Solid}};
    case Motif::SolidToStriped:
      return {Style{{0.25f, 0.25f, 0.28f}, {0.80f, 0.20f, 0.20f}, {0.80f, 0.20f, 0.20f}, Shape::Circle, Fill::Solid},
              Style{{0.80f, 0.78f, 0.70f}, {0.10f, 0.30f, 0.75f}, {0.95f, 0.90f, 0.30f}, Shape::Square,
                    Fill::Striped}};
  }
  throw ConfigError("unknown motif");
}

}  // namespace

std::pair<DomainDataset, DomainDataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.count < 1) throw ConfigError("synthetic count must be >= 1");
  if (spec.patch_size < 1 || spec.resolution < spec.patch_size || spec.resolution % spec.patch_size != 0)
    throw ConfigError("synthetic resolution " + std::to_string(spec.resolution) +
                      " is not divisible by patch size " + std::to_string(spec.patch_size));

  const auto [source_style, target_style] = motif_styles(spec.motif);
  auto build = [&](Domain domain, const Style& style) {
    std::vector<ImageSample> samples;
    for (std::int64_t i = 0; i < spec.count; ++i) {
      Painter p{std::mt19937_64(derive_seed(
          spec.seed, {stream::kSynthetic, static_cast<std::uint64_t>(domain), static_cast<std::uint64_t>(i)}))};
      auto img = render(style, spec.resolution, p);
      char tag[64];
      std::snprintf(tag, sizeof(tag), "synthetic:%s:%03lld", std::string(to_string(domain)).c_str(),
                    static_cast<long long>(i));
      samples.push_back({(img * 2 - 1).contiguous(), tag});
    }
    return DomainDataset(domain, std::move(samples), spec.seed);
  };
  return {build(Domain::Source, source_style), build(Domain::Target, target_style)};
}

void dump_synthetic(const std::pair<DomainDataset, DomainDataset>& corpus, const std::filesystem::path& dir) {
  for (const auto* ds : {&corpus.first, &corpus.second}) {
    const auto sub = dir / std::string(to_string(ds->domain()));
    std::filesystem::create_directories(sub);
    for (std::size_t i = 0; i < ds->size(); ++i) {
      char name[32];
      std::snprintf(name, sizeof(name), "%04zu.png", i);
      write_png(sub / name, (*ds)[i].pixels);
    }
  }
}

std::pair<DomainDataset, DomainDataset> load_domains(const RunConfig& cfg) {
  const auto& d = cfg.data;
  if (d.source_dir.empty() != d.target_dir.empty())
    throw ConfigError("data.source_dir and data.target_dir must be set together");
  if (d.source_dir.empty()) {
    return generate_synthetic(
        SyntheticSpec{d.resolution, d.synthetic_count, d.motif, d.seed, cfg.style.patch_size});
  }
  return {load_folder(d.source_dir, d.resolution, d.seed, Domain::Source),
          load_folder(d.target_dir, d.resolution, d.seed, Domain::Target)};
}

}  // namespace gla
