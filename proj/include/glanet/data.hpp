#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <torch/types.h>

#include "glanet/config.hpp"

namespace gla {

struct ImageSample {
  torch::Tensor pixels;  // [3,H,W], float32, values in [-1,1]
  std::string source;    // file path or synthetic tag
};

// Immutable, ordered collection of samples from one domain.
class DomainDataset {
 public:
  DomainDataset(Domain domain, std::vector<ImageSample> samples, std::uint64_t seed);

  Domain domain() const { return domain_; }
  std::uint64_t seed() const { return seed_; }
  std::size_t size() const { return samples_.size(); }
  std::int64_t resolution() const;
  const ImageSample& operator[](std::size_t i) const { return samples_.at(i); }
  const std::vector<ImageSample>& samples() const { return samples_; }

  // Visiting order for an epoch; a pure function of (seed, epoch).
  std::vector<std::size_t> order(std::int64_t epoch) const;

  // All samples stacked to [n,3,H,W].
  torch::Tensor stacked() const;

 private:
  Domain domain_;
  std::vector<ImageSample> samples_;
  std::uint64_t seed_;
};

struct UnpairedStep {
  std::size_t source_index;
  std::size_t target_index;
};

// One epoch of unpaired steps: the source visits every sample in its seeded
// order, each paired with a uniformly drawn target sample.
std::vector<UnpairedStep> unpaired_schedule(const DomainDataset& source, const DomainDataset& target,
                                            std::int64_t epoch);

// Loads every decodable PNG/JPEG in `dir` (sorted by file name), bilinearly
// resized to resolution x resolution and scaled to [-1,1]. Undecodable files
// are skipped with a warning on stderr.
DomainDataset load_folder(const std::filesystem::path& dir, std::int64_t resolution, std::uint64_t seed,
                          Domain domain = Domain::Source);

// [3,h,w] in [0,1] -> [3,R,R] in [-1,1].
torch::Tensor normalize_image(const torch::Tensor& rgb01, std::int64_t resolution);

struct SyntheticSpec {
  std::int64_t resolution = 64;
  std::int64_t count = 8;
  Motif motif = Motif::CirclesToSquares;
  std::uint64_t seed = 7;
  std::int64_t patch_size = 8;
};

// Two-domain toy corpus. Domains differ in palette/texture (global style) and
// in shape (circle vs square).
std::pair<DomainDataset, DomainDataset> generate_synthetic(const SyntheticSpec& spec);

// Writes source/ and target/ PNG folders under `dir`.
void dump_synthetic(const std::pair<DomainDataset, DomainDataset>& corpus, const std::filesystem::path& dir);

// Loads folders when configured, otherwise generates the synthetic corpus.
std::pair<DomainDataset, DomainDataset> load_domains(const RunConfig& cfg);

}  // namespace gla
