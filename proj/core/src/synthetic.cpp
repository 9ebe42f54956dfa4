#include "phpq/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "phpq/error.hpp"
#include "phpq/feature_io.hpp"

namespace phpq {
namespace {

void require(bool ok, const char* field, const std::string& why) {
  if (!ok) throw ParamError(std::string(field) + ": " + why);
}

// `count` distinct channels out of `channels`.
std::vector<std::size_t> pick_channels(std::size_t channels, std::size_t count,
                                       std::mt19937_64& rng) {
  std::vector<std::size_t> all(channels);
  std::iota(all.begin(), all.end(), std::size_t{0});
  std::shuffle(all.begin(), all.end(), rng);
  all.resize(count);
  return all;
}

}  // namespace

void SyntheticSpec::validate() const {
  require(meta_classes > 0, "meta_classes", "must be positive");
  require(subclasses_per_meta > 0, "subclasses_per_meta", "must be positive");
  require(samples_per_class > 0, "samples_per_class", "must be positive");
  for (const StageDims* s : {&dims.stage2, &dims.stage3, &dims.stage4}) {
    require(s->height > 0 && s->width > 0 && s->channels > 0, "stage_dims",
            "all extents must be positive");
  }
  require(patch_size > 0, "patch_size", "must be positive");
  require(patch_size <= dims.stage2.height && patch_size <= dims.stage2.width, "patch_size",
          "part patch does not fit in the stage2 map");
  require(dims.stage2.channels >= 4, "stage_dims", "stage2 needs at least 4 channels");
  require(dims.stage4.channels >= 2, "stage_dims", "stage4 needs at least 2 channels");
  require(noise >= 0.0, "noise", "must be >= 0");
  require(part_strength > 0.0, "part_strength", "must be positive");
  require(meta_strength >= 0.0, "meta_strength", "must be >= 0");
  require(clutter_strength >= 0.0, "clutter_strength", "must be >= 0");
  require(query_fraction > 0.0 && query_fraction < 1.0, "query_fraction", "must lie in (0, 1)");
}

SyntheticDataset generate_synthetic(const SyntheticSpec& spec) {
  spec.validate();
  std::mt19937_64 rng(spec.seed);
  const PyramidDims& dims = spec.dims;
  const std::size_t c2 = dims.stage2.channels;
  const std::size_t c4 = dims.stage4.channels;
  const std::size_t shared = std::max<std::size_t>(1, c2 / 8);
  const std::size_t own = std::max<std::size_t>(1, c2 / 8);
  const std::size_t meta_width = std::max<std::size_t>(1, c4 / 8);

  SyntheticDataset out;
  out.manifest.num_classes = spec.num_classes();
  out.manifest.dims = dims;

  std::vector<Vec> meta_signatures;
  for (std::size_t m = 0; m < spec.meta_classes; ++m) {
    const auto base = pick_channels(c2, shared, rng);
    Vec stage4_sig(c4, 0.0);
    for (auto ch : pick_channels(c4, meta_width, rng)) stage4_sig[ch] = 1.0;
    meta_signatures.push_back(stage4_sig);
    for (std::size_t s = 0; s < spec.subclasses_per_meta; ++s) {
      Vec sig(c2, 0.0);
      for (auto ch : base) sig[ch] = 1.0;
      for (auto ch : pick_channels(c2, own, rng)) sig[ch] = 1.0;
      out.subclass_signatures.push_back(std::move(sig));
    }
  }

  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> amp(0.8, 1.2);
  auto noisy_map = [&](const StageDims& s) {
    DenseArray a({s.height, s.width, s.channels});
    for (double& v : a.values()) v = std::max(0.0, spec.noise * gauss(rng));
    return a;
  };

  for (std::size_t label = 0; label < spec.num_classes(); ++label) {
    const Vec& sig = out.subclass_signatures[label];
    const Vec& meta = meta_signatures[label / spec.subclasses_per_meta];
    for (std::size_t n = 0; n < spec.samples_per_class; ++n) {
      FeatureMapSet sample;
      sample.label = static_cast<Label>(label);

      sample.stage2 = noisy_map(dims.stage2);
      std::uniform_int_distribution<std::size_t> row(0, dims.stage2.height - spec.patch_size);
      std::uniform_int_distribution<std::size_t> col(0, dims.stage2.width - spec.patch_size);
      const std::size_t r0 = row(rng);
      const std::size_t c0 = col(rng);
      const double strength = spec.part_strength * amp(rng);
      for (std::size_t r = r0; r < r0 + spec.patch_size; ++r)
        for (std::size_t c = c0; c < c0 + spec.patch_size; ++c)
          for (std::size_t ch = 0; ch < c2; ++ch) sample.stage2.at(r, c, ch) += strength * sig[ch];

      std::uniform_int_distribution<std::size_t> any_row(0, dims.stage2.height - 1);
      std::uniform_int_distribution<std::size_t> any_col(0, dims.stage2.width - 1);
      std::uniform_int_distribution<std::size_t> any_ch(0, c2 - 1);
      for (std::size_t k = 0; k < spec.clutter_spikes; ++k) {
        const std::size_t r = any_row(rng);
        const std::size_t c = any_col(rng);
        sample.stage2.at(r, c, any_ch(rng)) += spec.clutter_strength * amp(rng);
      }

      sample.stage3 = noisy_map(dims.stage3);

      sample.stage4 = noisy_map(dims.stage4);
      const double meta_amp = spec.meta_strength * amp(rng);
      for (std::size_t r = 0; r < dims.stage4.height; ++r)
        for (std::size_t c = 0; c < dims.stage4.width; ++c)
          for (std::size_t ch = 0; ch < c4; ++ch) sample.stage4.at(r, c, ch) += meta_amp * meta[ch];

      // match the f32 precision of the on-disk format
      for (DenseArray* stage : {&sample.stage2, &sample.stage3, &sample.stage4})
        for (double& v : stage->values()) v = static_cast<float>(v);

      out.manifest.items.push_back({0, static_cast<Label>(label), Split::train, ""});
      out.samples.push_back(std::move(sample));
    }
  }

  // Interleave classes so that ascending-id tie-breaks carry no label information.
  std::vector<std::size_t> order(out.samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<ManifestItem> items;
  std::vector<FeatureMapSet> samples;
  for (std::size_t i : order) {
    items.push_back(out.manifest.items[i]);
    items.back().id = static_cast<ItemId>(items.size() - 1);
    samples.push_back(std::move(out.samples[i]));
  }
  out.manifest.items = std::move(items);
  out.samples = std::move(samples);

  SplitProtocol protocol{Protocol::cub, spec.query_fraction, 0, spec.seed};
  const DatasetSplit split = split_dataset(out.manifest, protocol);
  for (std::size_t i : split.query) out.manifest.items[i].split = Split::query;
  return out;
}

std::filesystem::path write_dataset(const std::filesystem::path& dir, SyntheticDataset& dataset) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "features");
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    auto& item = dataset.manifest.items[i];
    char name[32];
    std::snprintf(name, sizeof(name), "%06lld.phpqf", static_cast<long long>(item.id));
    item.path = (fs::path("features") / name).generic_string();
    save_feature_set(dir / item.path, dataset.samples[i]);
  }
  const fs::path manifest_path = dir / "manifest.tsv";
  save_manifest(manifest_path, dataset.manifest);
  return manifest_path;
}

std::vector<FeatureMapSet> load_samples(const DatasetManifest& manifest,
                                        const std::filesystem::path& root) {
  std::vector<FeatureMapSet> out;
  out.reserve(manifest.items.size());
  for (const auto& item : manifest.items) {
    FeatureMapSet s = load_feature_set(root / item.path, manifest.dims);
    s.label = item.label;
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace phpq
