#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mtdtl/arch/network.hpp"
#include "mtdtl/core/config.hpp"
#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/tensor_io.hpp"

namespace mtdtl::arch {

inline std::string join_sources(const std::vector<std::string>& sources) {
  std::string s;
  for (std::size_t i = 0; i < sources.size(); ++i) s += (i ? "," : "") + sources[i];
  return s;
}

inline std::vector<std::string> split_sources(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

/// Writes the network structure (strategy, widths, every layer spec per chain) into a manifest.
inline void describe_network(const StrategySpec& spec, io::KeyValueConfig& m) {
  m.set("strategy", strategy_name(spec.kind));
  m.set("sources", join_sources(spec.sources));
  m.set("feature_dim", std::to_string(spec.feature_dim));
  m.set("factor_dim", std::to_string(spec.factor_dim));
  m.set("in_channels", std::to_string(spec.in_channels));
  m.set("dropout", io::fmt_real(spec.dropout));
  const auto l = layout(spec);
  auto emit = [&](const std::string& chain, const std::vector<LayerSpec>& specs) {
    m.set("chain." + chain + ".layers", std::to_string(specs.size()));
    for (std::size_t i = 0; i < specs.size(); ++i) m.set("chain." + chain + "." + std::to_string(i), specs[i].describe());
  };
  emit("trunk", l.trunk);
  for (std::size_t s = 0; s < spec.sources.size(); ++s) {
    emit("branch." + std::to_string(s), l.branches[s]);
    emit("head." + std::to_string(s), l.heads[s]);
  }
}

inline StrategySpec spec_from_manifest(const io::KeyValueConfig& m) {
  StrategySpec spec;
  spec.kind = parse_strategy(m.get("strategy"));
  spec.sources = split_sources(m.get("sources"));
  spec.feature_dim = m.get_number<std::size_t>("feature_dim");
  spec.factor_dim = m.get_number<std::size_t>("factor_dim");
  spec.in_channels = m.get_number<std::size_t>("in_channels");
  spec.dropout = m.get_number<double>("dropout");
  spec.validate();
  return spec;
}

/// All tensors (including running statistics) of every chain as concatenated MRT1 records.
template <typename T>
void save_params(const std::filesystem::path& path, const BranchedNetwork<T>& net) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open for writing: " + path.string());
  for (const auto* chain : net.chains())
    for (const auto* t : chain->params.all()) io::write_tensor(os, *t);
  if (!os) throw IoError("write failed: " + path.string());
}

template <typename T>
void load_params(const std::filesystem::path& path, BranchedNetwork<T>& net) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("missing file: " + path.string());
  for (auto* chain : net.chains()) {
    for (auto* t : chain->params.all()) {
      auto loaded = io::read_tensor<T>(is);
      if (loaded.shape() != t->shape())
        throw IoError(path.string() + ": tensor shape " + shape_string(loaded.shape()) + " does not match network " +
                      shape_string(t->shape()));
      *t = std::move(loaded);
    }
    ++chain->params.version;
  }
  if (is.peek() != std::char_traits<char>::eof()) throw IoError(path.string() + ": trailing data after parameters");
}

/// Rebuilds a network from a manifest and its parameter file.
template <typename T>
BranchedNetwork<T> load_network(const io::KeyValueConfig& manifest, const std::filesystem::path& params_path) {
  auto net = build<T>(spec_from_manifest(manifest), 0);
  io::KeyValueConfig expected;
  describe_network(net.spec, expected);
  for (const auto& k : expected.keys())
    if (manifest.get(k, "") != expected.get(k))
      throw IoError("manifest entry '" + k + "' does not match the rebuilt network");
  load_params(params_path, net);
  return net;
}

} // namespace mtdtl::arch
