#pragma once

#include <array>
#include <string>
#include <vector>

#include "mtdtl/core/error.hpp"

namespace mtdtl::arch {

enum class Strategy { ssr, msscr, mscr2, mscr4, mscr6, mssrfc };

inline constexpr std::array<Strategy, 6> kAllStrategies{Strategy::ssr,   Strategy::mssrfc, Strategy::mscr6,
                                                        Strategy::mscr4, Strategy::mscr2,  Strategy::msscr};

inline std::string strategy_name(Strategy s) {
  switch (s) {
    case Strategy::ssr: return "ss-r";
    case Strategy::msscr: return "mss-cr";
    case Strategy::mscr2: return "ms-cr@2";
    case Strategy::mscr4: return "ms-cr@4";
    case Strategy::mscr6: return "ms-cr@6";
    case Strategy::mssrfc: return "ms-sr@fc";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  for (auto s : kAllStrategies)
    if (strategy_name(s) == name) return s;
  throw InvalidArgument("unknown strategy '" + name + "'");
}

/// Network-size coding used by the size model: ss-r 0 ... mss-cr 1.
inline double size_code(Strategy s) {
  switch (s) {
    case Strategy::ssr: return 0.0;
    case Strategy::mssrfc: return 0.2;
    case Strategy::mscr6: return 0.4;
    case Strategy::mscr4: return 0.6;
    case Strategy::mscr2: return 0.8;
    case Strategy::msscr: return 1.0;
  }
  return 0.0;
}

/// True when the representation concatenates one fc-feature output per source.
inline bool concatenates(Strategy s) { return s != Strategy::ssr && s != Strategy::mssrfc; }

inline const std::vector<std::string>& all_sources() {
  static const std::vector<std::string> names{"self", "year", "bpm", "taste", "tag", "lyrics", "cdr_tag", "artist"};
  return names;
}

inline bool is_known_source(const std::string& s) {
  for (const auto& n : all_sources())
    if (n == s) return true;
  return false;
}

struct StrategySpec {
  Strategy kind = Strategy::ssr;
  std::vector<std::string> sources;
  std::size_t feature_dim = 256;  // d; convolution widths scale by d / 256
  std::size_t factor_dim = 50;    // k
  std::size_t in_channels = 2;
  double dropout = 0.5;

  void validate() const {
    require(!sources.empty(), "strategy needs at least one source");
    if (kind == Strategy::ssr)
      require(sources.size() == 1, "ss-r requires exactly one source, got " + std::to_string(sources.size()));
    else
      require(sources.size() >= 2, strategy_name(kind) + " requires at least two sources");
    require(feature_dim >= 16 && feature_dim % 16 == 0, "feature_dim must be a positive multiple of 16");
    require(factor_dim >= 1, "factor_dim must be positive");
    require(in_channels >= 1, "in_channels must be positive");
  }

  std::size_t representation_dim() const {
    return concatenates(kind) ? feature_dim * sources.size() : feature_dim;
  }
};

} // namespace mtdtl::arch
