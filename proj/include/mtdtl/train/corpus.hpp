#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "mtdtl/core/config.hpp"
#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/hash.hpp"
#include "mtdtl/core/tensor_io.hpp"

namespace mtdtl::train {

/// Standardized spectrograms plus per-source factor labels, one row per track.
struct TrainingCorpus {
  std::vector<std::string> track_ids;
  std::vector<Tensor<float>> spectra;            // channels x frames x bands
  std::vector<std::size_t> train_idx, valid_idx;
  std::map<std::string, Tensor<float>> labels;   // source -> tracks x k
  std::string content_hash;

  std::size_t size() const { return spectra.size(); }
  bool has_source(const std::string& s) const { return s == "self" || labels.count(s) != 0; }

  void validate() const {
    require(spectra.size() == track_ids.size(), "corpus: spectra and track ids differ in count");
    require(!train_idx.empty(), "corpus: empty training split");
    std::vector<char> seen(size(), 0);
    for (auto i : train_idx) {
      require(i < size(), "corpus: split index out of range");
      seen[i] = 1;
    }
    for (auto i : valid_idx) require(i < size() && !seen[i], "corpus: train and validation splits overlap");
    for (const auto& [src, z] : labels)
      require(z.rank() == 2 && z.dim(0) == size(), "corpus: label table for '" + src + "' has wrong row count");
    if (!spectra.empty())
      for (const auto& s : spectra)
        require(s.rank() == 3 && s.dim(0) == spectra[0].dim(0) && s.dim(2) == spectra[0].dim(2),
                "corpus: spectrogram channel/band counts differ");
  }
};

inline std::filesystem::path require_file(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) throw IoError("missing file: " + p.string());
  return p;
}

/// Hash of the track table, used to check that factor files were built for this corpus.
inline std::string tracks_hash(const std::filesystem::path& corpus_dir) {
  Fnv1a h;
  hash_file_into(h, require_file(corpus_dir / "tracks.csv"));
  return h.hex();
}

/// Loads `cache/spec.mrt` (written by the dsp step) and `factors/<source>.mrt` for the requested sources.
inline TrainingCorpus load_training_corpus(const std::filesystem::path& dir, const std::vector<std::string>& sources) {
  TrainingCorpus c;
  const auto tracks = io::read_csv(require_file(dir / "tracks.csv"), {"track_id", "artist_id", "split", "frames"});
  for (std::size_t i = 0; i < tracks.rows.size(); ++i) {
    c.track_ids.push_back(tracks.rows[i][0]);
    (tracks.rows[i][2] == "valid" ? c.valid_idx : c.train_idx).push_back(i);
  }
  c.spectra = io::load_tensors<float>(require_file(dir / "cache" / "spec.mrt"));
  require(c.spectra.size() == c.track_ids.size(), "corpus: cache/spec.mrt holds " + std::to_string(c.spectra.size()) +
                                                      " spectrograms for " + std::to_string(c.track_ids.size()) + " tracks");
  Fnv1a h;
  hash_file_into(h, dir / "tracks.csv");
  hash_file_into(h, dir / "cache" / "spec.mrt");
  const std::string th = tracks_hash(dir);
  for (const auto& s : sources) {
    if (s == "self") continue;
    const auto hdr = io::KeyValueConfig::load(require_file(dir / "factors" / (s + ".hdr")));
    if (hdr.get("tracks_hash") != th)
      throw IoError("factors/" + s + ".hdr was built for a different track table; re-run factorize");
    const auto path = require_file(dir / "factors" / (s + ".mrt"));
    c.labels[s] = io::load_tensor<float>(path);
    hash_file_into(h, path);
  }
  c.content_hash = h.hex();
  c.validate();
  return c;
}

} // namespace mtdtl::train
