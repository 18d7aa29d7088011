#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "mtdtl/core/config.hpp"
#include "mtdtl/core/csv.hpp"
#include "mtdtl/core/parallel.hpp"
#include "mtdtl/core/random.hpp"
#include "mtdtl/core/tensor.hpp"
#include "mtdtl/core/tensor_io.hpp"

namespace mtdtl::synth {

inline constexpr double kFramesPerSecond = 22050.0 / 256.0;

/// Tempo classes: class centres in bpm, tracks jitter around them.
inline const std::vector<double>& tempo_centres() {
  static const std::vector<double> c{72, 92, 112, 134, 160};
  return c;
}

struct SynthSpec {
  std::size_t tracks = 1000;
  std::size_t target_tracks = 400;
  std::size_t channels = 2;
  std::size_t bands = 32;
  std::size_t min_frames = 432;
  std::size_t max_frames = 648;
  std::size_t templates = 8;
  std::size_t groups = 4;
  std::size_t artists = 100;
  std::size_t taste_users = 200;
  std::size_t rec_users = 150;
  std::size_t user_clusters = 8;
  std::size_t tag_vocab = 64;
  std::size_t lyrics_vocab = 80;
  std::size_t cdr_vocab = 60;
  double noise = 3.0;          // dB, white noise sd; also scales slow fluctuations and channel differences
  double pulse_gain = 14.0;    // dB at full modulation depth
  double tempo_jitter = 4.0;   // bpm sd around the class centre
  double validation_fraction = 0.1;
  std::uint64_t seed = 1;

  static SynthSpec from_config(const io::KeyValueConfig& c) {
    SynthSpec s;
    c.check_keys({"tracks", "target_tracks", "channels", "bands", "min_frames", "max_frames", "templates", "groups",
                  "artists", "taste_users", "rec_users", "user_clusters", "tag_vocab", "lyrics_vocab", "cdr_vocab",
                  "noise", "pulse_gain", "tempo_jitter", "validation_fraction", "seed"});
    auto z = [&](const char* k, std::size_t& v) { v = c.get_number<std::size_t>(k, v); };
    z("tracks", s.tracks);
    z("target_tracks", s.target_tracks);
    z("channels", s.channels);
    z("bands", s.bands);
    z("min_frames", s.min_frames);
    z("max_frames", s.max_frames);
    z("templates", s.templates);
    z("groups", s.groups);
    z("artists", s.artists);
    z("taste_users", s.taste_users);
    z("rec_users", s.rec_users);
    z("user_clusters", s.user_clusters);
    z("tag_vocab", s.tag_vocab);
    z("lyrics_vocab", s.lyrics_vocab);
    z("cdr_vocab", s.cdr_vocab);
    s.noise = c.get_number<double>("noise", s.noise);
    s.pulse_gain = c.get_number<double>("pulse_gain", s.pulse_gain);
    s.tempo_jitter = c.get_number<double>("tempo_jitter", s.tempo_jitter);
    s.validation_fraction = c.get_number<double>("validation_fraction", s.validation_fraction);
    s.seed = c.get_number<std::uint64_t>("seed", s.seed);
    s.validate();
    return s;
  }

  io::KeyValueConfig to_config() const {
    io::KeyValueConfig c;
    auto n = [&](const char* k, auto v) { c.set(k, std::to_string(v)); };
    n("tracks", tracks);
    n("target_tracks", target_tracks);
    n("channels", channels);
    n("bands", bands);
    n("min_frames", min_frames);
    n("max_frames", max_frames);
    n("templates", templates);
    n("groups", groups);
    n("artists", artists);
    n("taste_users", taste_users);
    n("rec_users", rec_users);
    n("user_clusters", user_clusters);
    n("tag_vocab", tag_vocab);
    n("lyrics_vocab", lyrics_vocab);
    n("cdr_vocab", cdr_vocab);
    c.set("noise", io::fmt_real(noise));
    c.set("pulse_gain", io::fmt_real(pulse_gain));
    c.set("tempo_jitter", io::fmt_real(tempo_jitter));
    c.set("validation_fraction", io::fmt_real(validation_fraction));
    n("seed", seed);
    return c;
  }

  void validate() const {
    require(tracks >= 2 && target_tracks >= 10, "synth: need at least 2 tracks and 10 target tracks");
    require(channels == 1 || channels == 2, "synth: channels must be 1 or 2");
    require(bands >= 20, "synth: need at least 20 bands");
    require(min_frames >= 216 && max_frames >= min_frames, "synth: frame range must start at 216 or more");
    require(templates >= 2 && groups >= 2 && groups <= templates, "synth: need 2 <= groups <= templates");
    require(artists >= 2 && user_clusters >= 1 && taste_users >= 1 && rec_users >= 1, "synth: bad population sizes");
    require(tag_vocab >= templates && cdr_vocab >= groups && lyrics_vocab >= 10 + groups, "synth: vocabularies too small");
    require(noise >= 0 && pulse_gain >= 0 && tempo_jitter >= 0, "synth: gains must be non-negative");
    require(validation_fraction >= 0 && validation_fraction < 1, "synth: validation_fraction must be in [0,1)");
  }
};

/// Generating factors of one track.
struct TrackLatents {
  std::string id;
  std::size_t artist = 0;
  std::vector<double> template_weights;
  std::size_t main_template = 0;
  std::size_t group = 0;
  std::size_t tempo_class = 0;
  double bpm = 0.0;
  double depth = 0.0;   // pulse modulation depth in [0.2, 1]
  double drift = 0.0;   // in [0, 1]; sets spectral tilt and year
  double valence = 0.0;
  std::size_t frames = 0;
  bool validation = false;

  double year() const { return std::round(1960.0 + 50.0 * drift); }
};

struct Artist {
  std::string id;
  std::size_t main_template = 0;
  double drift = 0.0;
};

struct Interaction {
  std::string user, item;
  double count;
};

struct Corpus {
  SynthSpec spec;
  std::vector<Artist> artists;
  std::vector<TrackLatents> tracks, target_tracks;
  std::vector<Tensor<float>> spectra, target_spectra;  // channels x frames x bands, dB-like
  std::map<std::string, std::vector<std::vector<std::string>>> triplet_labels;  // source -> rows item,term,count
  std::map<std::string, std::vector<std::pair<std::string, double>>> scalar_labels;
  std::vector<Interaction> rec_interactions;
  std::vector<std::vector<double>> templates;  // templates x bands
};

namespace detail {

inline std::vector<double> smooth_profile(std::size_t bands, Rng& rng) {
  std::vector<double> p(bands, 0.0);
  const int bumps = 2 + static_cast<int>(uniform_index(rng, 2));
  for (int b = 0; b < bumps; ++b) {
    const double centre = uniform01(rng) * static_cast<double>(bands);
    const double width = 1.5 + 4.0 * uniform01(rng);
    const double height = 6.0 + 10.0 * uniform01(rng);
    for (std::size_t f = 0; f < bands; ++f) {
      const double z = (static_cast<double>(f) - centre) / width;
      p[f] += height * std::exp(-0.5 * z * z);
    }
  }
  return p;
}

inline std::vector<double> dirichlet(std::size_t n, double alpha, Rng& rng) {
  std::vector<double> w(n);
  double s = 0;
  for (auto& v : w) s += v = gamma_draw(rng, alpha) + 1e-12;
  for (auto& v : w) v /= s;
  return w;
}

inline std::vector<double> pulse_profile(std::size_t bands) {
  std::vector<double> p(bands);
  for (std::size_t f = 0; f < bands; ++f) p[f] = 1.0 - 0.6 * static_cast<double>(f) / static_cast<double>(bands);
  return p;
}

inline std::vector<double> tilt_profile(std::size_t bands) {
  std::vector<double> p(bands);
  for (std::size_t f = 0; f < bands; ++f) p[f] = 2.0 * static_cast<double>(f) / static_cast<double>(bands - 1) - 1.0;
  return p;
}

inline TrackLatents draw_track(const SynthSpec& s, const std::vector<Artist>& artists, std::size_t artist,
                               std::string id, Rng& rng) {
  TrackLatents t;
  t.id = std::move(id);
  t.artist = artist;
  const auto& a = artists[artist];
  t.main_template = uniform01(rng) < 0.85 ? a.main_template : uniform_index(rng, s.templates);
  t.template_weights = dirichlet(s.templates, 0.3, rng);
  for (auto& w : t.template_weights) w *= 0.35;
  t.template_weights[t.main_template] += 0.65;
  t.group = t.main_template * s.groups / s.templates;
  t.tempo_class = uniform_index(rng, tempo_centres().size());
  t.bpm = tempo_centres()[t.tempo_class] + s.tempo_jitter * std::clamp(normal01(rng), -2.0, 2.0);
  t.depth = 0.2 + 0.8 * uniform01(rng);
  t.drift = std::clamp(a.drift + 0.08 * normal01(rng), 0.0, 1.0);
  t.frames = s.min_frames + uniform_index(rng, s.max_frames - s.min_frames + 1);
  double v = 0.0;
  for (std::size_t j = 0; j < s.templates; ++j)
    v += t.template_weights[j] * (static_cast<double>(j % 3) - 1.0);
  t.valence = v + 0.3 * (t.depth - 0.6) + 0.1 * normal01(rng);
  return t;
}

inline Tensor<float> render(const SynthSpec& s, const TrackLatents& t, const std::vector<std::vector<double>>& templates,
                            Rng& rng) {
  const std::size_t B = s.bands, T = t.frames;
  const auto pulse = pulse_profile(B);
  const auto tilt = tilt_profile(B);
  std::vector<double> base(B, -50.0);
  for (std::size_t j = 0; j < templates.size(); ++j)
    for (std::size_t f = 0; f < B; ++f) base[f] += t.template_weights[j] * templates[j][f];
  for (std::size_t f = 0; f < B; ++f) base[f] += 8.0 * (t.drift - 0.5) * tilt[f];

  // decaying pulses on a beat grid, accents vary per beat, slower tempi sustain longer
  const double period = 60.0 / t.bpm * kFramesPerSecond;
  const double decay = 0.15 * period;
  std::vector<double> env(T, 0.0);
  for (double beat = -uniform01(rng) * period; beat < static_cast<double>(T); beat += period) {
    const double accent = 0.6 + 0.4 * uniform01(rng);
    for (std::size_t i = static_cast<std::size_t>(std::max(0.0, std::ceil(beat))); i < T; ++i) {
      const double dt = static_cast<double>(i) - beat;
      if (dt > 6 * decay) break;
      env[i] += accent * std::exp(-dt / decay);
    }
  }
  Tensor<float> x({s.channels, T, B});
  std::vector<double> slow(B, 0.0);
  const double pan = s.noise * 0.3 * normal01(rng);
  for (std::size_t i = 0; i < T; ++i) {
    for (std::size_t f = 0; f < B; ++f) slow[f] = 0.95 * slow[f] + 0.3 * s.noise * normal01(rng);
    for (std::size_t c = 0; c < s.channels; ++c)
      for (std::size_t f = 0; f < B; ++f) {
        double v = base[f] + s.pulse_gain * (0.7 + 0.3 * t.depth) * env[i] * pulse[f] + slow[f] + s.noise * normal01(rng);
        if (c == 1) v += pan;
        x.at(c, i, f) = static_cast<float>(v);
      }
  }
  return x;
}

inline std::string pad_id(const char* prefix, std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s%05zu", prefix, i);
  return buf;
}

}  // namespace detail

/// Per-user affinity for a track from the user's template preferences.
inline double affinity(const std::vector<double>& pref, const TrackLatents& t) {
  double a = 0.0;
  for (std::size_t j = 0; j < pref.size(); ++j) a += pref[j] * t.template_weights[j];
  return a;
}

/// Users pick tracks with probability proportional to exp(6 * affinity); counts are 1 + Poisson(2).
inline std::vector<Interaction> draw_interactions(const std::vector<TrackLatents>& tracks, std::size_t users,
                                                  const std::vector<std::vector<double>>& cluster_prefs,
                                                  const char* prefix, Rng& rng) {
  std::vector<Interaction> out;
  for (std::size_t u = 0; u < users; ++u) {
    const auto& pref = cluster_prefs[uniform_index(rng, cluster_prefs.size())];
    std::vector<double> cum(tracks.size());
    double s = 0.0;
    for (std::size_t i = 0; i < tracks.size(); ++i) cum[i] = s += std::exp(6.0 * affinity(pref, tracks[i]));
    const std::size_t picks = 15 + uniform_index(rng, 26);
    std::set<std::size_t> chosen;
    for (std::size_t p = 0; p < picks; ++p) {
      const double r = uniform01(rng) * s;
      chosen.insert(static_cast<std::size_t>(std::lower_bound(cum.begin(), cum.end(), r) - cum.begin()));
    }
    for (std::size_t i : chosen)
      out.push_back({detail::pad_id(prefix, u), tracks[std::min(i, tracks.size() - 1)].id,
                     1.0 + static_cast<double>(poisson_draw(rng, 2.0))});
  }
  return out;
}

inline Corpus generate(const SynthSpec& s) {
  s.validate();
  Corpus c;
  c.spec = s;
  Rng rng(derive_seed(s.seed, 1));
  for (std::size_t j = 0; j < s.templates; ++j) c.templates.push_back(detail::smooth_profile(s.bands, rng));
  const std::size_t total_artists = s.artists + std::max<std::size_t>(2, s.artists * s.target_tracks / s.tracks);
  for (std::size_t a = 0; a < total_artists; ++a)
    c.artists.push_back({detail::pad_id("ar", a), uniform_index(rng, s.templates), uniform01(rng)});

  for (std::size_t i = 0; i < s.tracks; ++i) {
    Rng tr(derive_seed(s.seed, 1000 + i));
    c.tracks.push_back(detail::draw_track(s, c.artists, uniform_index(tr, s.artists), detail::pad_id("tr", i), tr));
  }
  for (std::size_t i = 0; i < s.target_tracks; ++i) {
    Rng tr(derive_seed(s.seed, 5000000 + i));
    const std::size_t artist = s.artists + uniform_index(tr, total_artists - s.artists);
    c.target_tracks.push_back(detail::draw_track(s, c.artists, artist, detail::pad_id("tt", i), tr));
  }
  {
    Rng split(derive_seed(s.seed, 2));
    const auto perm = random_permutation(s.tracks, split);
    const auto nval = static_cast<std::size_t>(std::floor(s.validation_fraction * static_cast<double>(s.tracks)));
    for (std::size_t i = 0; i < nval; ++i) c.tracks[perm[i]].validation = true;
  }

  c.spectra.resize(s.tracks);
  c.target_spectra.resize(s.target_tracks);
  parallel_for(s.tracks + s.target_tracks, [&](std::size_t i) {
    Rng r(derive_seed(s.seed, 9000000 + i));
    if (i < s.tracks)
      c.spectra[i] = detail::render(s, c.tracks[i], c.templates, r);
    else
      c.target_spectra[i - s.tracks] = detail::render(s, c.target_tracks[i - s.tracks], c.templates, r);
  });

  // labels
  Rng lab(derive_seed(s.seed, 3));
  const std::size_t era_tags = 5, tempo_tags = 3;
  const std::size_t genre_tags = s.tag_vocab - era_tags - tempo_tags;
  auto& tag = c.triplet_labels["tag"];
  auto& cdr = c.triplet_labels["cdr_tag"];
  auto& lyrics = c.triplet_labels["lyrics"];
  std::map<std::size_t, std::map<std::size_t, double>> artist_tags;
  for (const auto& t : c.tracks) {
    std::map<std::size_t, double> counts;
    for (std::size_t w = 0; w < genre_tags; ++w) {
      const double lambda = 6.0 * t.template_weights[w % s.templates] / static_cast<double>((genre_tags + s.templates - 1) / s.templates);
      if (const auto n = poisson_draw(lab, lambda)) counts[w] += static_cast<double>(n);
    }
    counts[t.main_template] += 1.0;
    counts[genre_tags + std::min<std::size_t>(era_tags - 1, static_cast<std::size_t>(t.drift * era_tags))] +=
        static_cast<double>(poisson_draw(lab, 1.5));
    if (t.bpm < 85) counts[genre_tags + era_tags] += static_cast<double>(poisson_draw(lab, 1.0));
    if (t.bpm > 125) counts[genre_tags + era_tags + 1] += static_cast<double>(poisson_draw(lab, 1.0));
    if (t.depth > 0.7) counts[genre_tags + era_tags + 2] += static_cast<double>(poisson_draw(lab, 1.0));
    for (const auto& [w, n] : counts) {
      if (n <= 0) continue;
      tag.push_back({t.id, detail::pad_id("tag", w), io::fmt_real(n)});
      artist_tags[t.artist][w] += n;
    }

    std::vector<double> gw(s.groups, 0.0);
    for (std::size_t j = 0; j < s.templates; ++j) gw[j * s.groups / s.templates] += t.template_weights[j];
    std::map<std::size_t, double> cc;
    cc[t.group * (s.cdr_vocab / s.groups)] = 1.0;
    for (std::size_t w = 0; w < s.cdr_vocab; ++w) {
      const std::size_t g = std::min(s.groups - 1, w / (s.cdr_vocab / s.groups));
      if (const auto n = poisson_draw(lab, 1.5 * gw[g])) cc[w] += static_cast<double>(n);
    }
    for (const auto& [w, n] : cc) cdr.push_back({t.id, detail::pad_id("cdr", w), io::fmt_real(n)});

    // lyrics: 10 stop words in every track, topical words by group, two era halves
    const std::size_t topical = s.lyrics_vocab - 10;
    const std::size_t per_group = topical / (s.groups + 2);
    std::map<std::size_t, double> lc;
    for (std::size_t w = 0; w < 10; ++w) lc[w] = 1.0 + static_cast<double>(poisson_draw(lab, 4.0));
    for (std::size_t w = 0; w < per_group * s.groups; ++w) {
      const std::size_t g = w / per_group;
      if (const auto n = poisson_draw(lab, 1.2 * gw[g])) lc[10 + w] += static_cast<double>(n);
    }
    const std::size_t era = t.drift < 0.5 ? 0 : 1;
    for (std::size_t w = 0; w < per_group; ++w)
      if (const auto n = poisson_draw(lab, 0.5)) lc[10 + per_group * (s.groups + era) + w] += static_cast<double>(n);
    for (const auto& [w, n] : lc) lyrics.push_back({t.id, detail::pad_id("lyr", w), io::fmt_real(n)});

    c.scalar_labels["year"].push_back({t.id, t.year()});
    double measured = t.bpm;
    const double u = uniform01(lab);
    if (u < 0.05) measured *= 2.0;
    else if (u < 0.10) measured *= 0.5;
    c.scalar_labels["bpm"].push_back({t.id, std::round((measured + 1.5 * normal01(lab)) * 10) / 10});
  }
  auto& artist = c.triplet_labels["artist"];
  for (const auto& [a, counts] : artist_tags)
    for (const auto& [w, n] : counts) artist.push_back({c.artists[a].id, detail::pad_id("tag", w), io::fmt_real(n)});

  std::vector<std::vector<double>> prefs;
  for (std::size_t k = 0; k < s.user_clusters; ++k) prefs.push_back(detail::dirichlet(s.templates, 0.4, lab));
  auto& taste = c.triplet_labels["taste"];
  for (const auto& it : draw_interactions(c.tracks, s.taste_users, prefs, "tu", lab))
    taste.push_back({it.item, it.user, io::fmt_real(it.count)});
  // tracks nobody played still need a taste row
  std::set<std::string> played;
  for (const auto& r : taste) played.insert(r[0]);
  for (const auto& t : c.tracks)
    if (!played.count(t.id)) taste.push_back({t.id, detail::pad_id("tu", uniform_index(lab, s.taste_users)), "1"});
  c.rec_interactions = draw_interactions(c.target_tracks, s.rec_users, prefs, "ru", lab);
  return c;
}

struct TargetDef {
  std::string name, task;  // task: classification | regression | recommendation
};

inline const std::vector<TargetDef>& target_datasets() {
  static const std::vector<TargetDef> d{{"tempo_cls", "classification"}, {"genre_cls", "classification"},
                                        {"coarse_cls", "classification"}, {"era_cls", "classification"},
                                        {"arousal_reg", "regression"},     {"valence_reg", "regression"},
                                        {"lastfm_rec", "recommendation"}};
  return d;
}

inline double target_label(const std::string& dataset, const TrackLatents& t) {
  if (dataset == "tempo_cls") return static_cast<double>(t.tempo_class);
  if (dataset == "genre_cls") return static_cast<double>(t.main_template);
  if (dataset == "coarse_cls") return static_cast<double>(t.group);
  if (dataset == "era_cls") return std::min(3.0, std::floor(t.drift * 4.0));
  if (dataset == "arousal_reg") return t.depth;
  if (dataset == "valence_reg") return t.valence;
  throw InvalidArgument("no scalar label for dataset '" + dataset + "'");
}

/// Writes the corpus directory: spec, tracks, spectra, labels, targets and generating factors.
inline void write_corpus(const Corpus& c, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "labels");
  fs::create_directories(dir / "targets");
  c.spec.to_config().save(dir / "synth.cfg");

  io::CsvTable tracks{{"track_id", "artist_id", "split", "frames"}, {}};
  for (const auto& t : c.tracks)
    tracks.rows.push_back({t.id, c.artists[t.artist].id, t.validation ? "valid" : "train", std::to_string(t.frames)});
  io::write_csv(dir / "tracks.csv", tracks);
  io::save_tensors(dir / "raw_spec.mrt", c.spectra);

  io::CsvTable targets{{"track_id", "frames"}, {}};
  for (const auto& t : c.target_tracks) targets.rows.push_back({t.id, std::to_string(t.frames)});
  io::write_csv(dir / "targets" / "tracks.csv", targets);
  io::save_tensors(dir / "targets" / "raw_spec.mrt", c.target_spectra);

  for (const auto& [src, rows] : c.triplet_labels)
    io::write_csv(dir / "labels" / (src + ".csv"), {{"item_id", "term_id", "count"}, rows});
  for (const auto& [src, rows] : c.scalar_labels) {
    io::CsvTable t{{"item_id", "value"}, {}};
    for (const auto& [id, v] : rows) t.rows.push_back({id, io::fmt_real(v)});
    io::write_csv(dir / "labels" / (src + ".csv"), t);
  }

  for (const auto& d : target_datasets()) {
    fs::create_directories(dir / "targets" / d.name);
    if (d.task == "recommendation") {
      io::CsvTable t{{"user_id", "item_id", "count"}, {}};
      for (const auto& it : c.rec_interactions) t.rows.push_back({it.user, it.item, io::fmt_real(it.count)});
      io::write_csv(dir / "targets" / d.name / "interactions.csv", t);
      io::CsvTable items{{"item_id", "label"}, {}};
      for (const auto& tr : c.target_tracks) items.rows.push_back({tr.id, "0"});
      io::write_csv(dir / "targets" / d.name / "items.csv", items);
    } else {
      io::CsvTable items{{"item_id", "label"}, {}};
      for (const auto& tr : c.target_tracks) items.rows.push_back({tr.id, io::fmt_real(target_label(d.name, tr))});
      io::write_csv(dir / "targets" / d.name / "items.csv", items);
    }
    io::KeyValueConfig meta;
    meta.set("task", d.task);
    meta.save(dir / "targets" / d.name / "dataset.cfg");
  }

  io::CsvTable truth{{"track_id", "main_template", "group", "tempo_class", "bpm", "depth", "drift", "valence"}, {}};
  for (const auto* set : {&c.tracks, &c.target_tracks})
    for (const auto& t : *set)
      truth.rows.push_back({t.id, std::to_string(t.main_template), std::to_string(t.group), std::to_string(t.tempo_class),
                            io::fmt_real(t.bpm), io::fmt_real(t.depth), io::fmt_real(t.drift), io::fmt_real(t.valence)});
  io::write_csv(dir / "truth.csv", truth);
}

} // namespace mtdtl::synth
