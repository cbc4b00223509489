#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "signbench/core/error.hpp"
#include "signbench/core/rng.hpp"
#include "signbench/data/keypoints.hpp"
#include "signbench/data/lipfeatures.hpp"
#include "signbench/data/subtitles.hpp"
#include "signbench/data/textclean.hpp"

namespace signbench {

struct SampleRecord {
  std::string keypoints_path;
  std::string lip_path;             // may be empty
  std::string subtitle_path;        // signing-aligned cue for this sample
  std::string audio_subtitle_path;  // optional audio-aligned prior
  std::string lang = "en";
  std::string split = "train";
  std::string gloss;                // set for isolated-sign records
  Cue cue;                          // the sample's subtitle cue
};

inline int count_words(const std::string& text) {
  std::istringstream is(text);
  std::string w;
  int n = 0;
  while (is >> w) ++n;
  return n;
}

// Admission filter: cue duration within [min_s, max_s] (inclusive on both
// ends) and at most max_words words. Order-preserving subset of the input.
inline std::vector<SampleRecord> filter_samples(const std::vector<SampleRecord>& records,
                                                double min_s = 1.0, double max_s = 20.0,
                                                int max_words = 80) {
  std::vector<SampleRecord> kept;
  for (const SampleRecord& r : records) {
    double dur = r.cue.end_s - r.cue.start_s;
    if (dur < min_s || dur > max_s) continue;
    if (count_words(r.cue.text) > max_words) continue;
    kept.push_back(r);
  }
  return kept;
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation. Each pseudo-gloss class is a distinct smooth
// joint-trajectory template plus per-sample noise; sentence samples sign a
// sequence of class words inside a window, and signing-aligned cue boundaries
// match the generated segment boundaries exactly.

struct SynthConfig {
  uint64_t seed = 1;
  int n_classes = 8;
  int n_samples = 24;  // sentence-level samples
  int frames = 64;     // window length F, <= 500
  double fps = 25.0;
  int islr_per_class = 4;
  int islr_frames = 24;
  int lip_dim = 16;
  int min_words = 2, max_words = 4;
  double noise = 0.005;
  double sign_amp = 0.18;
  double motion_amp = 0.08;
};

struct SentenceSample {
  KeypointClip keypoints;
  LipFeatureClip lip;
  std::string sentence;
  std::vector<int> classes;
  int64_t span_start = 0, span_end = 0;  // inclusive frame indices
  Cue signing_cue, audio_cue;
  std::string lang = "en";
  std::string split = "train";
};

struct IslrSample {
  KeypointClip keypoints;
  LipFeatureClip lip;
  int label = 0;
  std::string split = "train";
};

struct SynthCorpus {
  SynthConfig config;
  std::vector<std::string> gloss_words;
  std::vector<IslrSample> islr;
  std::vector<SentenceSample> sentences;
};

namespace detail {

inline std::string class_word(int index) {
  static const char* consonants = "bdfglmnprstvz";
  static const char* vowels = "aeiou";
  int nc = 13, nv = 5;
  std::string w;
  int x = index;
  for (int syl = 0; syl < 2; ++syl) {
    w += consonants[x % nc];
    x /= nc;
    w += vowels[x % nv];
    x /= nv;
  }
  return w;
}

struct ClassTemplate {
  std::vector<double> offset;   // 203*3 static displacement
  std::vector<double> motion;   // 203*3 oscillation amplitude
  double freq = 1.0, phase = 0.0;
  std::vector<double> lip_pattern;  // lip_dim
};

inline void base_pose(int64_t j, double* out) {
  const double pi = 3.14159265358979323846;
  if (j < kFaceEnd) {
    double th = 2.0 * pi * static_cast<double>(j) / 128.0;
    out[0] = 0.25 * std::cos(th);
    out[1] = 0.75 + 0.18 * std::sin(th);
    out[2] = 0.05 * std::sin(2 * th);
  } else if (j < kBodyEnd) {
    int64_t b = j - kBodyBegin;
    if (b == 11) { out[0] = 0.5; out[1] = 0.0; out[2] = 0.0; return; }
    if (b == 12) { out[0] = -0.5; out[1] = 0.0; out[2] = 0.0; return; }
    double th = 2.0 * pi * static_cast<double>(b) / 33.0;
    out[0] = 0.6 * std::cos(th);
    out[1] = -0.3 + 0.5 * std::sin(th);
    out[2] = 0.1 * std::cos(2 * th);
  } else {
    bool left = j < kLeftHandEnd;
    int64_t h = j - (left ? kLeftHandBegin : kRightHandBegin);
    double cx = left ? 0.7 : -0.7;
    double th = 2.0 * pi * static_cast<double>(h) / 21.0;
    double r = 0.04 + 0.004 * static_cast<double>(h);
    out[0] = cx + r * std::cos(th);
    out[1] = -0.35 + r * std::sin(th);
    out[2] = 0.1 + 0.01 * static_cast<double>(h % 3);
  }
}

inline std::vector<ClassTemplate> make_templates(const SynthConfig& cfg, Rng& rng) {
  std::vector<ClassTemplate> ts(static_cast<size_t>(cfg.n_classes));
  for (int c = 0; c < cfg.n_classes; ++c) {
    Rng r = rng.fork(static_cast<uint64_t>(c) + 100);
    ClassTemplate& t = ts[static_cast<size_t>(c)];
    t.offset.resize(kNumJoints * 3);
    t.motion.resize(kNumJoints * 3);
    for (double& v : t.offset) v = r.uniform(-cfg.sign_amp, cfg.sign_amp);
    for (double& v : t.motion) v = r.uniform(-cfg.motion_amp, cfg.motion_amp);
    // keep the shoulders still so normalization statistics stay clean
    for (int64_t s : {kLeftShoulder, kRightShoulder})
      for (int k = 0; k < 3; ++k) {
        t.offset[s * 3 + k] = 0.0;
        t.motion[s * 3 + k] = 0.0;
      }
    t.freq = r.uniform(0.6, 2.2);
    t.phase = r.uniform(0.0, 6.28318);
    t.lip_pattern.resize(static_cast<size_t>(cfg.lip_dim));
    for (double& v : t.lip_pattern) v = r.uniform(-1.0, 1.0);
  }
  return ts;
}

// active < 0 means rest pose.
inline void fill_frame(KeypointClip& clip, LipFeatureClip& lip, int64_t f, int active,
                       double t_seconds, const std::vector<ClassTemplate>& templates,
                       const SynthConfig& cfg, Rng& noise_rng) {
  const double pi = 3.14159265358979323846;
  for (int64_t j = 0; j < kNumJoints; ++j) {
    double base[3];
    base_pose(j, base);
    for (int k = 0; k < 3; ++k) {
      double v = base[k];
      if (active >= 0) {
        const ClassTemplate& tpl = templates[static_cast<size_t>(active)];
        v += tpl.offset[j * 3 + k];
        v += tpl.motion[j * 3 + k] * std::sin(2 * pi * tpl.freq * t_seconds + tpl.phase);
      }
      bool shoulder = (j == kLeftShoulder || j == kRightShoulder);
      if (!shoulder) v += cfg.noise * noise_rng.normal();
      clip.at(f, j, k) = v;
    }
  }
  for (int64_t c = 0; c < lip.dim; ++c) {
    double v = 0.05 * noise_rng.normal();
    if (active >= 0) {
      const ClassTemplate& tpl = templates[static_cast<size_t>(active)];
      v += tpl.lip_pattern[static_cast<size_t>(c)] *
           (0.8 + 0.2 * std::sin(2 * pi * tpl.freq * t_seconds));
    }
    lip.at(f, c) = v;
  }
}

}  // namespace detail

inline SynthCorpus synth_corpus(const SynthConfig& cfg) {
  if (cfg.n_classes < 2) throw ContractError("synth_corpus: need at least 2 classes");
  if (cfg.frames < 1 || cfg.frames > 500)
    throw ContractError("synth_corpus: frames must lie in [1, 500]");
  SynthCorpus corpus;
  corpus.config = cfg;
  Rng rng(cfg.seed);
  auto templates = detail::make_templates(cfg, rng);
  for (int c = 0; c < cfg.n_classes; ++c) corpus.gloss_words.push_back(detail::class_word(c));

  // isolated clips
  for (int c = 0; c < cfg.n_classes; ++c) {
    for (int i = 0; i < cfg.islr_per_class; ++i) {
      Rng r = rng.fork(1000 + static_cast<uint64_t>(c) * 97 + static_cast<uint64_t>(i));
      IslrSample s;
      s.label = c;
      s.split = (i + 1 == cfg.islr_per_class && cfg.islr_per_class > 2) ? "val" : "train";
      s.keypoints = KeypointClip::blank(cfg.islr_frames, cfg.fps);
      s.lip = LipFeatureClip::blank(cfg.islr_frames, cfg.lip_dim);
      for (int64_t f = 0; f < cfg.islr_frames; ++f)
        detail::fill_frame(s.keypoints, s.lip, f, c, static_cast<double>(f) / cfg.fps, templates,
                           cfg, r);
      corpus.islr.push_back(std::move(s));
    }
  }

  // sentence windows
  int64_t min_span = std::max<int64_t>(2, static_cast<int64_t>(std::ceil(cfg.fps)) + 1);
  for (int i = 0; i < cfg.n_samples; ++i) {
    Rng r = rng.fork(50000 + static_cast<uint64_t>(i));
    SentenceSample s;
    int n_words = cfg.min_words +
                  static_cast<int>(r.below(static_cast<uint64_t>(cfg.max_words - cfg.min_words + 1)));
    for (int w = 0; w < n_words; ++w)
      s.classes.push_back(static_cast<int>(r.below(static_cast<uint64_t>(cfg.n_classes))));
    for (size_t w = 0; w < s.classes.size(); ++w) {
      if (w) s.sentence += ' ';
      s.sentence += corpus.gloss_words[static_cast<size_t>(s.classes[w])];
    }
    int64_t F = cfg.frames;
    int64_t max_span = std::max<int64_t>(min_span, F - 4);
    int64_t span = min_span + static_cast<int64_t>(r.below(
                                  static_cast<uint64_t>(max_span - min_span + 1)));
    span = std::min<int64_t>(span, F);
    int64_t slack = F - span;
    s.span_start = slack > 0 ? static_cast<int64_t>(r.below(static_cast<uint64_t>(slack + 1))) : 0;
    s.span_end = s.span_start + span - 1;

    s.keypoints = KeypointClip::blank(F, cfg.fps);
    s.lip = LipFeatureClip::blank(F, cfg.lip_dim);
    for (int64_t f = 0; f < F; ++f) {
      int active = -1;
      if (f >= s.span_start && f <= s.span_end) {
        int64_t pos = (f - s.span_start) * n_words / span;
        active = s.classes[static_cast<size_t>(std::min<int64_t>(pos, n_words - 1))];
      }
      detail::fill_frame(s.keypoints, s.lip, f, active, static_cast<double>(f) / cfg.fps,
                         templates, cfg, r);
    }

    s.signing_cue.start_s = static_cast<double>(s.span_start) / cfg.fps;
    s.signing_cue.end_s = static_cast<double>(s.span_end + 1) / cfg.fps;
    s.signing_cue.text = s.sentence;
    double dur = s.signing_cue.end_s - s.signing_cue.start_s;
    double window_end = static_cast<double>(F) / cfg.fps;
    s.audio_cue.start_s =
        std::clamp(s.signing_cue.start_s + r.uniform(-0.15, 0.15) * dur, 0.0, window_end - 0.1);
    s.audio_cue.end_s =
        std::clamp(s.signing_cue.end_s + r.uniform(-0.15, 0.15) * dur,
                   s.audio_cue.start_s + 0.1, window_end);
    s.audio_cue.text = s.sentence;
    s.split = (i % 10 == 8) ? "val" : (i % 10 == 9) ? "test" : "train";
    corpus.sentences.push_back(std::move(s));
  }
  return corpus;
}

// ---------------------------------------------------------------------------
// On-disk layout + manifest. The manifest is a JSON array of records
// {keypoints, lip, subtitle, lang, split} with extra keys for the gloss label
// of isolated clips and the audio-aligned prior track.

inline void write_corpus(const SynthCorpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest = nlohmann::json::array();
  char buf[64];

  auto rel = [&](const std::string& name) { return name; };
  auto full = [&](const std::string& name) { return (fs::path(dir) / name).string(); };

  for (size_t i = 0; i < corpus.islr.size(); ++i) {
    const IslrSample& s = corpus.islr[i];
    std::snprintf(buf, sizeof(buf), "islr_%05zu", i);
    std::string stem = buf;
    write_keypoints(full(stem + ".sbkp"), s.keypoints);
    write_lip_features(full(stem + ".sblf"), s.lip);
    manifest.push_back({{"keypoints", rel(stem + ".sbkp")},
                        {"lip", rel(stem + ".sblf")},
                        {"subtitle", ""},
                        {"lang", "en"},
                        {"split", s.split},
                        {"gloss", corpus.gloss_words[static_cast<size_t>(s.label)]}});
  }
  for (size_t i = 0; i < corpus.sentences.size(); ++i) {
    const SentenceSample& s = corpus.sentences[i];
    std::snprintf(buf, sizeof(buf), "sent_%05zu", i);
    std::string stem = buf;
    write_keypoints(full(stem + ".sbkp"), s.keypoints);
    write_lip_features(full(stem + ".sblf"), s.lip);
    SubtitleTrack sign_track{{s.signing_cue}, CueSource::kSigningAligned};
    SubtitleTrack audio_track{{s.audio_cue}, CueSource::kAudioAligned};
    write_subtitles(full(stem + ".sign.srt"), sign_track, SubtitleFormat::kSrt);
    write_subtitles(full(stem + ".audio.srt"), audio_track, SubtitleFormat::kSrt);
    manifest.push_back({{"keypoints", rel(stem + ".sbkp")},
                        {"lip", rel(stem + ".sblf")},
                        {"subtitle", rel(stem + ".sign.srt")},
                        {"audio_subtitle", rel(stem + ".audio.srt")},
                        {"lang", s.lang},
                        {"split", s.split}});
  }
  {
    std::ofstream os(full("manifest.json"));
    if (!os) throw DataError("cannot write manifest in " + dir);
    os << manifest.dump(1) << "\n";
  }
  {
    std::ofstream os(full("gloss_vocab.txt"));
    for (const std::string& w : corpus.gloss_words) os << w << "\n";
  }
}

inline std::vector<SampleRecord> load_manifest(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream is((fs::path(dir) / "manifest.json").string());
  if (!is) throw DataError("cannot open manifest in " + dir);
  nlohmann::json manifest;
  try {
    is >> manifest;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("invalid manifest JSON: ") + e.what());
  }
  std::vector<SampleRecord> records;
  for (const auto& j : manifest) {
    SampleRecord r;
    r.keypoints_path = (fs::path(dir) / j.value("keypoints", "")).string();
    std::string lip = j.value("lip", "");
    r.lip_path = lip.empty() ? "" : (fs::path(dir) / lip).string();
    std::string sub = j.value("subtitle", "");
    r.subtitle_path = sub.empty() ? "" : (fs::path(dir) / sub).string();
    std::string audio = j.value("audio_subtitle", "");
    r.audio_subtitle_path = audio.empty() ? "" : (fs::path(dir) / audio).string();
    r.lang = j.value("lang", "en");
    r.split = j.value("split", "train");
    r.gloss = j.value("gloss", "");
    if (!r.subtitle_path.empty()) {
      SubtitleTrack track = parse_subtitles(r.subtitle_path, subtitle_format_for_path(r.subtitle_path));
      if (!track.cues.empty()) r.cue = track.cues.front();
    }
    records.push_back(std::move(r));
  }
  return records;
}

inline std::vector<std::string> load_gloss_vocab(const std::string& dir) {
  std::ifstream is((std::filesystem::path(dir) / "gloss_vocab.txt").string());
  if (!is) throw DataError("cannot open gloss_vocab.txt in " + dir);
  std::vector<std::string> words;
  std::string line;
  while (std::getline(is, line)) {
    std::string w = detail::trim_ws(line);
    if (!w.empty()) words.push_back(w);
  }
  return words;
}

}  // namespace signbench
