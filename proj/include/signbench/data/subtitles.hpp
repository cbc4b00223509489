#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "signbench/core/error.hpp"

namespace signbench {

enum class CueSource { kAudioAligned, kSigningAligned };
enum class SubtitleFormat { kSrt, kVtt };

struct Cue {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string text;
};

struct SubtitleTrack {
  std::vector<Cue> cues;
  CueSource source = CueSource::kAudioAligned;
};

namespace detail {

inline std::string trim_copy(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// "HH:MM:SS,mmm", "HH:MM:SS.mmm" or the VTT short form "MM:SS.mmm".
inline double parse_timestamp(const std::string& raw, size_t line_no) {
  std::string s = trim_copy(raw);
  std::vector<std::string> parts;
  std::string cur;
  for (char c : s) {
    if (c == ':') {
      parts.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  parts.push_back(cur);
  if (parts.size() < 2 || parts.size() > 3)
    throw ParseError("malformed timestamp '" + s + "' at line " + std::to_string(line_no));
  double h = 0, m = 0;
  size_t idx = 0;
  try {
    if (parts.size() == 3) h = std::stod(parts[idx++]);
    m = std::stod(parts[idx++]);
    std::string sec = parts[idx];
    std::replace(sec.begin(), sec.end(), ',', '.');
    if (sec.empty() || sec.find_first_not_of("0123456789.") != std::string::npos)
      throw std::invalid_argument(sec);
    return h * 3600.0 + m * 60.0 + std::stod(sec);
  } catch (const std::exception&) {
    throw ParseError("malformed timestamp '" + s + "' at line " + std::to_string(line_no));
  }
}

inline std::string format_timestamp(double seconds, char ms_sep) {
  long long total_ms = std::llround(seconds * 1000.0);
  long long ms = total_ms % 1000;
  long long sec = (total_ms / 1000) % 60;
  long long min = (total_ms / 60000) % 60;
  long long hr = total_ms / 3600000;
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%02lld:%02lld:%02lld%c%03lld", hr, min, sec, ms_sep, ms);
  return buf;
}

}  // namespace detail

// Parses SRT or WebVTT content. Multi-line cue text is joined with single
// spaces; overlapping cues are accepted (overlap resolution happens later in
// the alignment pipeline). Cues are ordered by start time on return.
inline SubtitleTrack parse_subtitles_text(const std::string& content, SubtitleFormat format) {
  std::istringstream is(content);
  std::string line;
  size_t line_no = 0;
  SubtitleTrack track;

  if (format == SubtitleFormat::kVtt) {
    if (!std::getline(is, line))
      throw ParseError("empty WebVTT input at line 1");
    ++line_no;
    if (detail::trim_copy(line).rfind("WEBVTT", 0) != 0)
      throw ParseError("missing WEBVTT header at line 1");
  }

  std::vector<std::string> block;
  std::vector<size_t> block_lines;
  auto flush = [&]() {
    if (block.empty()) return;
    size_t t = 0;
    // optional numeric index / cue identifier line before the timing line
    while (t < block.size() && block[t].find("-->") == std::string::npos) ++t;
    if (t == block.size()) {
      block.clear();
      block_lines.clear();
      return;  // header/notes block without timing
    }
    const std::string& timing = block[t];
    size_t arrow = timing.find("-->");
    Cue cue;
    cue.start_s = detail::parse_timestamp(timing.substr(0, arrow), block_lines[t]);
    std::string rest = timing.substr(arrow + 3);
    // VTT allows settings after the end timestamp
    std::string end_part = rest;
    size_t sp = detail::trim_copy(rest).find(' ');
    if (sp != std::string::npos) end_part = detail::trim_copy(rest).substr(0, sp);
    cue.end_s = detail::parse_timestamp(end_part, block_lines[t]);
    if (cue.end_s <= cue.start_s)
      throw ParseError("cue ends before it starts at line " + std::to_string(block_lines[t]));
    std::string text;
    for (size_t i = t + 1; i < block.size(); ++i) {
      std::string piece = detail::trim_copy(block[i]);
      if (piece.empty()) continue;
      if (!text.empty()) text += ' ';
      text += piece;
    }
    cue.text = text;
    track.cues.push_back(std::move(cue));
    block.clear();
    block_lines.clear();
  };

  while (std::getline(is, line)) {
    ++line_no;
    if (detail::trim_copy(line).empty()) {
      flush();
    } else {
      block.push_back(line);
      block_lines.push_back(line_no);
    }
  }
  flush();
  std::stable_sort(track.cues.begin(), track.cues.end(),
                   [](const Cue& a, const Cue& b) { return a.start_s < b.start_s; });
  return track;
}

inline SubtitleTrack parse_subtitles(const std::string& path, SubtitleFormat format) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open subtitle file: " + path);
  std::ostringstream buf;
  buf << is.rdbuf();
  return parse_subtitles_text(buf.str(), format);
}

inline SubtitleFormat subtitle_format_for_path(const std::string& path) {
  auto dot = path.rfind('.');
  std::string ext = dot == std::string::npos ? "" : path.substr(dot + 1);
  for (char& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == "vtt") return SubtitleFormat::kVtt;
  return SubtitleFormat::kSrt;
}

inline std::string serialize_subtitles(const SubtitleTrack& track, SubtitleFormat format) {
  std::ostringstream os;
  if (format == SubtitleFormat::kVtt) os << "WEBVTT\n\n";
  int index = 1;
  char sep = format == SubtitleFormat::kSrt ? ',' : '.';
  for (const Cue& cue : track.cues) {
    if (format == SubtitleFormat::kSrt) os << index++ << "\n";
    os << detail::format_timestamp(cue.start_s, sep) << " --> "
       << detail::format_timestamp(cue.end_s, sep) << "\n"
       << cue.text << "\n\n";
  }
  return os.str();
}

inline void write_subtitles(const std::string& path, const SubtitleTrack& track,
                            SubtitleFormat format) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open for writing: " + path);
  os << serialize_subtitles(track, format);
  if (!os) throw DataError("write failure: " + path);
}

}  // namespace signbench
